"""Gradient training of local models against a target distribution.

Stage 1 minimizes the configured loss (KL by default) with Adam; an
optional stage 2 continues on the Euclidean distance.  Every iteration
draws a fresh hidden sample whose size follows the adaptive controller,
improvement is judged on a smoothed window of raw losses, and the final
distances come from one large fresh evaluation sample.

Each stagnation event (no smoothed improvement for a full window) bumps
the controller bias and decays the learning rate by ``lr_decay``.  With
the per-iteration sample count capped, the decay is what keeps the
noise floor falling late in training: the gradient noise from fresh
finite samples no longer shrinks once the cap binds, so the step size
has to shrink instead for the iterates to settle near the optimum.
"""

from __future__ import annotations

import json
import time
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..topology import Distribution, NetworkConfig, euclidean_distance_raw, kl_divergence_raw
from .net import LocalModelNet, ResponseBlock, _accumulate_joint, _forward_backward, _party_probabilities, init_net
from .sampling import SamplingController, bump_bias, next_sample_count

__all__ = [
    "TrainConfig",
    "TrainResult",
    "IterationRecord",
    "train",
    "evaluate",
    "fit_local_model",
    "save_checkpoint",
    "load_checkpoint",
]

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    """Knobs for one training run."""

    max_iters: int = 10_000
    patience: int = 1_000
    stage2_euclid_iters: int = 0
    learning_rate: float = 1e-3
    lr_decay: float = 0.5
    lr_min: float = 1e-5
    seed: int = 0
    eval_samples: int = 1_000_000
    smooth_window: int = 50

    def __post_init__(self) -> None:
        if self.max_iters < 1 or self.patience < 1:
            raise ValueError("max_iters and patience must be >= 1")
        if self.stage2_euclid_iters < 0:
            raise ValueError("stage2_euclid_iters must be >= 0")
        if self.learning_rate <= 0 or self.eval_samples < 1 or self.smooth_window < 1:
            raise ValueError("learning_rate, eval_samples, smooth_window must be positive")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ValueError(f"lr_decay must lie in (0, 1], got {self.lr_decay}")
        if not 0.0 < self.lr_min <= self.learning_rate:
            raise ValueError(
                f"lr_min must lie in (0, learning_rate], got {self.lr_min}"
            )
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")


@dataclass(frozen=True)
class IterationRecord:
    """One training iteration: raw loss before the step, sample size, bias."""

    iteration: int
    stage: int
    raw_loss: float
    n_samples: int
    bias: float


@dataclass(frozen=True)
class TrainResult:
    """Outcome of one training run.

    ``final_kl`` and ``final_euclid`` are high-precision estimates from a
    single fresh evaluation sample; ``best_during_training`` is the
    smallest raw (sampling-noise-affected) loss of the last stage run.
    """

    final_kl: float
    final_euclid: float
    best_during_training: float
    iterations_run: int
    seed: int
    loss_kind: str
    end_bias: float
    end_samples: int
    end_learning_rate: float
    wall_time_s: float
    checkpoint_path: str | None = None
    history: tuple[IterationRecord, ...] = field(default=(), repr=False)

    def __post_init__(self) -> None:
        if self.final_kl < 0 or self.final_euclid < 0:
            raise ValueError("final distances must be nonnegative")

    def summary_dict(self) -> dict:
        return {
            "final_kl": self.final_kl,
            "final_euclid": self.final_euclid,
            "best_during_training": self.best_during_training,
            "iterations_run": self.iterations_run,
            "seed": self.seed,
            "loss_kind": self.loss_kind,
            "end_bias": self.end_bias,
            "end_samples": self.end_samples,
            "end_learning_rate": self.end_learning_rate,
            "wall_time_s": self.wall_time_s,
        }


class _Adam:
    """Adam on a list of flat parameter vectors, moments kept in float64."""

    def __init__(self, blocks: tuple[ResponseBlock, ...], learning_rate: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
        self.lr = learning_rate
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros(b.params.size) for b in blocks]
        self.v = [np.zeros(b.params.size) for b in blocks]

    def step(self, blocks: tuple[ResponseBlock, ...], grads: list[np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for block, g, m, v in zip(blocks, grads, self.m, self.v):
            g64 = g.astype(np.float64, copy=False)
            m *= self.beta1
            m += (1 - self.beta1) * g64
            v *= self.beta2
            v += (1 - self.beta2) * g64 * g64
            update = self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            block.params -= update.astype(block.dtype)


def evaluate(net: LocalModelNet, target: Distribution, n_eval: int = 1_000_000,
             rng: np.random.Generator | None = None) -> tuple[float, float]:
    """KL and Euclidean distances from one fresh n_eval-sample estimate."""
    if target.indexer.shape != net.config.shape:
        raise ValueError(
            f"target shape {target.indexer.shape} != network shape {net.config.shape}"
        )
    if n_eval < 1:
        raise ValueError(f"n_eval must be >= 1, got {n_eval}")
    if rng is None:
        rng = np.random.default_rng()
    m = net.config.n_sources
    acc = np.zeros(net.indexer().total, dtype=np.float64)
    remaining = n_eval
    chunk = 262_144
    while remaining > 0:
        n = min(chunk, remaining)
        values = rng.random((n, m), dtype=net.dtype if net.dtype != np.float64 else np.float64)
        acc += _accumulate_joint(net, _party_probabilities(net, values))
        remaining -= n
    estimate = acc / n_eval
    return (
        kl_divergence_raw(target.probs, estimate),
        euclidean_distance_raw(target.probs, estimate),
    )


def train(net: LocalModelNet, target: Distribution, tcfg: TrainConfig,
          ctrl: SamplingController, keep_history: bool = True) -> TrainResult:
    """Adam-train a local model in place; see the module docstring for the loop."""
    if target.indexer.shape != net.config.shape:
        raise ValueError(
            f"target shape {target.indexer.shape} != network shape {net.config.shape}"
        )
    if ctrl.n_outcomes != net.indexer().total:
        raise ValueError(
            f"controller n_outcomes {ctrl.n_outcomes} != network total "
            f"{net.indexer().total}"
        )
    t0 = time.perf_counter()
    ss = np.random.SeedSequence(tcfg.seed)
    train_ss, eval_ss = ss.spawn(2)
    rng = np.random.default_rng(train_ss)
    target_arr = target.probs
    m = net.config.n_sources
    sample_dtype = np.float64 if net.dtype == np.float64 else net.dtype

    adam = _Adam(net.blocks, tcfg.learning_rate)
    stages: list[tuple[str, int]] = [(ctrl.loss_kind, tcfg.max_iters)]
    if tcfg.stage2_euclid_iters > 0:
        stages.append(("euclid", tcfg.stage2_euclid_iters))

    history: list[IterationRecord] = []
    iterations_run = 0
    best_raw = np.inf
    n_s = ctrl.n_min
    for stage_idx, (kind, stage_iters) in enumerate(stages):
        ctrl = replace(ctrl, loss_kind=kind)
        window: deque[float] = deque(maxlen=tcfg.smooth_window)
        best_smoothed = np.inf
        best_raw = np.inf
        since_improve = 0
        since_bump = 0
        for _ in range(stage_iters):
            values = rng.random((n_s, m), dtype=sample_dtype)
            raw_loss, _, grads = _forward_backward(net, target_arr, values, kind)
            adam.step(net.blocks, grads)
            iterations_run += 1
            if keep_history:
                history.append(IterationRecord(iterations_run, stage_idx, raw_loss,
                                               n_s, ctrl.bias))
            best_raw = min(best_raw, raw_loss)
            window.append(raw_loss)
            smoothed = sum(window) / len(window)
            if smoothed < best_smoothed:
                best_smoothed = smoothed
                since_improve = 0
                since_bump = 0
            else:
                since_improve += 1
                since_bump += 1
            if since_bump >= ctrl.stagnation_window:
                ctrl = bump_bias(ctrl, since_bump)
                adam.lr = max(adam.lr * tcfg.lr_decay, tcfg.lr_min)
                since_bump = 0
            if since_improve >= tcfg.patience:
                break
            n_s = next_sample_count(ctrl, smoothed)

    final_kl, final_euclid = evaluate(net, target, tcfg.eval_samples,
                                      np.random.default_rng(eval_ss))
    return TrainResult(
        final_kl=final_kl,
        final_euclid=final_euclid,
        best_during_training=float(best_raw),
        iterations_run=iterations_run,
        seed=tcfg.seed,
        loss_kind=stages[-1][0],
        end_bias=ctrl.bias,
        end_samples=n_s,
        end_learning_rate=adam.lr,
        wall_time_s=time.perf_counter() - t0,
        history=tuple(history) if keep_history else (),
    )


def fit_local_model(config: NetworkConfig, target: Distribution,
                    tcfg: TrainConfig | None = None,
                    ctrl: SamplingController | None = None,
                    width: int = 60, depth: int = 4, restarts: int = 1,
                    dtype=np.float32,
                    keep_history: bool = False) -> tuple[LocalModelNet, TrainResult]:
    """Train from ``restarts`` independent initializations, keep the best run.

    Runs are ranked by the final high-precision distance in the kind the
    last stage optimized.  Restart r derives its init and train seeds from
    the base seed, so the whole fit is reproducible from one integer.
    """
    if restarts < 1:
        raise ValueError(f"restarts must be >= 1, got {restarts}")
    tcfg = tcfg or TrainConfig()
    ctrl = ctrl or SamplingController(n_outcomes=config.indexer().total)
    best: tuple[LocalModelNet, TrainResult] | None = None
    final_kind = "euclid" if tcfg.stage2_euclid_iters > 0 else ctrl.loss_kind
    for r in range(restarts):
        child = np.random.SeedSequence(tcfg.seed, spawn_key=(r,))
        init_seed, train_seed = (int(s) for s in child.generate_state(2))
        net = init_net(config, width=width, depth=depth, seed=init_seed, dtype=dtype)
        result = train(net, target, replace(tcfg, seed=train_seed), ctrl,
                       keep_history=keep_history)
        score = result.final_euclid if final_kind == "euclid" else result.final_kl
        if best is None or score < (best[1].final_euclid if final_kind == "euclid"
                                    else best[1].final_kl):
            best = (net, result)
    assert best is not None
    return best


def save_checkpoint(path: str | Path, net: LocalModelNet, result: TrainResult,
                    ctrl: SamplingController) -> None:
    """Versioned JSON checkpoint: config, block parameters, controller, summary."""
    blocks = []
    for party, block in zip(net.config.parties, net.blocks):
        blocks.append({
            "party": party.name,
            "input_dim": block.input_dim,
            "width": block.width,
            "depth": block.depth,
            "output_dim": block.output_dim,
            "layers": {
                name: getattr(block, name).ravel().astype(np.float64).tolist()
                for name in ("w_in", "b_in", "w_mid", "b_mid", "w_out", "b_out")
            },
        })
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "config": net.config.to_dict(),
        "dtype": net.dtype.name,
        "controller": {
            "n_outcomes": ctrl.n_outcomes,
            "loss_kind": ctrl.loss_kind,
            "bias": ctrl.bias,
            "bias_max": ctrl.bias_max,
            "n_min": ctrl.n_min,
            "n_max": ctrl.n_max,
            "stagnation_window": ctrl.stagnation_window,
        },
        "result": result.summary_dict(),
        "blocks": blocks,
    }
    Path(path).write_text(json.dumps(doc))


def load_checkpoint(path: str | Path) -> tuple[LocalModelNet, dict]:
    """Rebuild the net from a checkpoint; returns it with the raw document."""
    doc = json.loads(Path(path).read_text())
    version = doc.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version!r}")
    config = NetworkConfig.from_dict(doc["config"])
    dtype = np.dtype(doc["dtype"])
    blocks = []
    for entry in doc["blocks"]:
        block = ResponseBlock(entry["input_dim"], entry["width"], entry["depth"],
                              entry["output_dim"], dtype=dtype)
        for name in ("w_in", "b_in", "w_mid", "b_mid", "w_out", "b_out"):
            view = getattr(block, name)
            view[...] = np.asarray(entry["layers"][name], dtype=dtype).reshape(view.shape)
        blocks.append(block)
    return LocalModelNet(config, tuple(blocks)), doc
