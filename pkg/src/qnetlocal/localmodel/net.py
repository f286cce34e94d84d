"""Feedforward response blocks wired into a network-local model.

Each party owns a small MLP (its response block) that maps the hidden
variables it receives to a probability vector over its outcomes.  The
joint distribution estimate is the sample average of the product of
party probabilities, one factor per party, over iid uniform hidden
samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..topology import (
    Distribution,
    NetworkConfig,
    OutcomeIndexer,
    euclidean_distance_raw,
    kl_divergence_raw,
    KL_CLAMP,
)
from .backends import get_backend

__all__ = [
    "HiddenSample",
    "ResponseBlock",
    "LocalModelNet",
    "init_net",
    "draw_hidden",
    "forward_empirical",
    "loss",
    "gradient",
    "export_strategies",
    "strategy_csv_header",
]

LOSS_KINDS = ("kl", "euclid")


def _check_loss_kind(kind: str) -> None:
    if kind not in LOSS_KINDS:
        raise ValueError(f"loss kind must be one of {LOSS_KINDS}, got {kind!r}")


@dataclass(frozen=True)
class HiddenSample:
    """Batch of hidden-variable draws, one row per sample, one column per source."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values)
        object.__setattr__(self, "values", v)
        if v.ndim != 2:
            raise ValueError(f"expected a 2-D sample matrix, got shape {v.shape}")
        if v.size and (v.min() < 0.0 or v.max() >= 1.0):
            raise ValueError("hidden-variable entries must lie in [0, 1)")

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_sources(self) -> int:
        return self.values.shape[1]


def draw_hidden(rng: np.random.Generator, n_samples: int, n_sources: int,
                dtype=np.float32) -> HiddenSample:
    """Fresh iid uniform [0,1) hidden-variable sample."""
    return HiddenSample(rng.random((n_samples, n_sources), dtype=np.dtype(dtype)))


class ResponseBlock:
    """One party's MLP: hidden variables in, outcome probabilities out.

    Parameters live in a single flat vector; the per-layer arrays are
    writable views into it, laid out as w_in, b_in, w_mid, b_mid, w_out,
    b_out, each row-major.  Hidden layers use ReLU; the output layer is
    normalized with a softmax so every output row is a probability
    vector.
    """

    def __init__(self, input_dim: int, width: int, depth: int, output_dim: int,
                 params: np.ndarray | None = None, dtype=np.float32) -> None:
        if input_dim < 1 or width < 1 or depth < 1 or output_dim < 2:
            raise ValueError(
                f"invalid block shape: input_dim={input_dim}, width={width}, "
                f"depth={depth}, output_dim={output_dim}"
            )
        self.input_dim = input_dim
        self.width = width
        self.depth = depth
        self.output_dim = output_dim
        self.dtype = np.dtype(dtype)
        n = self.n_parameters(input_dim, width, depth, output_dim)
        if params is None:
            params = np.zeros(n, dtype=self.dtype)
        else:
            params = np.asarray(params, dtype=self.dtype).reshape(-1)
            if params.size != n:
                raise ValueError(f"expected {n} parameters, got {params.size}")
        self.params = params
        self._bind_views()

    @staticmethod
    def n_parameters(input_dim: int, width: int, depth: int, output_dim: int) -> int:
        return (
            width * input_dim + width
            + (depth - 1) * (width * width + width)
            + output_dim * width + output_dim
        )

    def _bind_views(self) -> None:
        w, d, o, din = self.width, self.depth, self.output_dim, self.input_dim
        sizes = [w * din, w, (d - 1) * w * w, (d - 1) * w, o * w, o]
        shapes = [(w, din), (w,), (d - 1, w, w), (d - 1, w), (o, w), (o,)]
        views = []
        pos = 0
        for size, shape in zip(sizes, shapes):
            views.append(self.params[pos : pos + size].reshape(shape))
            pos += size
        self.w_in, self.b_in, self.w_mid, self.b_mid, self.w_out, self.b_out = views

    def layer_arrays(self) -> tuple[np.ndarray, ...]:
        return (self.w_in, self.b_in, self.w_mid, self.b_mid, self.w_out, self.b_out)

    def initialize(self, rng: np.random.Generator) -> None:
        """Uniform fan-in-scaled weights, zero biases."""
        for w, fan_in in ((self.w_in, self.input_dim), (self.w_mid, self.width),
                          (self.w_out, self.width)):
            bound = 1.0 / np.sqrt(fan_in)
            w[...] = rng.uniform(-bound, bound, size=w.shape).astype(self.dtype)
        for b in (self.b_in, self.b_mid, self.b_out):
            b[...] = 0

    def probabilities(self, x: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        """Outcome probabilities for a batch of input rows."""
        x = np.ascontiguousarray(x, dtype=self.dtype)
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise ValueError(f"expected inputs of shape (n, {self.input_dim})")
        if out is None:
            out = np.empty((x.shape[0], self.output_dim), dtype=self.dtype)
        get_backend().mlp_probs(x, *self.layer_arrays(), out)
        return out

    def copy(self) -> "ResponseBlock":
        return ResponseBlock(self.input_dim, self.width, self.depth,
                             self.output_dim, self.params.copy(), self.dtype)


@dataclass
class LocalModelNet:
    """Response blocks for every party of a network, sharing hidden sources."""

    config: NetworkConfig
    blocks: tuple[ResponseBlock, ...]
    wiring: tuple[tuple[int, ...], ...] = field(init=False)

    def __post_init__(self) -> None:
        if len(self.blocks) != self.config.n_parties:
            raise ValueError(
                f"{len(self.blocks)} blocks for {self.config.n_parties} parties"
            )
        wiring = []
        for party, block in zip(self.config.parties, self.blocks):
            if block.input_dim != len(party.sources):
                raise ValueError(
                    f"party {party.name!r}: block input_dim {block.input_dim} != "
                    f"{len(party.sources)} sources"
                )
            if block.output_dim != party.n_outcomes:
                raise ValueError(
                    f"party {party.name!r}: block output_dim {block.output_dim} != "
                    f"{party.n_outcomes} outcomes"
                )
            wiring.append(self.config.party_source_indices(party))
        self.wiring = tuple(wiring)

    @property
    def dtype(self) -> np.dtype:
        return self.blocks[0].dtype

    @property
    def n_parameters(self) -> int:
        return sum(b.params.size for b in self.blocks)

    def indexer(self) -> OutcomeIndexer:
        return self.config.indexer()

    def copy(self) -> "LocalModelNet":
        return LocalModelNet(self.config, tuple(b.copy() for b in self.blocks))

    # Column offsets of each party's probability block in the concatenated
    # per-sample probability matrix.
    def _offsets(self) -> np.ndarray:
        outs = [0] + [b.output_dim for b in self.blocks]
        return np.cumsum(outs, dtype=np.int64)

    def _prefix_offsets(self) -> np.ndarray:
        sizes = [1]
        for b in self.blocks[:-1]:
            sizes.append(sizes[-1] * b.output_dim)
        return np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)


def init_net(config: NetworkConfig, width: int = 60, depth: int = 4,
             seed: int | np.random.SeedSequence = 0, dtype=np.float32) -> LocalModelNet:
    """Freshly initialized local model; deterministic for a given seed."""
    if width < 1 or depth < 1:
        raise ValueError(f"width and depth must be >= 1, got {width}, {depth}")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    blocks = []
    for party, child in zip(config.parties, ss.spawn(config.n_parties)):
        block = ResponseBlock(len(party.sources), width, depth, party.n_outcomes,
                              dtype=dtype)
        block.initialize(np.random.default_rng(child))
        blocks.append(block)
    return LocalModelNet(config, tuple(blocks))


def _party_probabilities(net: LocalModelNet, values: np.ndarray) -> np.ndarray:
    """Concatenated per-party probability matrix for a hidden-sample batch."""
    offsets = net._offsets()
    p_cat = np.empty((values.shape[0], int(offsets[-1])), dtype=net.dtype)
    for block, idxs, lo, hi in zip(net.blocks, net.wiring, offsets, offsets[1:]):
        x = np.ascontiguousarray(values[:, idxs], dtype=net.dtype)
        block.probabilities(x, out=p_cat[:, lo:hi])
    return p_cat


def _accumulate_joint(net: LocalModelNet, p_cat: np.ndarray) -> np.ndarray:
    acc = np.zeros(net.indexer().total, dtype=np.float64)
    get_backend().joint_accumulate(p_cat, net._offsets(), acc)
    return acc


def forward_empirical(net: LocalModelNet, sample: HiddenSample) -> Distribution:
    """Sample-average joint distribution estimate as a validated Distribution.

    The estimate is renormalized by its own sum (equal to the sample count
    up to floating-point rounding) so the result always validates.
    """
    if sample.n_sources != net.config.n_sources:
        raise ValueError(
            f"sample has {sample.n_sources} columns, network has "
            f"{net.config.n_sources} sources"
        )
    if sample.n_samples == 0:
        raise ValueError("empty hidden sample")
    acc = _accumulate_joint(net, _party_probabilities(net, sample.values))
    return Distribution(acc / acc.sum(), net.indexer())


def _loss_raw(target: np.ndarray, estimate: np.ndarray, kind: str) -> float:
    if kind == "kl":
        return kl_divergence_raw(target, estimate)
    return euclidean_distance_raw(target, estimate)


def loss(target: Distribution, estimate: Distribution, kind: str) -> float:
    """Training loss between target and estimate (target is the first KL slot)."""
    _check_loss_kind(kind)
    if target.indexer.shape != estimate.indexer.shape:
        raise ValueError(
            f"shape mismatch: {target.indexer.shape} vs {estimate.indexer.shape}"
        )
    return _loss_raw(target.probs, estimate.probs, kind)


def _loss_gradient_wrt_estimate(target: np.ndarray, estimate: np.ndarray,
                                kind: str, value: float) -> np.ndarray:
    grad = np.zeros_like(estimate)
    if kind == "kl":
        hot = estimate > KL_CLAMP
        grad[hot] = -target[hot] / estimate[hot]
    else:
        if value > 0:
            grad[:] = (estimate - target) / value
    return grad


def _forward_backward(net: LocalModelNet, target: np.ndarray, values: np.ndarray,
                      kind: str) -> tuple[float, np.ndarray, list[np.ndarray]]:
    """Raw loss, joint estimate, and per-block flat parameter gradients."""
    backend = get_backend()
    n_samples = values.shape[0]
    offsets = net._offsets()
    p_cat = _party_probabilities(net, values)
    acc = _accumulate_joint(net, p_cat)
    estimate = acc / n_samples
    value = _loss_raw(target, estimate, kind)

    grad_est = _loss_gradient_wrt_estimate(target, estimate, kind, value)
    grad_acc = grad_est / n_samples
    dp_cat = np.empty_like(p_cat)
    backend.joint_backward(p_cat, offsets, net._prefix_offsets(), grad_acc, dp_cat)

    grads = []
    for block, idxs, lo, hi in zip(net.blocks, net.wiring, offsets, offsets[1:]):
        flat = np.zeros_like(block.params)
        shadow = ResponseBlock(block.input_dim, block.width, block.depth,
                               block.output_dim, flat, block.dtype)
        x = np.ascontiguousarray(values[:, idxs], dtype=net.dtype)
        backend.mlp_backward(x, *block.layer_arrays(), dp_cat[:, lo:hi],
                             *shadow.layer_arrays())
        grads.append(shadow.params)
    return value, estimate, grads


def gradient(net: LocalModelNet, target: Distribution, sample: HiddenSample,
             kind: str) -> list[np.ndarray]:
    """Exact loss gradient for a fixed sample, one flat vector per block."""
    _check_loss_kind(kind)
    if target.indexer.shape != net.config.shape:
        raise ValueError(
            f"target shape {target.indexer.shape} != network shape {net.config.shape}"
        )
    _, _, grads = _forward_backward(net, target.probs, sample.values, kind)
    return grads


def export_strategies(net: LocalModelNet, party: str, grid_resolution: int) -> np.ndarray:
    """Response probabilities of one two-source party on a hidden-variable grid.

    Rows run over the lattice (i/res, j/res) with the first source's value
    varying slowest; columns are lambda_a, lambda_b, then one probability
    per outcome.
    """
    if grid_resolution < 1:
        raise ValueError(f"grid_resolution must be >= 1, got {grid_resolution}")
    names = [p.name for p in net.config.parties]
    try:
        pos = names.index(party)
    except ValueError:
        raise ValueError(f"unknown party {party!r}; parties are {names}") from None
    block = net.blocks[pos]
    if block.input_dim != 2:
        raise ValueError(
            f"party {party!r} has {block.input_dim} sources; strategy grids "
            "need exactly 2"
        )
    lam = np.arange(grid_resolution, dtype=np.float64) / grid_resolution
    aa, bb = np.meshgrid(lam, lam, indexing="ij")
    x = np.column_stack([aa.ravel(), bb.ravel()])
    probs = block.probabilities(x)
    return np.column_stack([x, probs.astype(np.float64)])


def strategy_csv_header(n_outcomes: int) -> str:
    return "lambda_a,lambda_b," + ",".join(f"p_{a}" for a in range(n_outcomes))
