"""Batch experiment drivers: parameter scans over quantum network targets.

Each scan point builds a target distribution from a named quantum
realization, trains a fresh local model on it, and records the final
distances.  Points are independent jobs: a bounded process pool can run
them in parallel, and per-point seeds are derived from the base seed and
the point's grid coordinates, so parallel and sequential runs produce
identical tables.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from ._output import claim_pair, timestamp
from .localmodel import (
    SamplingController,
    TrainConfig,
    fit_local_model,
    train,
)
from .quantum import (
    HilbertWiring,
    bell_state,
    born_distribution,
    coarse_grain,
    rgb4_povm,
    rotated_state,
    tetra_joint_measurement,
    werner,
)
from .topology import ConfigError, Distribution, NetworkConfig, PartySpec

__all__ = [
    "ScanPoint",
    "ScanResult",
    "ScanError",
    "ring_network",
    "ring_wiring",
    "rgb4_point",
    "tetra_point",
    "scan_rgb4",
    "scan_visibility",
    "scan_grid_2d",
    "theta_mirror_gaps",
    "write_scan_csv",
    "write_scan_outputs",
    "SCAN_CSV_COLUMNS",
]

STATE_FAMILIES = ("psi_plus", "rotated1", "rotated2")
MEASUREMENT_FAMILIES = ("rgb4", "tetra")

SCAN_CSV_COLUMNS = (
    "final_kl",
    "final_euclid",
    "best_raw_loss",
    "iterations",
    "seed",
    "wall_time_s",
    "end_samples",
)


def ring_network(n_parties: int, n_outcomes: int = 4) -> NetworkConfig:
    """Ring of ``n_parties`` parties, each reading its own and the
    previous party's source.

    Party ``a<i>`` (1-based) declares sources ``[lambda<i>, lambda<i-1>]``
    with wrap-around, matching the triangle layout used throughout.
    """
    if n_parties < 3:
        raise ConfigError(f"a ring needs at least 3 parties, got {n_parties}")
    parties = []
    for i in range(1, n_parties + 1):
        prev = n_parties if i == 1 else i - 1
        parties.append(PartySpec(f"a{i}", (f"lambda{i}", f"lambda{prev}"),
                                 n_outcomes))
    return NetworkConfig(tuple(parties))


def ring_wiring(config: NetworkConfig) -> HilbertWiring:
    """Hilbert wiring for a ring of two-source parties.

    Ring structure required: every party declares exactly two sources,
    each source is the first declared source of exactly one party (its
    owner) and the second of exactly one other.  A party's first
    measurement slot then carries the second particle of its second
    declared source, and its second slot the first particle of its first
    declared source -- the orientation that pairs each party's trailing
    slot with the next party's leading slot around the ring.  On the
    standard triangle this reproduces the documented slot order
    ``(3, 0, 1, 4, 5, 2)``, whose distribution equals the
    ``(5, 0, 1, 2, 3, 4)`` form used in the quantum-layer tests.
    """
    owners: dict[str, str] = {}
    for party in config.parties:
        if len(party.sources) != 2:
            raise ConfigError(
                f"ring wiring needs two sources per party; party "
                f"{party.name!r} has {len(party.sources)}"
            )
        own = party.sources[0]
        if own in owners:
            raise ConfigError(
                f"source {own!r} is declared first by both {owners[own]!r} "
                f"and {party.name!r}; not a ring"
            )
        owners[own] = party.name
    order = []
    seen_secondary: set[str] = set()
    for party in config.parties:
        own, prev = party.sources
        if prev not in owners:
            raise ConfigError(
                f"source {prev!r} is never declared first by any party; "
                "not a ring -- pass an explicit wiring instead"
            )
        if prev in seen_secondary:
            raise ConfigError(
                f"source {prev!r} is declared second by two parties; not a ring"
            )
        seen_secondary.add(prev)
        order.append(2 * config.source_index(prev) + 1)
        order.append(2 * config.source_index(own) + 0)
    unused = sorted(set(owners) - seen_secondary)
    if unused:
        raise ConfigError(
            f"source(s) {unused} are never declared second; not a ring"
        )
    return HilbertWiring(tuple(order))


@dataclass(frozen=True)
class ScanPoint:
    """One parameter point of a scan: realization descriptor plus values.

    ``params`` is an ordered tuple of (name, value) pairs; its order sets
    the CSV column order.  ``state_family`` names the pure state each
    source distributes (``psi_plus`` or ``rotated1``/``rotated2``, the
    latter two parameterized by ``theta``); a ``V`` entry in ``params``
    mixes every source with white noise.  ``measurement_family`` picks the
    per-party joint measurement (``rgb4`` parameterized by ``u2``,
    ``tetra`` by ``mu``).  ``coarse`` optionally merges measurement
    outcomes, one entry per old outcome.
    """

    params: tuple[tuple[str, float], ...]
    network: NetworkConfig
    state_family: str
    measurement_family: str
    coarse: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.state_family not in STATE_FAMILIES:
            raise ValueError(
                f"state_family must be one of {STATE_FAMILIES}, "
                f"got {self.state_family!r}"
            )
        if self.measurement_family not in MEASUREMENT_FAMILIES:
            raise ValueError(
                f"measurement_family must be one of {MEASUREMENT_FAMILIES}, "
                f"got {self.measurement_family!r}"
            )
        object.__setattr__(self, "params",
                           tuple((str(k), float(v)) for k, v in self.params))
        if self.coarse is not None:
            object.__setattr__(self, "coarse",
                               tuple(int(x) for x in self.coarse))
        p = self.param_dict()
        if self.measurement_family == "rgb4":
            if "u2" not in p:
                raise ValueError("rgb4 points need a u2 parameter")
            if not 0.0 <= p["u2"] <= 1.0:
                raise ValueError(f"u2 must be in [0, 1], got {p['u2']}")
        if self.measurement_family == "tetra":
            if "mu" not in p:
                raise ValueError("tetra points need a mu parameter")
            if not 0.0 <= p["mu"] <= math.pi / 2:
                raise ValueError(f"mu must be in [0, pi/2], got {p['mu']}")
        if self.state_family in ("rotated1", "rotated2") and "theta" not in p:
            raise ValueError("rotated-state points need a theta parameter")
        if not 0.0 <= p.get("V", 1.0) <= 1.0:
            raise ValueError(f"V must be in [0, 1], got {p['V']}")
        if not 0.0 <= p.get("theta", 0.0) <= math.pi:
            raise ValueError(f"theta must be in [0, pi], got {p['theta']}")

    def param_dict(self) -> dict[str, float]:
        return dict(self.params)

    def param_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.params)

    def _source_state(self):
        p = self.param_dict()
        if self.state_family == "psi_plus":
            pure = bell_state("psi_plus")
        else:
            family = 1 if self.state_family == "rotated1" else 2
            pure = rotated_state(p["theta"], family)
        visibility = p.get("V", 1.0)
        if visibility == 1.0:
            return pure
        return werner(pure, visibility)

    def _party_povm(self):
        p = self.param_dict()
        if self.measurement_family == "rgb4":
            return rgb4_povm(math.sqrt(p["u2"]))
        return tetra_joint_measurement(p["mu"])

    def target(self) -> Distribution:
        """Born-rule target of this realization on the point's network."""
        povm = self._party_povm()
        n_effects = len(povm.effects)
        born_config = self.network
        if self.coarse is not None:
            if len(self.coarse) != n_effects:
                raise ValueError(
                    f"coarse map has {len(self.coarse)} entries for "
                    f"{n_effects} measurement outcomes"
                )
            born_config = NetworkConfig(tuple(
                PartySpec(party.name, party.sources, n_effects)
                for party in self.network.parties
            ))
        state = self._source_state()
        dist = born_distribution(
            born_config,
            [state] * born_config.n_sources,
            [povm] * born_config.n_parties,
            ring_wiring(born_config),
        )
        if self.coarse is not None:
            dist = coarse_grain(dist, [self.coarse] * born_config.n_parties)
            if dist.indexer.shape != self.network.shape:
                raise ValueError(
                    f"coarse-grained shape {dist.indexer.shape} does not "
                    f"match the network shape {self.network.shape}"
                )
        return dist


@dataclass(frozen=True)
class ScanResult:
    """Training outcome at one scan point."""

    point: ScanPoint
    final_kl: float
    final_euclid: float
    best_during_training: float
    iterations: int
    seed: int
    wall_time_seconds: float
    end_sample_count: int

    def __post_init__(self) -> None:
        if self.final_kl < 0 or self.final_euclid < 0:
            raise ValueError("final distances must be nonnegative")

    def csv_row(self) -> list:
        return [*(value for _, value in self.point.params),
                self.final_kl, self.final_euclid, self.best_during_training,
                self.iterations, self.seed, self.wall_time_seconds,
                self.end_sample_count]


class ScanError(RuntimeError):
    """Some scan points failed; carries the completed results."""

    def __init__(self, failures: list[tuple[dict, Exception]],
                 completed: list[ScanResult]):
        self.failures = failures
        self.completed = completed
        listing = "; ".join(f"{params}: {exc}" for params, exc in failures)
        super().__init__(f"{len(failures)} scan point(s) failed: {listing}")


def rgb4_point(u2: float, visibility: float = 1.0) -> ScanPoint:
    """Triangle with noisy psi+ sources and the four-outcome u-family."""
    return ScanPoint(params=(("u2", u2), ("V", visibility)),
                     network=ring_network(3, 4),
                     state_family="psi_plus", measurement_family="rgb4")


def tetra_point(theta: float, mu: float, visibility: float = 1.0,
                network: NetworkConfig | None = None, state_family: int = 1,
                coarse=None, *,
                visibility_param: bool | None = None) -> ScanPoint:
    """Ring with rotated-state sources and the tetrahedral measurement.

    ``visibility_param`` forces the V parameter column on or off; by
    default it appears only when the visibility differs from 1, so 2D
    grids at full visibility keep plain (theta, mu) rows while
    visibility sweeps stay rectangular even when the grid contains 1.
    """
    params = [("theta", theta), ("mu", mu)]
    if visibility_param is None:
        visibility_param = visibility != 1.0
    if visibility_param:
        params.append(("V", visibility))
    return ScanPoint(params=tuple(params),
                     network=network if network is not None else ring_network(3, 4),
                     state_family=f"rotated{state_family}",
                     measurement_family="tetra",
                     coarse=tuple(coarse) if coarse is not None else None)


def point_seed(base_seed: int, coords: tuple[int, ...]) -> int:
    """Deterministic per-point seed from the base seed and grid coordinates."""
    return int(np.random.SeedSequence(base_seed, spawn_key=coords).generate_state(1)[0])


def _run_task(task) -> ScanResult:
    point, tcfg, ctrl, width, depth, restarts = task
    target = point.target()
    t0 = time.perf_counter()
    _, result = fit_local_model(point.network, target, tcfg, ctrl,
                                width=width, depth=depth, restarts=restarts)
    return ScanResult(
        point=point,
        final_kl=result.final_kl,
        final_euclid=result.final_euclid,
        best_during_training=result.best_during_training,
        iterations=result.iterations_run,
        seed=tcfg.seed,
        wall_time_seconds=time.perf_counter() - t0,
        end_sample_count=result.end_samples,
    )


def _execute(points: list[tuple[tuple[int, ...], ScanPoint]],
             tcfg: TrainConfig, ctrl: SamplingController | None,
             width: int, depth: int, restarts: int, jobs: int) -> list[ScanResult]:
    tasks = []
    for coords, point in points:
        if ctrl is None:
            point_ctrl = SamplingController(n_outcomes=point.network.indexer().total)
        else:
            point_ctrl = ctrl
        tasks.append((point, replace(tcfg, seed=point_seed(tcfg.seed, coords)),
                      point_ctrl, width, depth, restarts))
    if jobs <= 1:
        return [_run_task(t) for t in tasks]
    out: list[ScanResult | None] = [None] * len(tasks)
    failures: list[tuple[dict, Exception]] = []
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = {pool.submit(_run_task, t): i for i, t in enumerate(tasks)}
        for fut in as_completed(futures):
            i = futures[fut]
            try:
                out[i] = fut.result()
            except Exception as exc:  # noqa: BLE001 - enumerate per-point failures
                failures.append((tasks[i][0].param_dict(), exc))
    if failures:
        raise ScanError(failures, [r for r in out if r is not None])
    return [r for r in out if r is not None]


def scan_rgb4(u2_grid, visibility: float = 1.0,
              tcfg: TrainConfig | None = None,
              ctrl: SamplingController | None = None, *,
              width: int = 60, depth: int = 4, restarts: int = 1,
              jobs: int = 1) -> list[ScanResult]:
    """Fit local models along a grid of u^2 values at fixed visibility."""
    u2_grid = [float(u2) for u2 in u2_grid]
    for u2 in u2_grid:
        if not 0.5 <= u2 <= 1.0:
            raise ValueError(f"u2 grid values must lie in [1/2, 1], got {u2}")
    tcfg = tcfg or TrainConfig()
    points = [((i,), rgb4_point(u2, visibility)) for i, u2 in enumerate(u2_grid)]
    return _execute(points, tcfg, ctrl, width, depth, restarts, jobs)


def scan_visibility(v_grid, *, u2: float | None = None,
                    theta: float | None = None, mu: float | None = None,
                    network: NetworkConfig | None = None,
                    state_family: int = 1, coarse=None,
                    tcfg: TrainConfig | None = None,
                    ctrl: SamplingController | None = None,
                    width: int = 60, depth: int = 4, restarts: int = 1,
                    jobs: int = 1) -> list[ScanResult]:
    """Fit local models along a visibility grid at one fixed realization.

    Pass ``u2`` for the triangle four-outcome family, or ``theta`` and
    ``mu`` for a ring realization with rotated sources and the
    tetrahedral measurement.
    """
    v_grid = [float(v) for v in v_grid]
    for v in v_grid:
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"V grid values must lie in [0, 1], got {v}")
    if (u2 is None) == (theta is None and mu is None):
        raise ValueError("pass either u2 or both theta and mu")
    tcfg = tcfg or TrainConfig()
    points = []
    for i, v in enumerate(v_grid):
        if u2 is not None:
            point = rgb4_point(u2, v)
        else:
            if theta is None or mu is None:
                raise ValueError("theta and mu must both be given")
            point = tetra_point(theta, mu, v, network=network,
                                state_family=state_family, coarse=coarse,
                                visibility_param=True)
        points.append(((i,), point))
    return _execute(points, tcfg, ctrl, width, depth, restarts, jobs)


def scan_grid_2d(network: NetworkConfig | None, theta_grid, mu_grid,
                 state_family: int = 1, coarse=None,
                 tcfg: TrainConfig | None = None,
                 ctrl: SamplingController | None = None, *,
                 width: int = 60, depth: int = 4, restarts: int = 1,
                 jobs: int = 1,
                 warm_start: bool = False) -> list[list[ScanResult]]:
    """Fit one local model per (theta, mu) grid cell on a ring network.

    Returns the results as a theta-major matrix.  Every cell trains from
    a fresh initialization by default; ``warm_start=True`` instead reuses
    the previous cell's trained net along each theta row (sequential
    execution, ``restarts`` ignored).
    """
    network = network if network is not None else ring_network(3, 4)
    for party in network.parties:
        if len(party.sources) != 2:
            raise ConfigError(
                f"2D scans need a ring network; party {party.name!r} "
                f"has {len(party.sources)} sources"
            )
    theta_grid = [float(t) for t in theta_grid]
    mu_grid = [float(m) for m in mu_grid]
    tcfg = tcfg or TrainConfig()
    points = []
    for i, theta in enumerate(theta_grid):
        for j, mu in enumerate(mu_grid):
            points.append(((i, j), tetra_point(theta, mu, network=network,
                                               state_family=state_family,
                                               coarse=coarse)))
    if warm_start:
        flat = _execute_warm(points, tcfg, ctrl, width, depth)
    else:
        flat = _execute(points, tcfg, ctrl, width, depth, restarts, jobs)
    n_mu = len(mu_grid)
    return [flat[i * n_mu:(i + 1) * n_mu] for i in range(len(theta_grid))]


def _execute_warm(points, tcfg: TrainConfig,
                  ctrl: SamplingController | None,
                  width: int, depth: int) -> list[ScanResult]:
    results = []
    net = None
    for coords, point in points:
        if ctrl is None:
            point_ctrl = SamplingController(n_outcomes=point.network.indexer().total)
        else:
            point_ctrl = ctrl
        seeded = replace(tcfg, seed=point_seed(tcfg.seed, coords))
        target = point.target()
        t0 = time.perf_counter()
        if coords[-1] == 0 or net is None:
            net, result = fit_local_model(point.network, target, seeded,
                                          point_ctrl, width=width, depth=depth)
        else:
            result = train(net, target, seeded, point_ctrl, keep_history=False)
        results.append(ScanResult(
            point=point,
            final_kl=result.final_kl,
            final_euclid=result.final_euclid,
            best_during_training=result.best_during_training,
            iterations=result.iterations_run,
            seed=seeded.seed,
            wall_time_seconds=time.perf_counter() - t0,
            end_sample_count=result.end_samples,
        ))
    return results


def theta_mirror_gaps(results: list[ScanResult],
                      tol: float = 1e-9) -> list[float | None]:
    """|KL(theta) - KL(pi - theta)| at equal mu, as a diagnostic.

    ``None`` where the mirrored cell is absent from the scan.  This is a
    reported observable, not an asserted symmetry.
    """
    table = {}
    for r in results:
        p = r.point.param_dict()
        if "theta" in p and "mu" in p:
            table[(round(p["theta"] / tol), round(p["mu"] / tol))] = r.final_kl
    gaps: list[float | None] = []
    for r in results:
        p = r.point.param_dict()
        if "theta" not in p or "mu" not in p:
            gaps.append(None)
            continue
        mirror = table.get((round((math.pi - p["theta"]) / tol),
                            round(p["mu"] / tol)))
        gaps.append(None if mirror is None else abs(r.final_kl - mirror))
    return gaps


def _flatten(results) -> list[ScanResult]:
    if results and isinstance(results[0], list):
        return [r for row in results for r in row]
    return list(results)


def write_scan_csv(results, path, extra: dict[str, list] | None = None) -> Path:
    """Write scan rows: param columns, result columns, optional extras."""
    flat = _flatten(results)
    if not flat:
        raise ValueError("no scan results to write")
    names = flat[0].point.param_names()
    for r in flat:
        if r.point.param_names() != names:
            raise ValueError("scan results have inconsistent parameter names")
    extra = extra or {}
    for column, values in extra.items():
        if len(values) != len(flat):
            raise ValueError(f"extra column {column!r} has {len(values)} "
                             f"values for {len(flat)} rows")
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([*names, *SCAN_CSV_COLUMNS, *extra.keys()])
        for i, r in enumerate(flat):
            row = r.csv_row()
            row.extend("" if extra[c][i] is None else extra[c][i]
                       for c in extra)
            writer.writerow(row)
    return path


def write_scan_outputs(name: str, results, out_dir,
                       tcfg: TrainConfig, ctrl: SamplingController | None,
                       extra: dict[str, list] | None = None,
                       settings: dict | None = None) -> tuple[Path, Path]:
    """Write the CSV table plus a JSON sidecar with the full run configs.

    Files are named ``scan_<name>_<timestamp>`` with a numeric suffix on
    collision; returns (csv_path, json_path).
    """
    flat = _flatten(results)
    if not flat:
        raise ValueError("no scan results to write")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = claim_pair(out_dir, f"scan_{name}_{timestamp()}")
    write_scan_csv(flat, csv_path, extra)
    first = flat[0].point
    sidecar = {
        "scan": name,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "network": first.network.to_dict(),
        "state_family": first.state_family,
        "measurement_family": first.measurement_family,
        "coarse": list(first.coarse) if first.coarse is not None else None,
        "train_config": {
            "max_iters": tcfg.max_iters,
            "patience": tcfg.patience,
            "stage2_euclid_iters": tcfg.stage2_euclid_iters,
            "learning_rate": tcfg.learning_rate,
            "seed": tcfg.seed,
            "eval_samples": tcfg.eval_samples,
            "smooth_window": tcfg.smooth_window,
        },
        "controller": None if ctrl is None else {
            "n_outcomes": ctrl.n_outcomes,
            "loss_kind": ctrl.loss_kind,
            "bias": ctrl.bias,
            "bias_max": ctrl.bias_max,
            "n_min": ctrl.n_min,
            "n_max": ctrl.n_max,
            "stagnation_window": ctrl.stagnation_window,
        },
        "settings": settings or {},
        "n_points": len(flat),
        "csv": csv_path.name,
    }
    json_path.write_text(json.dumps(sidecar, indent=1))
    return csv_path, json_path
