"""Sampling-error calibration: how finite-batch distance estimates scale.

Training measures its loss on finite hidden-variable batches, so the
measured distance between a model estimate and the target has a
statistical floor even for a perfect model.  This module quantifies that
floor with a direct multinomial experiment: per grid cell, draw one
random reference distribution, sample many empirical estimates of it at
a fixed sample count, and record the mean divergences.  Least-squares
fits of the resulting table recover the scaling laws behind the adaptive
sample-size schedule,

    Euclidean distance ~ c_E / sqrt(N_s)          (c_E close to 1)
    KL divergence      ~ c_K * N_o / N_s          (c_K close to 1/2)

where N_s is the sample count and N_o the number of joint outcomes.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from ._output import claim_pair, timestamp
from .topology import KL_CLAMP

__all__ = [
    "CALIBRATION_CSV_COLUMNS",
    "KL_FIT_MIN_SAMPLES_PER_OUTCOME",
    "CalibrationCell",
    "CalibrationFits",
    "CalibrationReport",
    "calibration_csv",
    "fit_scalings",
    "sampling_error_study",
    "write_calibration_outputs",
]

#: Cells enter the KL scaling fits only when ``n_samples`` is at least this
#: many times ``n_outcomes``.  The clamped KL of an empirical estimate obeys
#: the 1/N_s law only once every outcome is typically populated; a flat
#: Dirichlet reference has components as small as ~1/N_o**2, so well below
#: ~300 samples per outcome the clamp term dominates and the measured mean
#: bends away from the law.
KL_FIT_MIN_SAMPLES_PER_OUTCOME = 300

CALIBRATION_CSV_COLUMNS = (
    "n_outcomes",
    "n_samples",
    "trials",
    "mean_kl",
    "se_kl",
    "mean_euclid",
    "se_euclid",
    "mean_sq_euclid",
    "se_sq_euclid",
    "predicted_sq_euclid",
    "uniform_bound_sq",
)


@dataclass(frozen=True)
class CalibrationCell:
    """Summary statistics for one (outcome count, sample count) grid cell.

    All means and standard errors are over the cell's independent trials;
    ``reference_sum_sq`` is ``sum_i p_i**2`` of the cell's reference
    distribution, which fixes the exact expected squared Euclidean error.
    """

    n_outcomes: int
    n_samples: int
    trials: int
    mean_kl: float
    se_kl: float
    mean_euclid: float
    se_euclid: float
    mean_sq_euclid: float
    se_sq_euclid: float
    reference_sum_sq: float

    @property
    def predicted_sq_euclid(self) -> float:
        """Exact multinomial value of E||p_hat - p||^2 for this reference."""
        return (1.0 - self.reference_sum_sq) / self.n_samples

    @property
    def uniform_bound_sq(self) -> float:
        """Upper bound (1 - 1/N_o) / N_s on the expected squared error."""
        return (1.0 - 1.0 / self.n_outcomes) / self.n_samples


@dataclass(frozen=True)
class CalibrationReport:
    """Full grid of calibration cells plus the settings that produced it."""

    cells: tuple[CalibrationCell, ...]
    n_outcomes_grid: tuple[int, ...]
    n_samples_grid: tuple[int, ...]
    trials: int
    seed: int

    def cell(self, n_outcomes: int, n_samples: int) -> CalibrationCell:
        for c in self.cells:
            if c.n_outcomes == n_outcomes and c.n_samples == n_samples:
                return c
        raise KeyError(f"no cell for n_outcomes={n_outcomes}, n_samples={n_samples}")


@dataclass(frozen=True)
class CalibrationFits:
    """Fitted scaling exponents (log space) and prefactors (linear space).

    Exponents are means over the per-row (fixed outcome count) or
    per-column (fixed sample count) log-log regressions, with the standard
    error across rows/columns; the stderr is 0.0 when only a single row or
    column contributes.  Prefactor confidence intervals are 95% normal
    intervals from the residuals of the one-parameter least-squares fit.
    """

    euclid_exponent: float
    euclid_exponent_stderr: float
    kl_sample_exponent: float
    kl_sample_exponent_stderr: float
    kl_outcome_exponent: float
    kl_outcome_exponent_stderr: float
    c_euclid: float
    c_euclid_ci: tuple[float, float]
    c_kl: float
    c_kl_ci: tuple[float, float]
    kl_cells_used: int
    total_cells: int

    def to_dict(self) -> dict:
        return {
            "euclid_exponent": self.euclid_exponent,
            "euclid_exponent_stderr": self.euclid_exponent_stderr,
            "kl_sample_exponent": self.kl_sample_exponent,
            "kl_sample_exponent_stderr": self.kl_sample_exponent_stderr,
            "kl_outcome_exponent": self.kl_outcome_exponent,
            "kl_outcome_exponent_stderr": self.kl_outcome_exponent_stderr,
            "c_euclid": self.c_euclid,
            "c_euclid_ci": list(self.c_euclid_ci),
            "c_kl": self.c_kl,
            "c_kl_ci": list(self.c_kl_ci),
            "kl_cells_used": self.kl_cells_used,
            "total_cells": self.total_cells,
        }


def _as_int_grid(values, label: str) -> tuple[int, ...]:
    out = []
    for v in values:
        iv = int(v)
        if iv != v:
            raise ValueError(f"{label} entries must be integers, got {v!r}")
        out.append(iv)
    if not out:
        raise ValueError(f"{label} must not be empty")
    if len(set(out)) != len(out):
        raise ValueError(f"{label} entries must be distinct")
    return tuple(out)


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    return float(values.mean()), float(values.std(ddof=1) / np.sqrt(len(values)))


def sampling_error_study(n_outcomes, n_samples, trials: int = 200,
                         seed: int = 0) -> CalibrationReport:
    """Measure mean KL and Euclidean sampling error on a grid of cells.

    For each (N_o, N_s) pair one reference distribution is drawn from a
    flat Dirichlet (every point of the simplex equally likely), then
    ``trials`` empirical distributions are sampled as multinomial counts
    over N_s draws, and the mean and standard error of
    ``KL(reference || empirical)`` and of the Euclidean distance are
    recorded.  Each cell gets its own random stream derived from ``seed``
    and the cell's grid coordinates, so any subset of cells can be
    reproduced independently.
    """
    n_outcomes_grid = _as_int_grid(n_outcomes, "n_outcomes")
    n_samples_grid = _as_int_grid(n_samples, "n_samples")
    if any(n < 2 for n in n_outcomes_grid):
        raise ValueError("every outcome count must be at least 2")
    if any(n < 1 for n in n_samples_grid):
        raise ValueError("every sample count must be at least 1")
    if trials < 30:
        raise ValueError(f"trials must be at least 30, got {trials}")

    cells = []
    for i, n_o in enumerate(n_outcomes_grid):
        for j, n_s in enumerate(n_samples_grid):
            rng = np.random.default_rng(
                np.random.SeedSequence(seed, spawn_key=(i, j)))
            reference = rng.dirichlet(np.ones(n_o))
            counts = rng.multinomial(n_s, reference, size=trials)
            empirical = counts / n_s

            diff = empirical - reference
            sq = np.einsum("to,to->t", diff, diff)
            euclid = np.sqrt(sq)
            # Same convention as the scalar distance helpers: terms with
            # p_i == 0 contribute nothing, the estimate is clamped below.
            support = reference > 0
            ps = reference[support]
            qs = np.maximum(empirical[:, support], KL_CLAMP)
            kl = float(np.sum(ps * np.log(ps))) - np.log(qs) @ ps

            mean_kl, se_kl = _mean_se(kl)
            mean_euclid, se_euclid = _mean_se(euclid)
            mean_sq, se_sq = _mean_se(sq)
            cells.append(CalibrationCell(
                n_outcomes=n_o,
                n_samples=n_s,
                trials=trials,
                mean_kl=mean_kl,
                se_kl=se_kl,
                mean_euclid=mean_euclid,
                se_euclid=se_euclid,
                mean_sq_euclid=mean_sq,
                se_sq_euclid=se_sq,
                reference_sum_sq=float(np.sum(reference ** 2)),
            ))
    return CalibrationReport(
        cells=tuple(cells),
        n_outcomes_grid=n_outcomes_grid,
        n_samples_grid=n_samples_grid,
        trials=trials,
        seed=seed,
    )


def _check_not_degenerate(y: np.ndarray, what: str) -> None:
    if np.ptp(y) == 0.0:
        raise ValueError(f"degenerate calibration data: all {what} values equal")


def _loglog_slope(x: np.ndarray, y: np.ndarray, what: str) -> float:
    _check_not_degenerate(y, what)
    if np.any(y <= 0):
        raise ValueError(f"cannot fit a power law: non-positive {what} value")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def _slope_family(pairs: list[tuple[np.ndarray, np.ndarray]], what: str,
                  ) -> tuple[float, float]:
    """Mean and standard error of per-slice log-log slopes."""
    slopes = [_loglog_slope(x, y, what) for x, y in pairs]
    if len(slopes) == 1:
        return slopes[0], 0.0
    arr = np.asarray(slopes)
    return float(arr.mean()), float(arr.std(ddof=1) / np.sqrt(len(arr)))


def _prefactor(x: np.ndarray, y: np.ndarray, what: str,
               ) -> tuple[float, tuple[float, float]]:
    """One-parameter least squares of y = c*x with a 95% interval on c."""
    _check_not_degenerate(y, what)
    c = float(np.dot(x, y) / np.dot(x, x))
    if len(x) < 2:
        return c, (c, c)
    resid = y - c * x
    se = float(np.sqrt(np.dot(resid, resid) / (len(x) - 1) / np.dot(x, x)))
    return c, (c - 1.96 * se, c + 1.96 * se)


def _kl_eligible(cell: CalibrationCell) -> bool:
    return cell.n_samples >= KL_FIT_MIN_SAMPLES_PER_OUTCOME * cell.n_outcomes


def fit_scalings(report: CalibrationReport) -> CalibrationFits:
    """Fit the sampling-error scaling laws to a calibration report.

    Exponents come from log-log regressions: the Euclidean and KL
    sample-count exponents per fixed outcome count, and the KL outcome
    exponent per fixed sample count, averaged over slices.  Prefactors
    come from linear least squares against the model forms c_E/sqrt(N_s)
    and c_K*N_o/N_s.  Euclidean fits use every cell; KL fits use only
    well-sampled cells (see ``KL_FIT_MIN_SAMPLES_PER_OUTCOME``), since the
    clamped KL leaves the 1/N_s law when outcomes go unobserved.

    Raises ``ValueError`` if the report has fewer than 4 sample counts or
    fewer than 2 outcome counts, if any fitted data are all equal
    (degenerate), or if too few cells survive the KL well-sampling rule.
    """
    if len(report.n_samples_grid) < 4:
        raise ValueError("scaling fits need at least 4 sample counts")
    if len(report.n_outcomes_grid) < 2:
        raise ValueError("scaling fits need at least 2 outcome counts")

    cells = report.cells
    kl_cells = [c for c in cells if _kl_eligible(c)]

    # Per-row slices (fixed N_o, varying N_s).
    euclid_rows = []
    kl_rows = []
    for n_o in report.n_outcomes_grid:
        row = [c for c in cells if c.n_outcomes == n_o]
        euclid_rows.append((
            np.array([c.n_samples for c in row], dtype=float),
            np.array([c.mean_euclid for c in row]),
        ))
        kl_row = [c for c in row if _kl_eligible(c)]
        if len(kl_row) >= 2:
            kl_rows.append((
                np.array([c.n_samples for c in kl_row], dtype=float),
                np.array([c.mean_kl for c in kl_row]),
            ))

    # Per-column slices (fixed N_s, varying N_o) for the KL outcome law.
    kl_cols = []
    for n_s in report.n_samples_grid:
        col = [c for c in cells if c.n_samples == n_s and _kl_eligible(c)]
        if len(col) >= 2:
            kl_cols.append((
                np.array([c.n_outcomes for c in col], dtype=float),
                np.array([c.mean_kl for c in col]),
            ))

    if not kl_rows or not kl_cols:
        raise ValueError(
            "too few well-sampled cells for the KL scaling fits; the grid "
            f"needs cells with n_samples >= {KL_FIT_MIN_SAMPLES_PER_OUTCOME}"
            " * n_outcomes in at least two rows and columns")

    euclid_exp, euclid_se = _slope_family(euclid_rows, "mean_euclid")
    kl_s_exp, kl_s_se = _slope_family(kl_rows, "mean_kl")
    kl_o_exp, kl_o_se = _slope_family(kl_cols, "mean_kl")

    c_euclid, c_euclid_ci = _prefactor(
        np.array([1.0 / np.sqrt(c.n_samples) for c in cells]),
        np.array([c.mean_euclid for c in cells]),
        "mean_euclid")
    c_kl, c_kl_ci = _prefactor(
        np.array([c.n_outcomes / c.n_samples for c in kl_cells]),
        np.array([c.mean_kl for c in kl_cells]),
        "mean_kl")

    return CalibrationFits(
        euclid_exponent=euclid_exp,
        euclid_exponent_stderr=euclid_se,
        kl_sample_exponent=kl_s_exp,
        kl_sample_exponent_stderr=kl_s_se,
        kl_outcome_exponent=kl_o_exp,
        kl_outcome_exponent_stderr=kl_o_se,
        c_euclid=c_euclid,
        c_euclid_ci=c_euclid_ci,
        c_kl=c_kl,
        c_kl_ci=c_kl_ci,
        kl_cells_used=len(kl_cells),
        total_cells=len(cells),
    )


def calibration_csv(report: CalibrationReport, path) -> Path:
    """Write one CSV row per grid cell; returns the path written."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CALIBRATION_CSV_COLUMNS)
        for c in report.cells:
            writer.writerow([
                c.n_outcomes, c.n_samples, c.trials,
                repr(c.mean_kl), repr(c.se_kl),
                repr(c.mean_euclid), repr(c.se_euclid),
                repr(c.mean_sq_euclid), repr(c.se_sq_euclid),
                repr(c.predicted_sq_euclid), repr(c.uniform_bound_sq),
            ])
    return path


def write_calibration_outputs(name: str, report: CalibrationReport,
                              fits: CalibrationFits | None, out_dir,
                              settings: dict | None = None,
                              ) -> tuple[Path, Path]:
    """Write the per-cell CSV plus a JSON summary of the fitted constants.

    Files are named ``calibration_<name>_<timestamp>`` with a numeric
    suffix on collision; returns (csv_path, json_path).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = claim_pair(out_dir, f"calibration_{name}_{timestamp()}")
    calibration_csv(report, csv_path)
    payload = {
        "study": name,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "n_outcomes": list(report.n_outcomes_grid),
        "n_samples": list(report.n_samples_grid),
        "trials": report.trials,
        "seed": report.seed,
        "fits": fits.to_dict() if fits is not None else None,
        "settings": settings or {},
        "csv": csv_path.name,
    }
    with open(json_path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    return csv_path, json_path
