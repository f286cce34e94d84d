"""Adaptive sample-count control driven by the current loss level.

The number of hidden-variable samples per iteration is chosen so the
sampling error stays a fixed factor below the loss being resolved: a
bias parameter B sets that factor, and rises by one unit whenever the
loss stagnates for a window of iterations, up to a hard maximum.  The
error scalings behind the formulas: Euclidean sampling error falls as
1/sqrt(N_s), KL sampling error as N_o/(2 N_s).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .net import LOSS_KINDS

__all__ = ["SamplingController", "next_sample_count", "bump_bias"]

BIAS_INIT = 4.0
BIAS_MIN = 2.0
BIAS_MAX = 10.0


@dataclass(frozen=True)
class SamplingController:
    """Immutable sample-count policy; bias bumps produce a new controller."""

    n_outcomes: int
    loss_kind: str = "kl"
    bias: float = BIAS_INIT
    bias_max: float = BIAS_MAX
    n_min: int = 1_000
    n_max: int = 20_000
    stagnation_window: int = 100

    def __post_init__(self) -> None:
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"loss kind must be one of {LOSS_KINDS}, got {self.loss_kind!r}")
        if self.n_outcomes < 2:
            raise ValueError(f"n_outcomes must be >= 2, got {self.n_outcomes}")
        if not BIAS_MIN <= self.bias <= self.bias_max:
            raise ValueError(
                f"bias must lie in [{BIAS_MIN}, {self.bias_max}], got {self.bias}"
            )
        if self.bias_max > BIAS_MAX:
            raise ValueError(f"bias_max cannot exceed {BIAS_MAX}, got {self.bias_max}")
        if not 0 < self.n_min <= self.n_max:
            raise ValueError(f"need 0 < n_min <= n_max, got {self.n_min}, {self.n_max}")
        if self.stagnation_window < 1:
            raise ValueError(f"stagnation_window must be >= 1, got {self.stagnation_window}")


def next_sample_count(ctrl: SamplingController, last_loss: float) -> int:
    """Samples for the next iteration given the current loss level.

    Euclidean: N_s = ceil((B/L)^2); KL: N_s = ceil(B*N_o/L); clamped to
    [n_min, n_max].  A loss at or below zero is beneath the resolution of
    any finite sample, so the maximum is returned.
    """
    if last_loss <= 0.0 or not math.isfinite(last_loss):
        return ctrl.n_max
    if ctrl.loss_kind == "euclid":
        raw = (ctrl.bias / last_loss) ** 2
    else:
        raw = ctrl.bias * ctrl.n_outcomes / last_loss
    return int(min(max(math.ceil(raw), ctrl.n_min), ctrl.n_max))


def bump_bias(ctrl: SamplingController, iterations_since_improvement: int) -> SamplingController:
    """One-unit bias increase once stagnation reaches the window, capped."""
    if iterations_since_improvement < ctrl.stagnation_window:
        return ctrl
    return replace(ctrl, bias=min(ctrl.bias + 1.0, ctrl.bias_max))
