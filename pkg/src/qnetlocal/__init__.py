"""Tools for testing quantum network distributions against local models.

The package covers three layers: describing a network's causal structure
and outcome distributions (:mod:`~qnetlocal.topology`), producing target
distributions from quantum states and joint measurements
(:mod:`~qnetlocal.quantum`), and fitting neural-network local models to
those targets (:mod:`~qnetlocal.localmodel`), plus parameter scans,
sampling-error calibration, and a command line interface on top.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .topology import (
    ConfigError,
    Distribution,
    NetworkConfig,
    OutcomeIndexer,
    PartySpec,
    euclidean_distance,
    kl_divergence,
    parse_config,
)
from .quantum import (
    DensityMatrix,
    HilbertWiring,
    Povm,
    StateVector,
    bell_state,
    born_distribution,
    coarse_grain,
    computational_povm,
    rgb4_povm,
    rotated_state,
    tetra_joint_measurement,
    werner,
)
from .calibrate import (
    CalibrationCell,
    CalibrationFits,
    CalibrationReport,
    fit_scalings,
    sampling_error_study,
    write_calibration_outputs,
)
from .scan import (
    ScanError,
    ScanPoint,
    ScanResult,
    ring_wiring,
    rgb4_point,
    ring_network,
    scan_grid_2d,
    scan_rgb4,
    scan_visibility,
    tetra_point,
    theta_mirror_gaps,
    write_scan_csv,
    write_scan_outputs,
)

__all__ = [
    "__version__",
    "ConfigError",
    "Distribution",
    "NetworkConfig",
    "OutcomeIndexer",
    "PartySpec",
    "euclidean_distance",
    "kl_divergence",
    "parse_config",
    "DensityMatrix",
    "HilbertWiring",
    "Povm",
    "StateVector",
    "bell_state",
    "born_distribution",
    "coarse_grain",
    "computational_povm",
    "rgb4_povm",
    "rotated_state",
    "tetra_joint_measurement",
    "werner",
    "CalibrationCell",
    "CalibrationFits",
    "CalibrationReport",
    "fit_scalings",
    "sampling_error_study",
    "write_calibration_outputs",
    "ScanError",
    "ScanPoint",
    "ScanResult",
    "ring_wiring",
    "rgb4_point",
    "ring_network",
    "scan_grid_2d",
    "scan_rgb4",
    "scan_visibility",
    "tetra_point",
    "theta_mirror_gaps",
    "write_scan_csv",
    "write_scan_outputs",
]
