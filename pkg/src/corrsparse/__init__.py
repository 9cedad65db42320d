"""Sparse scene recovery from cross-correlated passive array data.

The package simulates a passive linear array recording point sources on a
grid, reduces the correlations of the recording to a linear system on the
lifted diagonal, absorbs the discarded off-diagonal energy in a random
circulant dictionary, recovers the support with a saddle-point l1 solver,
and refits amplitudes and relative phases on the support by least squares.
"""

from .correlation import (
    CorrelationSystem,
    OffDiagonalResidual,
    ReducedOperator,
    build_reduced_system,
    cross_correlate,
    off_diagonal_residual,
    subsample_rows,
)
from .diagnostics import (
    CoherenceReport,
    SupportMetrics,
    TailCheckResult,
    coherence_report,
    hanson_wright_tail_check,
    support_metrics,
)
from .errors import (
    CalibrationError,
    ConfigError,
    DivergenceError,
    DomainError,
    InfeasibleSystemError,
)
from .gelma import (
    RecoveryReport,
    SolverConfig,
    calibrate_tau,
    estimate_step_sizes,
    gelma_solve,
    soft_threshold,
)
from .noise_collector import NoiseCollector, build_collector
from .phase_recovery import (
    AngleErrorStats,
    RestrictedLiftedSolution,
    angle_error,
    solve_restricted,
)
from .pipeline import (
    ExperimentConfig,
    SweepResult,
    TrialResult,
    config_from_ini,
    run_calibration,
    run_phase_diagram,
    run_recovery,
    simulate,
)
from .wave_model import (
    ArrayGeometry,
    FrequencyGrid,
    ImagingGrid,
    LinearData,
    MeasurementMatrix,
    SourceConfiguration,
    add_noise,
    build_measurement_matrix,
    green,
    synthesize_data,
)

__version__ = "0.1.0"

__all__ = [
    "ArrayGeometry",
    "AngleErrorStats",
    "CalibrationError",
    "CoherenceReport",
    "ConfigError",
    "CorrelationSystem",
    "DivergenceError",
    "DomainError",
    "ExperimentConfig",
    "FrequencyGrid",
    "ImagingGrid",
    "InfeasibleSystemError",
    "LinearData",
    "MeasurementMatrix",
    "NoiseCollector",
    "OffDiagonalResidual",
    "RecoveryReport",
    "ReducedOperator",
    "RestrictedLiftedSolution",
    "SolverConfig",
    "SourceConfiguration",
    "SupportMetrics",
    "SweepResult",
    "TailCheckResult",
    "TrialResult",
    "add_noise",
    "angle_error",
    "build_collector",
    "build_measurement_matrix",
    "build_reduced_system",
    "calibrate_tau",
    "coherence_report",
    "config_from_ini",
    "cross_correlate",
    "estimate_step_sizes",
    "gelma_solve",
    "green",
    "hanson_wright_tail_check",
    "off_diagonal_residual",
    "run_calibration",
    "run_phase_diagram",
    "run_recovery",
    "simulate",
    "soft_threshold",
    "solve_restricted",
    "subsample_rows",
    "support_metrics",
    "synthesize_data",
]
