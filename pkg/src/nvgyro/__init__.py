"""Digital twin of a diamond 14N nuclear-spin gyroscope.

Spin-1 double-quantum 4-Ramsey simulation end to end (spin dynamics,
optical readout with photon shot noise, rotation estimation) plus the
analysis toolchain: fringe fitting, calibration, Allan deviation,
sensitivity and dynamic-range budgets, and a rate-table simulator.
"""

__version__ = "0.1.0"

from .analysis import (
    AllanSeries,
    Calibration,
    DynamicRange,
    FringeFit,
    WorkingPoint,
    allan_deviation,
    calibration_from_fringes,
    calibration_from_slope,
    dynamic_range,
    fit_decaying_sine,
    linearity,
    one_rad_rotation_rate,
    power_spectrum,
    rotation_from_signal,
    select_working_point,
    snap_to_cos_null,
)
from .config import (
    ExperimentConfig,
    FringeScanConfig,
    build_config,
    default_config,
    load_config,
    load_constants,
)
from .detector import (
    DetectorConfig,
    NoiseHooks,
    RotationSensitivity,
    normalize_contrast,
    photoelectron_count,
    psn_fractional_uncertainty,
    psn_rotation_sensitivity,
    readout_voltage,
)
from .errors import (
    ConfigError,
    FitConvergenceError,
    GyroSimError,
    InsufficientSpanError,
    NonUniformGridError,
    SingularSplittingError,
)
from .ratetable import (
    Instruction,
    RateTrajectory,
    RotationProfile,
    ServoLag,
    TableState,
    TableTelemetry,
    jog,
    run_profile,
    step,
    triangle_profile,
)
from .sequence import (
    DEFAULT_PHASE_TABLE,
    FringeSeries,
    GyroTimeSeries,
    SequenceConfig,
    bright_projection,
    pump_state,
    rotating_environment,
    run_4ramsey_point,
    run_dq_ramsey,
    run_gyro_stream,
    sweep_fringes,
    sweep_single_ramsey,
)
from .spin import (
    ABSOLUTE_FRAME,
    LITERATURE_CONSTANTS,
    FieldEnvironment,
    PhysicalConstants,
    PulseKind,
    PulseSpec,
    RotatingFrame,
    SpinState,
    apply_pulse,
    dq_splitting,
    evolve_free,
    populations,
    pulse_unitary,
    transition_frequencies,
)
