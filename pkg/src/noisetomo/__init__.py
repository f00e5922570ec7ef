"""Photon-number distributions from on/off detection with thermal probe light."""
from .calibration import ClickRecord, DriftSeries, drift_series, efficiency_from_reference, probe_mean_from_blocked
from .errors import (
    CalibrationError,
    CalibrationWarning,
    ConfigError,
    ConsistencyError,
    DataError,
    DomainError,
    NoiseTomoError,
    SolverError,
    TruncationWarning,
    UnderdeterminedWarning,
)
from .fock import PhotonDistribution, SchemeParams, bs_unitary, thermal_diagonal
from .nnls import nnls_solve
from .povm import (
    PovmMatrix,
    PovmModel,
    ProbeSetting,
    conditioning_report,
    design_matrix,
    povm_bs_overlap,
    povm_bs_perfect,
    povm_simple,
)
from .reconstruction import ReconstructionOptions, bootstrap, reconstruct
from .simulator import ExperimentPlan, inject_drift, probe_schedule, simulate_clicks, simulate_thermal_intensities

__version__ = "0.1.0"
