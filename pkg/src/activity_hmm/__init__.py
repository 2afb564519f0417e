"""Hidden Markov models with activity-modulated transitions and emissions."""

from .em import FitConfig, FitResult, fit, initialize_from_emissions, interpolate_states, uniform_feasible
from .exceptions import (
    ActivityHMMError,
    ConstraintViolation,
    DimensionError,
    ImpossibleObservation,
    InconsistentStatistics,
    InitializationError,
)
from .inference import PosteriorStats, forward_backward, log_likelihood
from .metrics import (
    averaged_relative_entropy,
    baseline_epsilon,
    baseline_tau,
    error_epsilon,
    error_tau,
    relative_entropy,
)
from .model import (
    ActivityProfile,
    ModelParams,
    ModelSpec,
    SupportMask,
    emission_distribution,
    transition_matrix,
    validate,
)
from .mstep import expected_log_likelihood, mstep, solve_inner
from .simulate import simulate

__version__ = "0.1.0"
