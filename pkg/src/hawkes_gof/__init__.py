"""Bootstrap goodness-of-fit testing for Poisson and Hawkes point processes."""
from .exceptions import (
    BootstrapDegenerateError,
    DataError,
    DomainError,
    HawkesGofError,
    InsufficientEventsError,
    InvariantViolation,
    NumericalError,
    ValidationError,
)
from .kernels import BACKEND
from .models import (
    EventSequence,
    ModelKind,
    ModelSpec,
    ObservationWindow,
    ThetaDomain,
    compensator,
    compensator_increments,
    intensity_at,
    inverse_compensator,
    validate,
)
from .simulate import RngStream, sample, sample_hawkes, sample_inhomogeneous_poisson, sample_standard_poisson
from .estimate import FitResult, fit_mle, log_likelihood, score
from .gof import (
    GofTestResult,
    QuadratureRule,
    WeightFunction,
    bootstrap_test,
    empirical_laplace,
    gof_statistic,
    ks_exponential_test,
    reference_laplace,
    rescale,
)

__version__ = "0.1.0"
