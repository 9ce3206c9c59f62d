"""Finite-blocklength throughput bounds for covert communication over AWGN channels."""
from importlib.metadata import PackageNotFoundError, version as _version

from .covert import CovertParams, PowerSolution, solve_power, truncation_mass
from .errors import (
    BudgetExhausted,
    CovertError,
    DomainError,
    InsufficientTailSamples,
    ParameterError,
    ScaleError,
    SolverError,
)
from .hypotest import InfoDensitySpec, SamplingConfig, beta_at_alpha, beta_exact_1d
from .bounds import (
    BoundPoint,
    achievability_mc,
    achievability_normal_approx,
    compute_point,
    converse_equal_power,
    converse_normal_approx,
    sweep,
)

try:
    __version__ = _version("covertfbl")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "0.0.0"

__all__ = [
    "CovertParams",
    "PowerSolution",
    "solve_power",
    "truncation_mass",
    "InfoDensitySpec",
    "SamplingConfig",
    "beta_at_alpha",
    "beta_exact_1d",
    "BoundPoint",
    "achievability_mc",
    "achievability_normal_approx",
    "compute_point",
    "converse_equal_power",
    "converse_normal_approx",
    "sweep",
    "CovertError",
    "DomainError",
    "ParameterError",
    "BudgetExhausted",
    "ScaleError",
    "SolverError",
    "InsufficientTailSamples",
    "__version__",
]
