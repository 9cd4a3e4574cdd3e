"""Delay-optimal transmission scheduling for an energy-harvesting link backed
by a rate-limited reliable energy source."""

from .analysis import (
    BoundSystem,
    PowerCoefficients,
    SteadyState,
    average_delay,
    average_power,
    balance_submatrix,
    bound_vectors,
    power_coefficients,
)
from .linalg import SingularMatrixError, solve_dense_linear
from .model import (
    CaseKind,
    DerivedConstants,
    PolicyParams,
    SystemParams,
    UnsupportedCaseError,
    build_transition_matrix,
    check_stability,
    derive_constants,
    state_index,
    state_of,
)
from .policy import DegeneratePolicyError, extract_policy, strict_threshold_policy
from .simulator import SimConfig, SimResult, run, step
from .solver import (
    CapacityWarning,
    InfeasibleError,
    OptimalSolution,
    find_optimal,
    power_threshold,
    power_thresholds,
    solve,
    solve_case1,
    steady_state,
)

__version__ = "0.1.0"

__all__ = [
    "average_delay",
    "average_power",
    "balance_submatrix",
    "bound_vectors",
    "BoundSystem",
    "build_transition_matrix",
    "CapacityWarning",
    "CaseKind",
    "check_stability",
    "DegeneratePolicyError",
    "derive_constants",
    "DerivedConstants",
    "extract_policy",
    "find_optimal",
    "InfeasibleError",
    "OptimalSolution",
    "PolicyParams",
    "power_coefficients",
    "power_threshold",
    "power_thresholds",
    "PowerCoefficients",
    "run",
    "SimConfig",
    "SimResult",
    "SingularMatrixError",
    "solve",
    "solve_case1",
    "solve_dense_linear",
    "state_index",
    "state_of",
    "steady_state",
    "SteadyState",
    "step",
    "strict_threshold_policy",
    "SystemParams",
    "UnsupportedCaseError",
]

