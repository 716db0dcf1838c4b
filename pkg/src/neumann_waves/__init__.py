"""Finite-difference laboratory for damped and viscoelastic waves under Neumann boundary input."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    Grid1D,
    ProblemSpec,
    RelaxationKernel,
    SolutionField,
    SpaceFunction,
    TimeFunction,
    ValidationError,
    build_grid,
    grid_for_ratio,
)
from .damped import CFLViolationError, damped_solve  # noqa: E402
from .viscoelastic import SingularSystemError, thomas_solve, visco_solve  # noqa: E402
from .energy import EnergySeries, energy_damped, energy_modified, energy_rate_residual  # noqa: E402
from .inputs import check_A1, check_A2, check_damping, check_decay_hypothesis  # noqa: E402
from .bounds import (  # noqa: E402
    BoundCurve,
    DampedBoundParams,
    DecayFit,
    ViscoBoundParams,
    damped_bound_curve,
    data_norms,
    decay_fit,
    poincare_constant,
    visco_envelope,
)
from .oracle import mixed_eigenpairs, modal_classical_solution, modal_damped_solution  # noqa: E402

__all__ = [
    "Grid1D", "ProblemSpec", "RelaxationKernel", "SolutionField", "SpaceFunction", "TimeFunction",
    "ValidationError", "build_grid", "grid_for_ratio",
    "CFLViolationError", "damped_solve", "SingularSystemError", "thomas_solve", "visco_solve",
    "EnergySeries", "energy_damped", "energy_modified", "energy_rate_residual",
    "check_A1", "check_A2", "check_damping", "check_decay_hypothesis",
    "BoundCurve", "DampedBoundParams", "DecayFit", "ViscoBoundParams", "damped_bound_curve", "data_norms",
    "decay_fit", "poincare_constant", "visco_envelope",
    "mixed_eigenpairs", "modal_classical_solution", "modal_damped_solution",
]
