"""Distributional three-point boundary value problems driven by a regulated integrator.

    -D^2 x = f(t, x) + g(t, x) Du,   x(0) = beta Dx(0),   Dx(1) + Dx(eta) = 0.
"""

from .integrate import (
    IntegralResult,
    Integrand,
    IntegrationError,
    NonConvergenceError,
    PreconditionError,
    TaggedPartition,
    hk_integrate,
    hks_integrate,
    iterated_integrate,
)
from .operator import (
    BoundData,
    CouplingTerm,
    ProblemSpec,
    SolutionProfile,
    SourceTerm,
    apply_T,
    make_grid,
    reconstruct_Dx,
)
from .regulated import (
    BVData,
    Breakpoint,
    ClosedForm,
    DomainError,
    RegulatedFn,
    SampledFn,
    StepFn,
    Weierstrass,
    constant,
    gstar,
    heaviside,
    norm_bounds,
    sup_norm,
    total_variation,
    weierstrass,
)
from .solver import (
    HypothesisError,
    HypothesisReport,
    SolveOptions,
    SolveResult,
    VerificationReport,
    check_hypotheses,
    solve,
    verify,
)

__all__ = [name for name in dir() if not name.startswith("_")]
