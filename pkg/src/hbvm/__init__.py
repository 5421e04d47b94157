"""HBVM(k, r) Runge-Kutta methods from a truncated local Legendre expansion.

The stage kernel runs compiled when the Cython extension is built and falls
back to numpy otherwise; see :mod:`hbvm.kernels`.
"""

from .basis import (
    OrthonormalBasis,
    QuadratureRule,
    custom_rule,
    gauss_rule,
    legendre_antiderivative,
    legendre_eval,
    lobatto_rule,
)
from .errors import (
    CollisionError,
    DomainError,
    HBVMError,
    StageConvergenceError,
    StageDivergenceError,
    StepsizeUnderflowError,
    ValidationError,
)
from .integrator import (
    AdaptiveConfig,
    Trajectory,
    estimate_local_error,
    integrate_adaptive,
    integrate_fixed,
    propose_stepsize,
)
from .kernels import HAVE_COMPILED
from .problems import (
    HamiltonianSystem,
    LinearTestProblem,
    OdeSystem,
    PolynomialHamiltonian,
    kepler,
    kepler_energy,
    kepler_exact,
    kepler_initial,
    linear_test,
    problem_from_spec,
    quartic_oscillator,
)
from .stepper import StepResult, solve_stages, step
from .tableau import (
    ButcherTableau,
    StabilityFunction,
    build_hbvm,
    stability_value,
    verify_factorization,
)

__version__ = "0.1.0"
