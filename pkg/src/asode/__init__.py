"""Additive third-order integrator for split stiff systems ``y' = phi(y) + g(y)``.

The explicit part ``phi`` is advanced with explicit stages, the stiff part
``g`` through linear solves with ``I - a*h*B`` where ``B`` approximates the
Jacobian of ``g``. The method is L-stable in its implicit part and keeps
third order for any ``B`` when the problem is written as ``(f - By) + By``.
"""

from .bench import TestProblem, make_problem, reference_solution, run_benchmark
from .coeffs import (
    EMBEDDED_COEFFICIENTS,
    METHOD_COEFFICIENTS,
    EmbeddedCoefficients,
    MethodCoefficients,
    derive_coefficients,
    embedded_residuals,
    order3_residuals,
    real_cubic_roots,
)
from .controller import ControllerConfig, IntegrationReport, integrate, integrate_fixed, select_stepsize
from .exceptions import (
    AsodeError,
    MaxStepsExceeded,
    NonFiniteState,
    OracleDisagreement,
    RootSelectionError,
    SingularD,
    StepSizeUnderflow,
    UnknownProblem,
)
from .linalg import JacobianApprox, factorize_D, finite_difference_jacobian, solve_D
from .problem import JacobianStrategy, SplitOdeProblem, ToleranceSpec, autonomize, split_by_matrix
from .rk_explicit import FEHLBERG45, MERSON4, erk_integrate, erk_solve, erk_step
from .stepper import StabilityProbeCoefficients, additive_step, error_norm, stability_estimate, stability_function

__version__ = "0.1.0"
