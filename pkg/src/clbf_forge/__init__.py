"""clbf-forge: certificate toolkit for safe stabilization of control-affine systems.

Given a plant dx/dt = f(x) + g(x) u (or a closed-loop field directly), a
Lyapunov candidate V and a barrier candidate h, the toolkit checks strict
CLF/CBF compatibility pointwise, synthesizes safe-stabilizing feedback
(universal-formula, minimum-norm, and smoothly blended laws), computes the
boundary hitting time T(x) of the closed-loop flow with exact sensitivities,
and builds and verifies the unified certificate W(x) = V(x) / V at the hit
point, whose unit level set reproduces the safe-set boundary exactly.
"""

__version__ = "0.1.0"

from . import clbf, compat, control, expr, hitting, model, ode, sampling  # noqa: F401
from .clbf import ClbfEvaluator, smooth_compose
from .compat import compat_report, lie_rows, margin, sample_boundary, strict_feasible
from .control import (
    blended,
    bump_weight,
    closed_loop_field,
    min_norm_qp,
    simulate_closed_loop,
    sontag,
)
from .expr import DualValue, evaluate, grad, parse
from .hitting import grad_T_fd, grad_hitting_time, growth_probe, hitting_time
from .model import (
    SystemSpec,
    check_linearization,
    eval_dynamics,
    example_config,
    field_jacobian,
    load_system,
    small_control_probe,
)
from .ode import detect_event, integrate, integrate_variational

__all__ = [
    "__version__",
    "ClbfEvaluator",
    "smooth_compose",
    "compat_report",
    "lie_rows",
    "margin",
    "sample_boundary",
    "strict_feasible",
    "blended",
    "bump_weight",
    "closed_loop_field",
    "min_norm_qp",
    "simulate_closed_loop",
    "sontag",
    "DualValue",
    "evaluate",
    "grad",
    "parse",
    "grad_T_fd",
    "grad_hitting_time",
    "growth_probe",
    "hitting_time",
    "SystemSpec",
    "check_linearization",
    "eval_dynamics",
    "example_config",
    "field_jacobian",
    "load_system",
    "small_control_probe",
    "detect_event",
    "integrate",
    "integrate_variational",
]
