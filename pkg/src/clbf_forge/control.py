"""Pointwise safe-stabilising feedback laws and closed-loop simulation.

Three controllers share the Lie-derivative rows of the compatibility layer:

* sontag         -- the universal damping formula driven by V alone;
* min_norm_qp    -- least-norm control meeting a rate-form decrease constraint
                    and, inside a band around the boundary, a strict inward
                    push on h (tiny closed-form quadratic program);
* blended        -- a smooth bump-function blend of a local linear gain with
                    the min-norm law away from the origin.

simulate_closed_loop integrates dx/dt = f + g u(x) and tracks the safety,
decrease and convergence monitors along the path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import ode
from .compat import PointFeasibility, lie_rows, margin, strict_feasible
from .model import ConfigError, SystemSpec, VectorField, check_linearization, fd_jacobian
from .sampling import sphere_directions

__all__ = [
    "ControllerInfeasibleError",
    "ControlParams",
    "resolve_params",
    "sontag",
    "min_norm_qp",
    "blended",
    "bump_weight",
    "controller_fn",
    "closed_loop_field",
    "simulate_closed_loop",
    "SimulationResult",
]


class ControllerInfeasibleError(ode.FieldEvalError):
    """The pointwise program has no solution at x; carries the evidence."""

    def __init__(self, x, record: PointFeasibility):
        super().__init__(f"controller infeasible at x={np.asarray(x).tolist()}")
        self.x = np.asarray(x, dtype=float)
        self.record = record


@dataclass
class ControlParams:
    """Tuning shared by the pointwise laws.

    c_v scales the required decrease rate (a0 + a.u <= -c_v V); kappa is the
    strict inward push demanded on the boundary band; band is the h-threshold
    activating the barrier constraint (default a tenth of the largest h over
    the box); r0 < r1 are the blend radii, with the r1-ball required to sit
    inside the safe set.
    """

    c_v: float = 0.1
    kappa: float = 1e-3
    band: Optional[float] = None
    r0: float = 0.25
    r1: float = 0.5
    K: Optional[np.ndarray] = None
    _blend_validated: bool = False

    def require_band(self) -> float:
        if self.band is None:
            raise ConfigError("band not resolved; use resolve_params(spec)")
        return self.band


def resolve_params(spec: SystemSpec, **overrides) -> ControlParams:
    """Build ControlParams from a spec's config section plus overrides."""
    raw = dict(spec.controller_params)
    raw.update({k: v for k, v in overrides.items() if v is not None})
    p = ControlParams(
        c_v=float(raw.get("c_v", 0.1)),
        kappa=float(raw.get("kappa", 1e-3)),
        band=(None if raw.get("band") is None else float(raw["band"])),
        r0=float(raw.get("r0", 0.25)),
        r1=float(raw.get("r1", 0.5)),
        K=spec.gain_K,
    )
    if p.c_v < 0 or p.kappa < 0:
        raise ConfigError("c_v and kappa must be non-negative")
    if not (0.0 < p.r0 < p.r1):
        raise ConfigError("blend radii must satisfy 0 < r0 < r1")
    if p.band is None:
        p.band = 0.1 * spec.max_h_in_box()
    return p


# ---------------------------------------------------------------------------
# Sontag's damping formula


def sontag(spec: SystemSpec, x) -> np.ndarray:
    """u = -((a0 + sqrt(a0^2 + |a|^4)) / |a|^2) a with a0 = L_f V, a = L_g V.

    Returns zero when a vanishes (equilibrium, or drift already decreasing).
    Whenever (a0, a) != 0 the closed-loop derivative of V equals
    -sqrt(a0^2 + |a|^4) < 0 exactly.
    """
    x = np.asarray(x, dtype=float)
    a0, a, _, _ = lie_rows(spec, x)
    na2 = float(a @ a)
    if na2 == 0.0:
        return np.zeros(spec.m)
    coeff = (a0 + math.sqrt(a0 * a0 + na2 * na2)) / na2
    return -coeff * a


# ---------------------------------------------------------------------------
# Minimum-norm program (closed-form active-set enumeration)


def _min_norm_two_halfspaces(
    a: np.ndarray, alpha: float, b: Optional[np.ndarray], beta: Optional[float],
    tol: float = 1e-12,
) -> Optional[np.ndarray]:
    """argmin |u|^2 subject to a.u <= alpha and (optionally) b.u >= beta.

    Candidates: the origin, each single-constraint projection, and the
    two-constraint equality point via the 2x2 Gram system. Among feasible
    candidates of equal norm (within tol) the one with fewer active
    constraints wins, making the output deterministic. Returns None when the
    constraint set is empty.
    """
    m = a.shape[0]
    na2 = float(a @ a)
    scale = 1.0 + abs(alpha) + (abs(beta) if beta is not None else 0.0)

    def ok(u: np.ndarray) -> bool:
        if float(a @ u) > alpha + tol * scale:
            return False
        if b is not None and float(b @ u) < beta - tol * scale:
            return False
        return True

    # degenerate rows first: a zero row is a constant constraint
    if na2 == 0.0 and alpha < 0.0:
        return None
    nb2 = 0.0 if b is None else float(b @ b)
    if b is not None and nb2 == 0.0 and beta > 0.0:
        return None

    candidates: list[np.ndarray] = [np.zeros(m)]
    if na2 > 0.0:
        candidates.append((alpha / na2) * a)
    if b is not None and nb2 > 0.0:
        candidates.append((beta / nb2) * b)
        if na2 > 0.0:
            G = np.array([[na2, float(a @ b)], [float(a @ b), nb2]])
            det = G[0, 0] * G[1, 1] - G[0, 1] * G[1, 0]
            if det > 1e-14 * na2 * nb2:
                lam = np.linalg.solve(G, np.array([alpha, beta]))
                candidates.append(lam[0] * a + lam[1] * b)

    feasible = [u for u in candidates if ok(u)]
    if not feasible:
        return None
    norms = [float(u @ u) for u in feasible]
    best = min(norms)
    # candidate list is ordered by active-set size, so first-within-tol wins
    for u, nrm in zip(feasible, norms):
        if nrm <= best + tol:
            return u
    return feasible[int(np.argmin(norms))]


def min_norm_qp(spec: SystemSpec, x, params: ControlParams) -> np.ndarray:
    """Least-norm control enforcing decrease, plus inward push near the boundary.

    Constraints: a0 + a.u <= -c_v V(x) always, and b0 + b.u >= kappa whenever
    h(x) <= band. Raises ControllerInfeasibleError (with the point's
    feasibility record) when the program is empty, which signals a strict
    compatibility failure at x.
    """
    x = np.asarray(x, dtype=float)
    a0, a, b0, b = lie_rows(spec, x)
    alpha = -a0 - params.c_v * spec.V(x)
    band_active = spec.h(x) <= params.require_band()
    beta = (params.kappa - b0) if band_active else None
    u = _min_norm_two_halfspaces(a, alpha, b if band_active else None, beta)
    if u is None:
        mode = "boundary" if band_active else "interior"
        U_probe = max(1.0, 10.0 * float(np.linalg.norm(x)))
        if band_active:
            feas, witness = strict_feasible(a0, a, b0, b, mode="boundary")
            eps_val, _ = margin(a0, a, b0, b, U=U_probe, mode="boundary")
        else:
            feas, witness = strict_feasible(a0, a, mode="interior")
            eps_val, _ = margin(a0, a, None, None, U=U_probe, mode="interior")
        record = PointFeasibility(
            x=x, a0=a0, a=a, b0=b0 if band_active else None,
            b=b if band_active else None, mode=mode,
            feasible=feas, witness=witness,
            margin=max(float(eps_val), 0.0) if feas else 0.0,
            raw_margin=float(eps_val),
        )
        raise ControllerInfeasibleError(x, record)
    return u


# ---------------------------------------------------------------------------
# Smooth two-region blend


def _smooth_step_piece(tau: float) -> float:
    return math.exp(-1.0 / tau) if tau > 0.0 else 0.0


def bump_weight(s: float, r0: float, r1: float) -> float:
    """Smooth monotone weight: 1 for s <= r0, 0 for s >= r1.

    w(s) = q((r1 - s)/(r1 - r0)) with q(t) = e(t)/(e(t) + e(1-t)) and
    e(t) = exp(-1/t) for t > 0 (else 0); q is the standard smooth partition
    step, equal to 1/2 at the midpoint by symmetry.
    """
    tau = (r1 - s) / (r1 - r0)
    if tau >= 1.0:
        return 1.0
    if tau <= 0.0:
        return 0.0
    e1 = _smooth_step_piece(tau)
    e2 = _smooth_step_piece(1.0 - tau)
    return e1 / (e1 + e2)


def _validate_blend(spec: SystemSpec, params: ControlParams):
    if params.K is None:
        raise ConfigError("blended controller needs gain_K in the config")
    report = check_linearization(spec, params.K)
    if not report.passed:
        raise ConfigError(
            "gain K fails the linearization check; blended controller refused "
            f"(min pivot {report.min_pivot!r})"
        )
    for d in sphere_directions(spec.n, 32, seed=5):
        if spec.h(params.r1 * d) <= 0.0:
            raise ConfigError(
                f"blend radius r1={params.r1} pokes outside the safe set at "
                f"direction {d.tolist()}"
            )
    params._blend_validated = True


def blended(spec: SystemSpec, x, params: ControlParams) -> np.ndarray:
    """w(|x|) K x + (1 - w(|x|)) min_norm_qp(x) with the smooth bump weight."""
    if not params._blend_validated:
        _validate_blend(spec, params)
    x = np.asarray(x, dtype=float)
    w = bump_weight(float(np.linalg.norm(x)), params.r0, params.r1)
    local = params.K @ x
    if w >= 1.0:
        return local
    outer = min_norm_qp(spec, x, params)
    if w <= 0.0:
        return outer
    return w * local + (1.0 - w) * outer


# ---------------------------------------------------------------------------
# Closed-loop assembly and simulation


def controller_fn(spec: SystemSpec, tag: Optional[str] = None,
                  params: Optional[ControlParams] = None) -> Callable[[np.ndarray], np.ndarray]:
    tag = tag or spec.controller
    if tag == "external-F":
        raise ConfigError("external-F systems have no separate controller")
    if params is None:
        params = resolve_params(spec)
    if tag == "sontag":
        return lambda x: sontag(spec, x)
    if tag == "min_norm_qp":
        return lambda x: min_norm_qp(spec, x, params)
    if tag == "blended":
        return lambda x: blended(spec, x, params)
    raise ConfigError(f"unknown controller tag {tag!r}")


def closed_loop_field(spec: SystemSpec, tag: Optional[str] = None,
                      params: Optional[ControlParams] = None) -> VectorField:
    """The autonomous field actually integrated downstream.

    external-F systems use their expressions (exact Jacobian); synthesized
    controllers yield a field differentiated by central finite differences,
    and the mode tag rides along for reproducibility.
    """
    tag = tag or spec.controller
    if spec.external_mode or tag == "external-F":
        return spec.external_field()
    u_fn = controller_fn(spec, tag, params)

    def fn(x):
        x = np.asarray(x, dtype=float)
        return spec.f(x) + spec.g(x) @ u_fn(x)

    return VectorField(fn, lambda x: fd_jacobian(fn, x), "finite_difference",
                       name=f"closed_loop[{tag}]")


@dataclass
class SimulationResult:
    trajectory: ode.Trajectory
    times: np.ndarray
    states: np.ndarray
    controls: Optional[np.ndarray]
    V_path: np.ndarray
    h_path: np.ndarray
    min_h: float
    max_V_increase: float
    final_norm: float
    decay_slope: Optional[float]
    infeasible: bool
    infeasible_record: Optional[PointFeasibility] = None

    @property
    def safe(self) -> bool:
        return self.min_h >= -1e-9


def simulate_closed_loop(
    spec: SystemSpec,
    controller: Optional[str],
    x0,
    t_end: float,
    params: Optional[ControlParams] = None,
    n_samples: int = 400,
) -> SimulationResult:
    """Integrate the closed loop and record safety/decrease/convergence monitors.

    min_h is the sampled minimum of h along the path (forward invariance wants
    it non-negative for safe starts), max_V_increase the largest V(x(t)) -
    V(x0) (decrease violations show up positive), and final_norm |x(t_end)|.
    A controller infeasibility mid-trajectory truncates the run and is
    reported rather than raised. decay_slope is a least-squares fit of
    log |x(t)| against t, a convergence-rate diagnostic only.
    """
    x0 = np.asarray(x0, dtype=float)
    if params is None and not spec.external_mode:
        params = resolve_params(spec)
    field = closed_loop_field(spec, controller, params)
    u_fn = None
    if not spec.external_mode:
        u_fn = controller_fn(spec, controller, params)

    traj = ode.integrate(
        field.fn, x0, (0.0, float(t_end)),
        rtol=spec.tol.rtol, atol=spec.tol.atol, catch_field_errors=True,
    )
    infeasible = isinstance(traj.failure, ControllerInfeasibleError)

    ts, xs = traj.sample(n_samples)
    V_path = np.array([spec.V(x) for x in xs])
    h_path = np.array([spec.h(x) for x in xs])
    us = None
    if u_fn is not None:
        rows = []
        for x in xs:
            try:
                rows.append(u_fn(x))
            except ControllerInfeasibleError:
                rows.append(np.full(spec.m, np.nan))
        us = np.array(rows)

    norms = np.linalg.norm(xs, axis=1)
    decay = None
    mask = norms > 0
    if mask.sum() >= 2 and ts[-1] > ts[0]:
        decay = float(np.polyfit(ts[mask], np.log(norms[mask]), 1)[0])

    return SimulationResult(
        trajectory=traj,
        times=ts,
        states=xs,
        controls=us,
        V_path=V_path,
        h_path=h_path,
        min_h=float(h_path.min()),
        max_V_increase=float((V_path - spec.V(x0)).max()),
        final_norm=float(np.linalg.norm(traj.y_end)),
        decay_slope=decay,
        infeasible=infeasible,
        infeasible_record=(traj.failure.record if infeasible else None),
    )
