"""Boundary hitting times of the closed-loop flow, their gradients, growth laws.

For a state x the flow is integrated forward (outside the safe set) or
backward (inside) until h reaches zero, giving the signed hitting time T(x):
positive outside, negative inside, zero on the boundary. Differentiating the
identity h(flow(T(x), x)) = 0 yields the quotient formula

    grad T(x) = - Phi(T)^T grad h(x*) / (grad h(x*) . F(x*)),

with Phi the sensitivity matrix from the variational equation and x* the hit
point; a finite-difference fallback serves as an independent cross-check.
The growth probe measures how |grad T| and |T| scale as the start point
slides toward the origin along a ray.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import ode
from .model import VectorField

__all__ = [
    "HittingError",
    "TransversalityError",
    "UniquenessError",
    "HittingResult",
    "GrowthProbe",
    "hitting_time",
    "grad_hitting_time",
    "grad_T_fd",
    "growth_probe",
]


class HittingError(RuntimeError):
    pass


class TransversalityError(HittingError):
    """The flow crosses the boundary almost tangentially; the gradient quotient
    is not trustworthy there."""


class UniquenessError(HittingError):
    """h changed sign more than once along the integrated path, contradicting
    the single-crossing structure a robustly invariant boundary guarantees."""


@dataclass
class HittingResult:
    x: np.ndarray
    T: float
    x_hit: Optional[np.ndarray]
    grad_T: Optional[np.ndarray]
    denom: float  # grad h(x_hit) . F(x_hit), positive for transversal crossings
    status: str  # ok | no_crossing | origin_too_close | integration_failed
    jacobian_mode: str = ""
    note: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass
class GrowthProbe:
    direction: np.ndarray
    radii: np.ndarray
    grad_norms: np.ndarray
    slope: float  # log |grad T| against log r
    T_values: np.ndarray
    T_slope: float  # |T| against log(1/r)


def _boundary_tol(h_val: float, grad_h_val: np.ndarray, x: np.ndarray) -> float:
    # spurious micro-integrations for states numerically on the boundary are
    # worse than snapping them to T = 0
    return 1e-9 * (1.0 + float(np.linalg.norm(grad_h_val)) * float(np.linalg.norm(x)))


def _check_single_crossing(
    traj: ode.Trajectory, h_fn, h0: float, noise_floor: float, samples_per_seg: int = 4
):
    """The path up to the event must not change sign before its final time.

    Samples inside the truncated event segment close to the crossing are
    legitimately near zero, so only its first half is scanned; elsewhere a
    sign flip exceeding the integrator noise floor is a hard error.
    """
    n_seg = len(traj.qs)
    if n_seg == 0:
        return
    h0_sign = math.copysign(1.0, h0)
    for k in range(n_seg):
        t0, t1 = traj.ts[k], traj.ts[k + 1]
        last = k == n_seg - 1
        for j in range(samples_per_seg):
            frac = (j + 0.5) / samples_per_seg
            if last and frac > 0.5:
                break
            t = t0 + frac * (t1 - t0)
            hv = h_fn(traj.interpolate(t))
            if hv * h0_sign < 0.0 and abs(hv) > noise_floor:
                raise UniquenessError(
                    f"h changed sign at interior time {t!r} before the detected "
                    "crossing; the boundary is crossed more than once"
                )


def hitting_time(
    field: VectorField,
    h: Callable[[np.ndarray], float],
    x,
    *,
    grad_h: Callable[[np.ndarray], np.ndarray],
    t_max: float = 50.0,
    r_min: float = 1e-6,
    rtol: float = ode.DEFAULT_RTOL,
    atol: float = ode.DEFAULT_ATOL,
    event_tol: float = ode.DEFAULT_EVENT_TOL,
    check_uniqueness: bool = True,
) -> HittingResult:
    """Signed time at which the flow through x meets {h = 0}.

    h(x) < 0 integrates forward, h(x) > 0 backward, and |h(x)| below the
    boundary snap tolerance returns T = 0 with x itself as the hit point.
    |T| is capped at t_max (status "no_crossing" beyond), and points inside
    the r_min ball are refused ("origin_too_close") because backward hitting
    times blow up logarithmically there.
    """
    x = np.asarray(x, dtype=float)
    if float(np.linalg.norm(x)) < r_min:
        return HittingResult(x, math.nan, None, None, math.nan, "origin_too_close",
                             field.jacobian_mode)
    try:
        hx = float(h(x))
        gh = grad_h(x)
    except Exception as exc:  # noqa: BLE001 - expression domain failures
        return HittingResult(x, math.nan, None, None, math.nan, "integration_failed",
                             field.jacobian_mode, note=str(exc))
    tol0 = _boundary_tol(hx, gh, x)
    if abs(hx) <= tol0:
        denom = float(gh @ field.fn(x))
        return HittingResult(x, 0.0, x.copy(), None, denom, "ok", field.jacobian_mode)

    direction = "forward" if hx < 0.0 else "backward"
    res = ode.detect_event(
        field.fn, x, lambda z: float(h(z)), t_max, direction=direction,
        rtol=rtol, atol=atol, event_tol=event_tol, catch_field_errors=True,
    )
    if res.trajectory.status == "step_failure":
        return HittingResult(x, math.nan, None, None, math.nan, "integration_failed",
                             field.jacobian_mode, note=str(res.trajectory.failure))
    if not res.found:
        return HittingResult(x, math.nan, None, None, math.nan, "no_crossing",
                             field.jacobian_mode)
    if check_uniqueness:
        floor = max(1e-10, 50.0 * (atol + rtol * (1.0 + abs(hx))))
        _check_single_crossing(res.trajectory, lambda z: float(h(z)), hx, floor)
    x_hit = res.x
    denom = float(grad_h(x_hit) @ field.fn(x_hit))
    if denom <= 0.0:
        return HittingResult(x, float(res.t), x_hit, None, denom, "integration_failed",
                             field.jacobian_mode, note="tangential or wrong-way crossing")
    return HittingResult(x, float(res.t), x_hit, None, denom, "ok", field.jacobian_mode)


def grad_hitting_time(
    field: VectorField,
    h: Callable[[np.ndarray], float],
    x,
    *,
    grad_h: Callable[[np.ndarray], np.ndarray],
    result: Optional[HittingResult] = None,
    t_max: float = 50.0,
    r_min: float = 1e-6,
    rtol: float = ode.DEFAULT_RTOL,
    atol: float = ode.DEFAULT_ATOL,
    event_tol: float = ode.DEFAULT_EVENT_TOL,
    transversality_rtol: float = 1e-8,
) -> np.ndarray:
    """Gradient of the hitting time via the variational quotient formula.

    Integrates the sensitivity matrix over [0, T(x)] (in the sign of T),
    evaluates grad h and the field at the hit point, and divides. A crossing
    with |grad h . F| below transversality_rtol * |grad h| |F| is rejected as
    tangential, since the quotient is meaningless there.
    """
    x = np.asarray(x, dtype=float)
    if result is None:
        result = hitting_time(
            field, h, x, grad_h=grad_h, t_max=t_max, r_min=r_min,
            rtol=rtol, atol=atol, event_tol=event_tol,
        )
    if not result.ok:
        raise HittingError(f"hitting time unavailable at {x.tolist()}: {result.status}")
    gh = grad_h(result.x_hit)
    F_hit = field.fn(result.x_hit)
    denom = float(gh @ F_hit)
    floor = transversality_rtol * float(np.linalg.norm(gh)) * float(np.linalg.norm(F_hit))
    if denom < floor:
        raise TransversalityError(
            f"near-tangential crossing at {result.x_hit.tolist()}: "
            f"grad h . F = {denom!r} below {floor!r}"
        )
    if result.T == 0.0:
        grad_T = -gh / denom
    else:
        var = ode.integrate_variational(
            field.fn, field.jac, x, (0.0, result.T), rtol=rtol, atol=atol,
        )
        if var.status not in ("completed", "event_hit"):
            raise HittingError(f"variational integration failed: {var.status}")
        grad_T = -(var.phi_end.T @ gh) / denom
    result.grad_T = grad_T
    return grad_T


def grad_T_fd(
    field: VectorField,
    h: Callable[[np.ndarray], float],
    x,
    *,
    grad_h: Callable[[np.ndarray], np.ndarray],
    step: Optional[float] = None,
    t_max: float = 50.0,
    r_min: float = 1e-6,
    rtol: float = ode.DEFAULT_RTOL,
    atol: float = ode.DEFAULT_ATOL,
) -> np.ndarray:
    """Central-difference gradient of T, the independent cross-check for the
    quotient formula. Any stencil failure is an error."""
    x = np.asarray(x, dtype=float)
    if step is None:
        step = 1e-5 * max(1.0, float(np.linalg.norm(x)))
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = step
        vals = []
        for sgn in (+1.0, -1.0):
            res = hitting_time(
                field, h, x + sgn * e, grad_h=grad_h, t_max=t_max, r_min=r_min,
                rtol=rtol, atol=atol,
            )
            if not res.ok:
                raise HittingError(
                    f"finite-difference stencil failed at {(x + sgn * e).tolist()}: "
                    f"{res.status}"
                )
            vals.append(res.T)
        out[i] = (vals[0] - vals[1]) / (2.0 * step)
    return out


def growth_probe(
    field: VectorField,
    h: Callable[[np.ndarray], float],
    direction,
    r_start: float,
    k_max: int,
    *,
    grad_h: Callable[[np.ndarray], np.ndarray],
    t_max: float = 300.0,
    r_min: float = 1e-9,
    rtol: float = ode.DEFAULT_RTOL,
    atol: float = ode.DEFAULT_ATOL,
) -> GrowthProbe:
    """|grad T| and |T| along direction * r_start * 2^-k, with log-log slopes.

    The slope of log |grad T| against log r measures the gradient blow-up
    exponent toward the origin ((-1) for exponentially stable linearisations);
    the slope of |T| against log(1/r) measures the logarithmic growth constant
    of the backward hitting time.
    """
    d = np.asarray(direction, dtype=float)
    d = d / float(np.linalg.norm(d))
    radii = r_start * 2.0 ** (-np.arange(k_max + 1, dtype=float))
    if radii[-1] < r_min:
        raise HittingError("probe radii fall below r_min; reduce k_max")
    grad_norms = []
    T_values = []
    for r in radii:
        xr = r * d
        res = hitting_time(field, h, xr, grad_h=grad_h, t_max=t_max, r_min=r_min,
                           rtol=rtol, atol=atol)
        if not res.ok:
            raise HittingError(f"hitting failed at radius {r!r}: {res.status}")
        g = grad_hitting_time(field, h, xr, grad_h=grad_h, result=res,
                              t_max=t_max, r_min=r_min, rtol=rtol, atol=atol)
        grad_norms.append(float(np.linalg.norm(g)))
        T_values.append(res.T)
    grad_norms = np.array(grad_norms)
    T_values = np.array(T_values)
    if not np.all(np.isfinite(grad_norms)) or np.any(grad_norms <= 0.0):
        raise HittingError("gradient norms must be finite and positive for the fit")
    slope = float(np.polyfit(np.log(radii), np.log(grad_norms), 1)[0])
    T_slope = float(np.polyfit(np.log(1.0 / radii), np.abs(T_values), 1)[0])
    return GrowthProbe(d, radii, grad_norms, slope, T_values, T_slope)


def growth_probe_csv(path, probe: GrowthProbe):
    """Growth-probe export with columns radius,grad_norm,T."""
    with open(path, "w") as fh:
        fh.write("radius,grad_norm,T\n")
        for r, g, t in zip(probe.radii, probe.grad_norms, probe.T_values):
            fh.write(f"{float(r)!r},{float(g)!r},{float(t)!r}\n")


def hitting_batch_csv(path, results: Sequence[HittingResult], state_names: Sequence[str]):
    """Batch export: x..., T, x_hit..., grad_T..., status."""
    n = len(state_names)
    cols = (
        list(state_names)
        + ["T"]
        + [f"xhit{i+1}" for i in range(n)]
        + [f"gradT{i+1}" for i in range(n)]
        + ["status"]
    )
    def fmt(v):
        return repr(float(v))
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for r in results:
            xh = r.x_hit if r.x_hit is not None else [math.nan] * n
            gt = r.grad_T if r.grad_T is not None else [math.nan] * n
            row = [fmt(v) for v in r.x] + [fmt(r.T)] + [fmt(v) for v in xh] \
                + [fmt(v) for v in gt] + [r.status]
            fh.write(",".join(row) + "\n")
