"""Adaptive Runge-Kutta integration with dense output, events and sensitivities.

The integrator is the Dormand-Prince embedded 5(4) pair with the standard
4th-order dense-output interpolant, run in either time direction. On top of it
sit scalar event detection (first sign change, refined on the dense output)
and joint integration of the variational matrix equation, which yields the
sensitivity of the flow map to its initial condition.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .expr import EvalDomainError

__all__ = [
    "FieldEvalError",
    "OdeError",
    "Trajectory",
    "EventResult",
    "VariationalResult",
    "integrate",
    "detect_event",
    "integrate_variational",
    "DEFAULT_RTOL",
    "DEFAULT_ATOL",
    "DEFAULT_EVENT_TOL",
]

DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-12
DEFAULT_EVENT_TOL = 1e-12

# Errors raised by user-supplied right-hand sides that integrate() may be
# asked to swallow (trajectory truncated with status "step_failure").
FIELD_ERRORS = (EvalDomainError, ValueError, ZeroDivisionError, OverflowError, FloatingPointError)


class OdeError(RuntimeError):
    pass


class FieldEvalError(OdeError):
    """A right-hand side refused to evaluate (domain error, infeasible control)."""


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# difference between the 5th and 4th order weights
_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)
# 4th-order dense-output interpolant (7 stages x theta^1..theta^4)
_P = np.array(
    [
        [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)


@dataclass
class Trajectory:
    """Dense-output solution over contiguous accepted steps.

    ``ts`` holds the N+1 segment boundaries (monotone in the integration
    direction), ``ys`` the states there, and ``qs[k]`` the n-by-4 interpolation
    matrix of segment k, so that for t = ts[k] + theta*(ts[k+1]-ts[k]),

        y(t) = ys[k] + h_k * qs[k] @ [theta, theta^2, theta^3, theta^4].

    Immutable after construction; interpolation is read-only and thread-safe.
    """

    ts: np.ndarray
    ys: np.ndarray
    qs: list
    direction: int  # +1 forward, -1 backward
    status: str  # completed | event_hit | max_time | step_failure
    n_rhs_evals: int = 0
    failure: Optional[Exception] = None

    @property
    def t0(self) -> float:
        return float(self.ts[0])

    @property
    def t_end(self) -> float:
        return float(self.ts[-1])

    @property
    def y_end(self) -> np.ndarray:
        return self.ys[-1]

    def _segment_index(self, t: float) -> int:
        ts = self.ts
        lo, hi = (ts[0], ts[-1]) if self.direction > 0 else (ts[-1], ts[0])
        if not (lo <= t <= hi):
            raise OdeError(f"time {t!r} outside covered span [{lo!r}, {hi!r}]")
        if self.direction > 0:
            k = bisect_right(ts, t) - 1
        else:
            # ts is decreasing; search the reversed (ascending) view
            k = len(ts) - 1 - bisect_left(ts[::-1], t)
        return min(max(k, 0), len(ts) - 2)

    def interpolate(self, t: float) -> np.ndarray:
        """Dense-output state at time t (must lie within the covered span)."""
        # exact boundaries return stored states bit-for-bit
        if t == self.ts[0]:
            return self.ys[0].copy()
        if t == self.ts[-1]:
            return self.ys[-1].copy()
        k = self._segment_index(t)
        h = self.ts[k + 1] - self.ts[k]
        if t == self.ts[k]:
            return self.ys[k].copy()
        if t == self.ts[k + 1]:
            return self.ys[k + 1].copy()
        theta = (t - self.ts[k]) / h
        tv = np.array([theta, theta * theta, theta**3, theta**4])
        return self.ys[k] + h * (self.qs[k] @ tv)

    def sample(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """n+1 equispaced (t, y) samples across the covered span."""
        ts = np.linspace(self.ts[0], self.ts[-1], n + 1)
        return ts, np.array([self.interpolate(t) for t in ts])

    def to_csv(self, path, n_samples: int = 200, names: Sequence[str] = ()):
        """Dump t,x1,...,xn rows at the requested sample density."""
        ts, ys = self.sample(n_samples)
        cols = list(names) if names else [f"x{i+1}" for i in range(ys.shape[1])]
        with open(path, "w") as fh:
            fh.write("t," + ",".join(cols) + "\n")
            for t, y in zip(ts, ys):
                fh.write(",".join(repr(float(v)) for v in (t, *y)) + "\n")


@dataclass
class EventResult:
    found: bool
    t: Optional[float]
    x: Optional[np.ndarray]
    trajectory: Trajectory


def _initial_step(fn, t0, y0, f0, direction, rtol, atol, span):
    scale = atol + rtol * float(np.max(np.abs(y0), initial=0.0))
    d0 = float(np.max(np.abs(y0), initial=0.0)) / scale
    d1 = float(np.max(np.abs(f0), initial=0.0)) / scale
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, span)
    y1 = y0 + h0 * direction * f0
    f1 = fn(y1)
    d2 = float(np.max(np.abs(f1 - f0), initial=0.0)) / scale / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, span)


def integrate(
    fn: Callable[[np.ndarray], np.ndarray],
    x0: Sequence[float],
    t_span: tuple[float, float],
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    max_steps: int = 500_000,
    catch_field_errors: bool = False,
) -> Trajectory:
    """Integrate dx/dt = fn(x) over t_span with adaptive 5(4) stepping.

    t_span may run backward (t1 < t0). Each accepted step keeps its dense
    interpolant. Step-size underflow reports status "step_failure" with the
    last reachable state, which is how finite-time blowup and hard stiffness
    surface. With catch_field_errors=True an exception from fn truncates the
    trajectory (stored in .failure) instead of propagating.
    """
    traj, _ = _integrate_core(
        fn, x0, t_span, rtol, atol, None, DEFAULT_EVENT_TOL, max_steps, catch_field_errors
    )
    return traj


def detect_event(
    fn: Callable[[np.ndarray], np.ndarray],
    x0: Sequence[float],
    event: Callable[[np.ndarray], float],
    t_max: float,
    direction: str = "forward",
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    event_tol: float = DEFAULT_EVENT_TOL,
    max_steps: int = 500_000,
    catch_field_errors: bool = False,
) -> EventResult:
    """First time t* (in the integration direction) with event(x(t*)) == 0.

    Crossings are bracketed by sign changes across accepted steps, then the
    bracket is refined on the dense output with a safeguarded secant/bisection
    loop until it is narrower than event_tol and |event(x*)| <= 1e-10 * scale,
    where scale = 1 + |event(x0)|. Returns found=False when the sign never
    changes before t_max (trajectory status "max_time").
    """
    if t_max <= 0:
        raise OdeError("t_max must be positive")
    sign = 1.0 if direction == "forward" else -1.0
    traj, hit = _integrate_core(
        fn, x0, (0.0, sign * t_max), rtol, atol, (event, event_tol), event_tol,
        max_steps, catch_field_errors,
    )
    if hit is None:
        return EventResult(False, None, None, traj)
    return EventResult(True, hit[0], hit[1], traj)


def _refine_event(g, ta, ga, tb, gb, event_tol):
    """Safeguarded secant/bisection on a bracketing interval of the dense output.

    Every other iteration bisects, so the bracket is guaranteed to halve at
    least once per two iterations regardless of secant behaviour.
    """
    t_lo, t_hi = (ta, tb) if ta < tb else (tb, ta)
    for i in range(160):
        if abs(tb - ta) <= event_tol:
            break
        denom = gb - ga
        tc = tb - gb * (tb - ta) / denom if denom != 0.0 else 0.5 * (ta + tb)
        lo, hi = (ta, tb) if ta < tb else (tb, ta)
        margin = 0.05 * (hi - lo)
        if i % 2 == 1 or not (lo + margin < tc < hi - margin):
            tc = 0.5 * (ta + tb)
        gc = g(tc)
        if gc == 0.0:
            return tc, gc
        if (ga < 0) != (gc < 0):
            tb, gb = tc, gc
        else:
            ta, ga = tc, gc
    # polish with clamped secant steps, keeping the best |g| seen
    best_t, best_g = (ta, ga) if abs(ga) <= abs(gb) else (tb, gb)
    pa, ga_, pb, gb_ = ta, ga, tb, gb
    for _ in range(4):
        denom = gb_ - ga_
        if denom == 0.0:
            break
        tc = min(max(pb - gb_ * (pb - pa) / denom, t_lo), t_hi)
        gc = g(tc)
        if abs(gc) < abs(best_g):
            best_t, best_g = tc, gc
        pa, ga_, pb, gb_ = pb, gb_, tc, gc
    return best_t, best_g


def _integrate_core(fn, x0, t_span, rtol, atol, event_spec, event_tol, max_steps,
                    catch_field_errors):
    t0, t1 = float(t_span[0]), float(t_span[1])
    if t0 == t1:
        raise OdeError("empty integration span")
    direction = 1 if t1 > t0 else -1
    y = np.asarray(x0, dtype=float).copy()
    n = y.shape[0]

    event_fn = None
    if event_spec is not None:
        event_fn, event_tol = event_spec

    ts = [t0]
    ys = [y.copy()]
    qs: list = []
    n_evals = 0
    failure = None
    status = "completed"
    hit = None

    def call(z):
        nonlocal n_evals
        n_evals += 1
        return np.asarray(fn(z), dtype=float)

    try:
        f0 = call(y)
        g_prev = None
        if event_fn is not None:
            g_prev = float(event_fn(y))
            if g_prev == 0.0:
                traj = Trajectory(np.array(ts), np.array(ys), qs, direction, "event_hit", n_evals)
                return traj, (t0, y.copy())

        span = abs(t1 - t0)
        h = _initial_step(call, t0, y, f0, direction, rtol, atol, span)
        t = t0
        K = np.empty((7, n))
        K[0] = f0

        steps = 0
        while (t1 - t) * direction > 0:
            if steps >= max_steps:
                status = "step_failure"
                failure = OdeError(f"step limit {max_steps} exceeded")
                break
            steps += 1
            h = min(h, abs(t1 - t))
            if h < 1e-14 * max(1.0, abs(t)):
                status = "step_failure"
                failure = OdeError(f"step size underflow at t={t!r}")
                break
            hs = h * direction
            for s in range(1, 7):
                ystage = y + hs * (_A[s] @ K[:s])
                K[s] = call(ystage)
            y_new = y + hs * (_B @ K)
            # K[6] is f(y_new) by construction of the final tableau row
            err_vec = hs * (_E @ K)
            scale = atol + rtol * max(
                float(np.max(np.abs(y), initial=0.0)),
                float(np.max(np.abs(y_new), initial=0.0)),
            )
            err = float(np.max(np.abs(err_vec), initial=0.0)) / scale
            if err > 1.0:
                h *= max(0.2, 0.9 * err ** -0.2)
                continue

            t_new = t + hs
            ts.append(t_new)
            ys.append(y_new.copy())
            qs.append(K.T @ _P)

            if event_fn is not None:
                g_new = float(event_fn(y_new))
                if g_new == 0.0 or (g_prev < 0) != (g_new < 0):
                    seg_t0, seg_y0, seg_h, qseg = ts[-2], ys[-2], hs, qs[-1]

                    def interp_local(tt):
                        th = (tt - seg_t0) / seg_h
                        tv = np.array([th, th * th, th**3, th**4])
                        return seg_y0 + seg_h * (qseg @ tv)

                    if g_new == 0.0:
                        t_star, x_star = t_new, y_new.copy()
                    else:
                        g_of_t = lambda tt: float(event_fn(interp_local(tt)))
                        t_star, _ = _refine_event(
                            g_of_t, seg_t0, g_prev, t_new, g_new, event_tol
                        )
                        x_star = interp_local(t_star)
                    # truncate the final segment at the event time
                    ts[-1] = t_star
                    ys[-1] = x_star.copy()
                    status = "event_hit"
                    hit = (t_star, x_star)
                    break
                g_prev = g_new

            K[0] = K[6]
            y = y_new
            t = t_new
            factor = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            h *= factor
        else:
            status = "completed"
        if status == "completed" and event_fn is not None:
            status = "max_time"
    except FIELD_ERRORS as exc:
        if not catch_field_errors:
            raise
        status = "step_failure"
        failure = exc
    except FieldEvalError as exc:
        if not catch_field_errors:
            raise
        status = "step_failure"
        failure = exc

    traj = Trajectory(np.array(ts), np.array(ys), qs, direction, status, n_evals, failure)
    return traj, hit


# ---------------------------------------------------------------------------
# Variational (sensitivity) integration


class VariationalResult:
    """Joint solution of the flow and its state-transition matrix.

    The n + n^2 augmented system integrates dx/dt = F(x) together with
    dPhi/dt = J(x(t)) Phi, Phi(0) = I, so phi(t) is the derivative of the flow
    map with respect to the initial condition. For smooth fields det(phi) stays
    positive along the whole path (flows preserve orientation).
    """

    def __init__(self, augmented: Trajectory, n: int):
        self._aug = augmented
        self.n = n
        self.status = augmented.status
        base_ys = augmented.ys[:, :n]
        base_qs = [q[:n] for q in augmented.qs]
        self.base = Trajectory(
            augmented.ts, base_ys, base_qs, augmented.direction, augmented.status,
            augmented.n_rhs_evals, augmented.failure,
        )

    @property
    def t_end(self) -> float:
        return self._aug.t_end

    def state(self, t: float) -> np.ndarray:
        return self._aug.interpolate(t)[: self.n]

    def phi(self, t: float) -> np.ndarray:
        return self._aug.interpolate(t)[self.n :].reshape(self.n, self.n)

    @property
    def phi_end(self) -> np.ndarray:
        return self._aug.ys[-1][self.n :].reshape(self.n, self.n)


def integrate_variational(
    fn: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    x0: Sequence[float],
    t_span: tuple[float, float],
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    max_steps: int = 500_000,
    catch_field_errors: bool = False,
) -> VariationalResult:
    """Integrate the flow together with its sensitivity matrix over t_span."""
    x0 = np.asarray(x0, dtype=float)
    n = x0.shape[0]

    def augmented(z):
        x = z[:n]
        phi = z[n:].reshape(n, n)
        dx = np.asarray(fn(x), dtype=float)
        dphi = np.asarray(jacobian(x), dtype=float) @ phi
        return np.concatenate([dx, dphi.reshape(-1)])

    z0 = np.concatenate([x0, np.eye(n).reshape(-1)])
    traj = integrate(
        augmented, z0, t_span, rtol=rtol, atol=atol, max_steps=max_steps,
        catch_field_errors=catch_field_errors,
    )
    return VariationalResult(traj, n)
