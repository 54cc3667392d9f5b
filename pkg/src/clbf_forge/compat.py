"""Pointwise strict CLF/CBF compatibility: feasibility, margins, boundary scan.

At a state x the control enters only through the Lie-derivative rows

    a0 = grad V . f,   a = grad V . g,   b0 = grad h . f,   b = grad h . g,

and strict compatibility asks for a control u with a0 + a.u < 0 everywhere
away from the origin, plus b0 + b.u > 0 on the boundary of the safe set.
Both the exact open-system feasibility verdict and a quantitative margin
(best simultaneous slack under a control-norm budget) are computed here,
along with the ray-based boundary sampler and the aggregate report.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import expr
from .model import ConfigError, SystemSpec
from .sampling import box_samples, golden_angles, sphere_directions

__all__ = [
    "CompatError",
    "PointFeasibility",
    "CompatReport",
    "lie_rows",
    "strict_feasible",
    "margin",
    "sample_boundary",
    "compat_report",
]

_PARALLEL_TOL = 1e-12


class CompatError(RuntimeError):
    pass


@dataclass
class PointFeasibility:
    """Lie-derivative rows at one state plus the strictness verdict there.

    margin is non-negative and zero whenever the point is not certified
    feasible; raw_margin keeps the unclamped best slack under |u|_2 <= U,
    whose negative values measure infeasibility depth. This distinguishes
    analytic infeasibility (raw_margin <= 0) from a mere failure to clear the
    strictness threshold (0 < raw_margin < eps_strict).
    """

    x: np.ndarray
    a0: float
    a: np.ndarray
    b0: Optional[float]
    b: Optional[np.ndarray]
    mode: str  # "interior" | "boundary"
    feasible: bool
    witness: Optional[np.ndarray]
    margin: float
    raw_margin: float = 0.0

    def as_dict(self) -> dict:
        return {
            "x": [float(v) for v in self.x],
            "mode": self.mode,
            "feasible": bool(self.feasible),
            "margin": float(self.margin),
            "raw_margin": float(self.raw_margin),
            "witness": None if self.witness is None else [float(v) for v in self.witness],
        }


@dataclass
class CompatReport:
    interior: list
    boundary: list
    overall: bool
    worst_boundary_margin: float
    counterexamples: list = field(default_factory=list)
    eps_strict: float = 1e-8
    bound_U: float = 1.0
    seed: int = 0

    def to_json(self) -> str:
        doc = {
            "overall": bool(self.overall),
            "worst_boundary_margin": float(self.worst_boundary_margin),
            "eps_strict": self.eps_strict,
            "bound_U": self.bound_U,
            "seed": self.seed,
            "n_interior": len(self.interior),
            "n_boundary": len(self.boundary),
            "counterexamples": [[float(v) for v in x] for x in self.counterexamples],
            "interior": [p.as_dict() for p in self.interior],
            "boundary": [p.as_dict() for p in self.boundary],
        }
        return json.dumps(doc, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# Lie-derivative rows


def lie_rows(spec: SystemSpec, x) -> tuple[float, np.ndarray, float, np.ndarray]:
    """(a0, a, b0, b) at x. Only defined when f and g are supplied."""
    if spec.external_mode:
        raise CompatError("Lie-derivative rows need f,g mode; this system is closed-loop only")
    x = np.asarray(x, dtype=float)
    gV = spec.grad_V(x)
    gh = spec.grad_h(x)
    f = spec.f(x)
    g = spec.g(x)
    return float(gV @ f), gV @ g, float(gh @ f), gh @ g


# ---------------------------------------------------------------------------
# Exact feasibility of the open constraint system


def strict_feasible(
    a0: float,
    a: Optional[Sequence[float]],
    b0: Optional[float] = None,
    b: Optional[Sequence[float]] = None,
    mode: str = "interior",
) -> tuple[bool, Optional[np.ndarray]]:
    """Exact verdict for {a.u < -a0} (interior) or {a.u < -a0, b.u > -b0}.

    The rules are closed-form: with a = 0 the first constraint degenerates to
    a0 < 0; with both rows nonzero the system is infeasible only when b is a
    positive multiple of a, say b = lam*a, and b0 <= lam*a0. A witness control
    is returned whenever the verdict is feasible.
    """
    a = np.zeros(0) if a is None else np.asarray(a, dtype=float)
    m = a.shape[0]
    na = float(np.linalg.norm(a))

    if mode == "interior":
        if na == 0.0:
            return (a0 < 0.0), (np.zeros(m) if a0 < 0.0 else None)
        t = (max(a0, 0.0) + 1.0) / na**2
        return True, -t * a

    if mode != "boundary":
        raise ValueError(f"unknown mode {mode!r}")
    if b0 is None or b is None:
        raise ValueError("boundary mode needs b0 and b")
    b = np.asarray(b, dtype=float)
    nb = float(np.linalg.norm(b))

    if na == 0.0 and nb == 0.0:
        ok = a0 < 0.0 and b0 > 0.0
        return ok, (np.zeros(m) if ok else None)
    if na == 0.0:
        if not (a0 < 0.0):
            return False, None
        t = (max(-b0, 0.0) + 1.0) / nb**2
        return True, t * b
    if nb == 0.0:
        if not (b0 > 0.0):
            return False, None
        t = (max(a0, 0.0) + 1.0) / na**2
        return True, -t * a

    cosang = float(a @ b) / (na * nb)
    if cosang >= 1.0 - _PARALLEL_TOL:
        lam = nb / na
        if not (b0 > lam * a0):
            return False, None
        # slide along a: need -b0/lam < a.u < -a0
        s = 0.5 * (-b0 / lam - a0)
        return True, (s / na**2) * a
    if cosang <= -1.0 + _PARALLEL_TOL:
        lam = nb / na
        s = min(-a0, b0 / lam) - 1.0
        return True, (s / na**2) * a
    # linearly independent rows: (a.u, b.u) covers the plane
    G = np.array([[a @ a, a @ b], [a @ b, b @ b]])
    rhs = np.array([-a0 - 1.0, -b0 + 1.0])
    lam_vec = np.linalg.solve(G, rhs)
    return True, lam_vec[0] * a + lam_vec[1] * b


# ---------------------------------------------------------------------------
# Quantitative margin under a control budget


def _golden_max(fn, lo: float, hi: float, tol: float = 1e-13) -> tuple[float, float]:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    fc, fd = fn(c), fn(d)
    while hi - lo > tol:
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = fn(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = fn(d)
    x = 0.5 * (lo + hi)
    return x, fn(x)


def margin(
    a0: float,
    a: Optional[Sequence[float]],
    b0: Optional[float],
    b: Optional[Sequence[float]],
    U: float,
    mode: str = "boundary",
) -> tuple[float, np.ndarray]:
    """Best simultaneous slack under |u|_2 <= U.

    Maximises eps subject to a0 + a.u <= -eps (and, in boundary mode,
    b0 + b.u >= eps). The objective depends on u only through a.u and b.u, so
    the search lives in span{a, b}: the candidates are the equalising point of
    the two slacks (minimum-norm solution of one linear equation, clipped to
    the ball) and the ball-boundary optimum located by a coarse angular scan
    refined with golden-section search. Negative values report infeasibility
    depth rather than being clamped.
    """
    if U <= 0:
        raise ValueError("control bound U must be positive")
    a = np.zeros(0) if a is None else np.asarray(a, dtype=float)
    m = a.shape[0]
    if mode == "interior":
        na = float(np.linalg.norm(a))
        if na == 0.0:
            return -a0, np.zeros(m)
        u = -(U / na) * a
        return -a0 + U * na, u
    if mode != "boundary":
        raise ValueError(f"unknown mode {mode!r}")
    b = np.zeros(m) if b is None else np.asarray(b, dtype=float)
    if b.shape[0] != m:
        raise ValueError("a and b must have equal length")

    def slack(u: np.ndarray) -> float:
        return min(-a0 - float(a @ u), float(b0) + float(b @ u))

    # orthonormal basis of span{a, b}
    basis = []
    for v in (a, b):
        w = v.astype(float).copy()
        for e in basis:
            w -= (w @ e) * e
        nw = float(np.linalg.norm(w))
        if nw > 1e-14 * max(1.0, float(np.linalg.norm(v))):
            basis.append(w / nw)

    candidates = [np.zeros(m)]
    c = a + b
    nc = float(np.linalg.norm(c))
    if nc > 0.0:
        u_eq = (-(a0 + float(b0)) / nc**2) * c
        nu = float(np.linalg.norm(u_eq))
        if nu > U:
            u_eq = (U / nu) * u_eq
        candidates.append(u_eq)

    if len(basis) == 1:
        e1 = basis[0]
        candidates.extend([U * e1, -U * e1])
    elif len(basis) == 2:
        e1, e2 = basis

        def on_circle(phi: float) -> np.ndarray:
            return U * (math.cos(phi) * e1 + math.sin(phi) * e2)

        angles = np.linspace(0.0, 2.0 * math.pi, 257)[:-1]
        vals = [slack(on_circle(p)) for p in angles]
        k = int(np.argmax(vals))
        step = angles[1] - angles[0]
        phi_star, _ = _golden_max(lambda p: slack(on_circle(p)),
                                  angles[k] - step, angles[k] + step)
        candidates.append(on_circle(phi_star))

    best_u = max(candidates, key=slack)
    return slack(best_u), best_u


# ---------------------------------------------------------------------------
# Boundary sampling by rays from the origin


def sample_boundary(
    spec: SystemSpec,
    n: int,
    seed: int = 0,
    mode: Optional[str] = None,
    n_march: int = 256,
    max_tries_factor: int = 50,
) -> np.ndarray:
    """n points on the zero set of h, found along rays from the origin.

    Assumes the safe region is star-shaped about the origin inside the box:
    along each ray, h starts positive, crosses zero once, and stays negative
    (checked empirically; a recrossing raises). With mode="error" (default) a
    ray that leaves the box while h is still positive is an error, since it
    means the safe set is not contained in the analysis box. mode="skip"
    instead draws extra directions until n crossings are found, which is the
    right behaviour for safe sets that genuinely extend beyond any box (for
    instance slab-shaped sets in angle-like coordinates).
    """
    mode = mode or spec.boundary_mode
    if mode not in ("error", "skip"):
        raise ValueError("mode must be 'error' or 'skip'")
    box = spec.domain_box
    h_fn = spec._h_fn
    h0 = h_fn(np.zeros(spec.n))
    if h0 <= 0:
        raise CompatError("origin is outside the safe set; cannot cast rays")

    def crossing_along(d: np.ndarray) -> Optional[np.ndarray]:
        # distance at which the ray exits the box
        t_exit = math.inf
        for i in range(spec.n):
            if d[i] > 1e-15:
                t_exit = min(t_exit, box[i, 1] / d[i])
            elif d[i] < -1e-15:
                t_exit = min(t_exit, box[i, 0] / d[i])
        if not math.isfinite(t_exit) or t_exit <= 0:
            if mode == "skip":
                return None
            raise CompatError(
                f"ray {d.tolist()} never leaves the origin inside the box"
            )
        ts = np.linspace(0.0, t_exit, n_march + 1)[1:]
        prev_t, prev_h = 0.0, h0
        cross_t = None
        for t in ts:
            try:
                hv = h_fn(t * d)
            except expr.DOMAIN_EXCEPTIONS as exc:
                raise CompatError(f"h failed along ray {d.tolist()}: {exc}") from exc
            if cross_t is None:
                if hv <= 0.0:
                    lo, hi = prev_t, t
                    for _ in range(200):
                        mid = 0.5 * (lo + hi)
                        hm = h_fn(mid * d)
                        if abs(hm) <= 1e-10:
                            lo = hi = mid
                            break
                        if hm > 0.0:
                            lo = mid
                        else:
                            hi = mid
                    cross_t = 0.5 * (lo + hi)
                prev_t, prev_h = t, hv
            else:
                # past the first zero h must keep decreasing through negative
                # values; a return to positive breaks star-shapedness
                if hv > 1e-12:
                    raise CompatError(
                        f"h recrosses zero along ray {d.tolist()}: the safe set "
                        "is not star-shaped about the origin in this box"
                    )
        if cross_t is None:
            if mode == "skip":
                return None
            raise CompatError(
                f"h has no zero along ray {d.tolist()} inside the box; the safe "
                "set is not contained in the analysis box"
            )
        return cross_t * d

    points = []
    if mode == "error":
        dirs = sphere_directions(spec.n, n, seed=seed, lattice=True)
        for d in dirs:
            points.append(crossing_along(d))
    else:
        max_tries = max_tries_factor * n
        if spec.n == 2:
            angles = golden_angles(max_tries, offset=0.12345 + seed)
            dirs = np.column_stack([np.cos(angles), np.sin(angles)])
        else:
            dirs = sphere_directions(spec.n, max_tries, seed=seed, lattice=False)
        for d in dirs:
            p = crossing_along(d)
            if p is not None:
                points.append(p)
                if len(points) == n:
                    break
        if len(points) < n:
            raise CompatError(
                f"found only {len(points)} of {n} boundary crossings after "
                f"{max_tries} rays; h may have no zero inside the box"
            )
    return np.array(points)


# ---------------------------------------------------------------------------
# Aggregate report


def compat_report(
    spec: SystemSpec,
    n_interior: int = 200,
    n_boundary: int = 64,
    U: float = 1.0,
    seed: int = 0,
    eps_strict: float = 1e-8,
) -> CompatReport:
    """Check strict compatibility on sampled interior and boundary states.

    The interior clause is tested at quasi-random box points outside the
    r_min ball; the boundary clause at ray-sampled points of {h = 0}. A point
    counts as feasible when its margin under |u|_2 <= U clears eps_strict
    (floating-point strictness), so analytic infeasibility (margin <= 0) and
    a too-thin margin are both reported as failures, distinguishable by the
    recorded margin value.
    """
    if spec.external_mode:
        raise CompatError("compatibility checks need f,g mode")
    interior_pts = []
    raw = box_samples(spec.domain_box, 8 * n_interior, seed=seed + 11)
    for p in raw:
        if float(np.linalg.norm(p)) >= spec.tol.r_min:
            interior_pts.append(p)
            if len(interior_pts) == n_interior:
                break
    boundary_pts = sample_boundary(spec, n_boundary, seed=seed)

    def record(x, mode) -> PointFeasibility:
        a0, a, b0, b = lie_rows(spec, x)
        if mode == "interior":
            eps_val, u_star = margin(a0, a, None, None, U=U, mode="interior")
            b0, b = None, None
        else:
            eps_val, u_star = margin(a0, a, b0, b, U=U, mode="boundary")
        ok = bool(eps_val >= eps_strict)
        return PointFeasibility(
            x=x, a0=a0, a=a, b0=b0, b=b, mode=mode,
            feasible=ok,
            witness=u_star if ok else None,
            margin=float(eps_val) if ok else 0.0,
            raw_margin=float(eps_val),
        )

    interior = [record(x, "interior") for x in interior_pts]
    boundary = [record(x, "boundary") for x in boundary_pts]
    counterexamples = [p.x for p in interior + boundary if not p.feasible]
    overall = not counterexamples
    worst = min((p.raw_margin for p in boundary), default=math.inf)
    return CompatReport(
        interior=interior, boundary=boundary, overall=overall,
        worst_boundary_margin=float(worst), counterexamples=counterexamples,
        eps_strict=eps_strict, bound_U=U, seed=seed,
    )
