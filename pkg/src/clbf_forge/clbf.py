"""Unified Lyapunov-barrier certificate: W(x) = V(x) / V(hit point of x).

Dividing V by its value where the closed-loop trajectory through x meets the
safe-set boundary rescales every trajectory so that the boundary sits exactly
on the level W = 1: W < 1 strictly inside, W > 1 strictly outside, and W
inherits the decrease direction of V, solving grad W . F = -omega1 with
omega = -grad V . F and omega1 = omega / V(hit). This module evaluates W
pointwise and on grids, measures the decrease identity as a flow-difference
residual, applies the power-law smoothing composition, and verifies the three
defining conditions (decrease feasibility, sublevel-set identity, level-set
identity) by sampling.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Sequence

import numpy as np

from . import ode
from .compat import sample_boundary, strict_feasible
from .control import closed_loop_field
from .hitting import HittingResult, hitting_time
from .model import SystemSpec, VectorField
from .sampling import box_samples

__all__ = [
    "ClbfError",
    "ClbfEvaluation",
    "ClbfReport",
    "VerifyTolerances",
    "ClbfEvaluator",
    "smooth_compose",
    "grid_to_csv",
]


class ClbfError(RuntimeError):
    pass


@dataclass
class ClbfEvaluation:
    """One pointwise evaluation of the certificate and its ingredients.

    decrease_ok records whether omega = -grad V . F was positive here, i.e.
    whether V actually certifies decrease at this state; W keeps its defining
    value either way so that violations are visible rather than masked.
    """

    x: np.ndarray
    omega: float
    omega1: float
    W: float
    region: str  # inside | boundary | outside
    status: str
    T: float = math.nan
    x_hit: Optional[np.ndarray] = None
    V_hit: float = math.nan
    decrease_ok: bool = True
    pde_residual: Optional[float] = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass
class VerifyTolerances:
    boundary: float = 1e-7  # |W - 1| on the boundary
    separation: float = 1e-6  # required gap of W from 1 off the boundary
    h_margin: float = 1e-3  # shell around {h = 0} excluded from strict sides


@dataclass
class ClbfReport:
    boundary_max_dev: float
    interior_max_W: float
    exterior_min_W: float
    max_pde_residual: float
    decrease_failures: list
    condition_decrease: bool
    condition_sublevel: bool
    condition_level: bool
    passed: bool
    n_boundary: int = 0
    n_interior: int = 0
    n_exterior: int = 0
    n_failed_points: int = 0
    notes: list = dc_field(default_factory=list)

    def to_json(self) -> str:
        doc = {
            "passed": bool(self.passed),
            "condition_decrease": bool(self.condition_decrease),
            "condition_sublevel": bool(self.condition_sublevel),
            "condition_level": bool(self.condition_level),
            "boundary_max_dev": float(self.boundary_max_dev),
            "interior_max_W": float(self.interior_max_W),
            "exterior_min_W": float(self.exterior_min_W),
            "max_pde_residual": float(self.max_pde_residual),
            "decrease_failures": [[float(v) for v in x] for x in self.decrease_failures],
            "n_boundary": self.n_boundary,
            "n_interior": self.n_interior,
            "n_exterior": self.n_exterior,
            "n_failed_points": self.n_failed_points,
            "notes": list(self.notes),
        }
        return json.dumps(doc, indent=2, sort_keys=True)


class ClbfEvaluator:
    """Evaluates W = V(x)/V(hit(x)) for one system under one closed loop.

    The denominator guard d_min (default 1e-9 times the largest V seen on
    boundary samples) rejects certificate pairs whose V vanishes somewhere on
    the boundary, where the ratio would be meaningless.
    """

    def __init__(
        self,
        spec: SystemSpec,
        field: Optional[VectorField] = None,
        *,
        rtol: Optional[float] = None,
        atol: Optional[float] = None,
        d_min: Optional[float] = None,
        h_margin: float = 1e-3,
        boundary_seed: int = 0,
    ):
        self.spec = spec
        self.field = field if field is not None else closed_loop_field(spec)
        self.rtol = spec.tol.rtol if rtol is None else rtol
        self.atol = spec.tol.atol if atol is None else atol
        self.h_margin = h_margin
        self._h = spec._h_fn
        self._V = spec._V_fn
        if d_min is None:
            try:
                pts = sample_boundary(spec, 16, seed=boundary_seed)
                v_scale = max(abs(spec.V(p)) for p in pts)
                d_min = 1e-9 * max(v_scale, 1e-3)
            except Exception:  # noqa: BLE001 - sampler may be unsupported here
                d_min = 1e-12
        self.d_min = d_min

    # -- pointwise ---------------------------------------------------------

    def _region(self, hx: float) -> str:
        if hx > self.h_margin:
            return "inside"
        if hx < -self.h_margin:
            return "outside"
        return "boundary"

    def hit(self, x) -> HittingResult:
        return hitting_time(
            self.field, self._h, x, grad_h=self.spec.grad_h,
            t_max=self.spec.tol.t_max, r_min=self.spec.tol.r_min,
            rtol=self.rtol, atol=self.atol, event_tol=self.spec.tol.event_tol,
        )

    def value(self, x) -> ClbfEvaluation:
        x = np.asarray(x, dtype=float)
        if float(np.linalg.norm(x)) == 0.0:
            # continuous extension at the equilibrium
            return ClbfEvaluation(x, 0.0, 0.0, 0.0, "inside", "ok", T=0.0,
                                  x_hit=x.copy(), V_hit=math.nan)
        hx = self._h(x)
        res = self.hit(x)
        if not res.ok:
            return ClbfEvaluation(x, math.nan, math.nan, math.nan,
                                  self._region(hx), res.status)
        d = self._V(res.x_hit)
        if not (d >= self.d_min):
            return ClbfEvaluation(
                x, math.nan, math.nan, math.nan, self._region(hx),
                "denominator_too_small", T=res.T, x_hit=res.x_hit, V_hit=d,
            )
        vx = self._V(x)
        gV = self.spec.grad_V(x)
        omega = -float(gV @ self.field.fn(x))
        return ClbfEvaluation(
            x, omega, omega / d, vx / d, self._region(hx), "ok",
            T=res.T, x_hit=res.x_hit, V_hit=d,
            decrease_ok=bool(omega > 0.0 and vx > 0.0),
        )

    def W(self, x) -> float:
        ev = self.value(x)
        if not ev.ok:
            raise ClbfError(f"W unavailable at {np.asarray(x).tolist()}: {ev.status}")
        return ev.W

    # -- grids ---------------------------------------------------------------

    def grid(self, axes: Sequence[tuple[float, float, int]]) -> list[ClbfEvaluation]:
        """Row-major evaluation over a rectangular grid; per-point statuses
        are recorded, never raised."""
        if len(axes) != self.spec.n:
            raise ClbfError(f"grid needs {self.spec.n} axes")
        coords = [np.linspace(lo, hi, count) for lo, hi, count in axes]
        out = []
        for idx in np.ndindex(*[len(c) for c in coords]):
            x = np.array([coords[k][i] for k, i in enumerate(idx)])
            try:
                out.append(self.value(x))
            except Exception as exc:  # noqa: BLE001 - keep grids total
                out.append(
                    ClbfEvaluation(x, math.nan, math.nan, math.nan, "inside",
                                   f"error:{type(exc).__name__}")
                )
        return out

    # -- decrease identity ----------------------------------------------------

    def pde_residual(self, x, dt: Optional[float] = None) -> float:
        """|  (W(flow(dt,x)) - W(flow(-dt,x))) / (2 dt) + omega1(x) |.

        Both displaced states sit on the same trajectory as x, so they share
        its hit point; the ratio is evaluated against that common denominator,
        which is exactly the defining constancy of the construction. The short
        flows are integrated at fixed tight tolerance since the central
        difference divides their state error by 2*dt.
        """
        x = np.asarray(x, dtype=float)
        ev = self.value(x)
        if not ev.ok:
            raise ClbfError(f"residual unavailable at {x.tolist()}: {ev.status}")
        if dt is None:
            dt = 1e-4 * (1.0 + abs(ev.T))
        minus = ode.integrate(self.field.fn, x, (0.0, -dt), rtol=1e-12, atol=1e-15)
        plus = ode.integrate(self.field.fn, x, (0.0, dt), rtol=1e-12, atol=1e-15)
        if minus.status != "completed" or plus.status != "completed":
            raise ClbfError(f"short flows failed near {x.tolist()}")
        v_plus = self._V(plus.y_end)
        v_minus = self._V(minus.y_end)
        dWdt = (v_plus - v_minus) / (2.0 * dt * ev.V_hit)
        return abs(dWdt + ev.omega1)

    # -- converse-integral cross-check ---------------------------------------

    def converse_integral(self, x, t_horizon: float = 25.0) -> float:
        """Forward quadrature of omega1 along the flow, which must reproduce
        W(x); used as a sampled cross-check of the ratio construction."""
        x = np.asarray(x, dtype=float)
        ev = self.value(x)
        if not ev.ok:
            raise ClbfError(f"integral unavailable at {x.tolist()}: {ev.status}")
        d = ev.V_hit
        spec = self.spec
        fld = self.field.fn

        def aug(z):
            xs = z[:-1]
            dx = fld(xs)
            om = -float(spec.grad_V(xs) @ dx)
            return np.concatenate([dx, [om / d]])

        traj = ode.integrate(aug, np.concatenate([x, [0.0]]), (0.0, t_horizon),
                             rtol=self.rtol, atol=self.atol)
        if traj.status != "completed":
            raise ClbfError(f"quadrature flow failed: {traj.status}")
        return float(traj.y_end[-1])

    # -- verification -----------------------------------------------------------

    def verify(
        self,
        W_fn: Optional[Callable[[np.ndarray], float]] = None,
        *,
        n_boundary: int = 64,
        n_interior: int = 60,
        n_exterior: int = 60,
        n_condition1: int = 24,
        n_pde: int = 20,
        tolerances: Optional[VerifyTolerances] = None,
        seed: int = 0,
    ) -> ClbfReport:
        """Sampled check of the three defining conditions.

        Level condition: |W - 1| <= tol.boundary on boundary samples.
        Sublevel condition: W < 1 - tol.separation at interior samples with
        h >= h_margin and W > 1 + tol.separation at exterior samples with
        h <= -h_margin. Decrease condition: the finite-difference gradient of
        W admits a strictly decreasing control direction (f,g mode) or
        grad W . F < 0 (closed-loop mode). The flow-difference residual of the
        decrease identity is reported alongside (only for the built-in W).
        """
        spec = self.spec
        tol = tolerances or VerifyTolerances()
        external_W = W_fn is not None
        W_eval = W_fn if external_W else self.W

        notes: list[str] = []
        n_failed = 0

        boundary_pts = sample_boundary(spec, n_boundary, seed=seed)
        boundary_dev = 0.0
        for p in boundary_pts:
            boundary_dev = max(boundary_dev, abs(float(W_eval(p)) - 1.0))

        box_pts = box_samples(spec.domain_box, 24 * max(n_interior, n_exterior), seed=seed + 101)
        interior_pts, exterior_pts = [], []
        for p in box_pts:
            if float(np.linalg.norm(p)) < spec.tol.r_min:
                continue
            hv = self._h(p)
            if hv >= tol.h_margin and len(interior_pts) < n_interior:
                interior_pts.append(p)
            elif hv <= -tol.h_margin and len(exterior_pts) < n_exterior:
                exterior_pts.append(p)
            if len(interior_pts) >= n_interior and len(exterior_pts) >= n_exterior:
                break
        if len(interior_pts) < n_interior or len(exterior_pts) < n_exterior:
            notes.append(
                f"sampled only {len(interior_pts)} interior / {len(exterior_pts)} "
                "exterior points inside the box"
            )

        interior_max = -math.inf
        for p in interior_pts:
            try:
                interior_max = max(interior_max, float(W_eval(p)))
            except Exception:  # noqa: BLE001
                n_failed += 1
        exterior_min = math.inf
        for p in exterior_pts:
            try:
                exterior_min = min(exterior_min, float(W_eval(p)))
            except Exception:  # noqa: BLE001
                n_failed += 1

        if not math.isfinite(interior_max) or not math.isfinite(exterior_min):
            notes.append("interior/exterior evaluation produced no usable values")
            interior_max = math.inf if not math.isfinite(interior_max) else interior_max
            exterior_min = -math.inf if not math.isfinite(exterior_min) else exterior_min
        condition_level = boundary_dev <= tol.boundary
        condition_sublevel = (
            interior_max < 1.0 - tol.separation and exterior_min > 1.0 + tol.separation
        )

        # decrease feasibility via the finite-difference gradient of W
        decrease_failures = []
        cond1_pts = (interior_pts + exterior_pts)[:n_condition1]
        for p in cond1_pts:
            try:
                gW = _fd_grad(W_eval, p)
            except Exception:  # noqa: BLE001
                n_failed += 1
                continue
            if spec.external_mode:
                dW = float(gW @ self.field.fn(p))
                if not (dW < 0.0):
                    decrease_failures.append(p)
            else:
                a0 = float(gW @ spec.f(p))
                a = gW @ spec.g(p)
                feas, _ = strict_feasible(a0, a, mode="interior")
                if not feas:
                    decrease_failures.append(p)
        condition_decrease = not decrease_failures

        max_resid = 0.0
        if not external_W:
            for p in (interior_pts + exterior_pts)[:n_pde]:
                try:
                    max_resid = max(max_resid, self.pde_residual(p))
                except Exception:  # noqa: BLE001
                    n_failed += 1

        return ClbfReport(
            boundary_max_dev=float(boundary_dev),
            interior_max_W=float(interior_max),
            exterior_min_W=float(exterior_min),
            max_pde_residual=float(max_resid),
            decrease_failures=decrease_failures,
            condition_decrease=condition_decrease,
            condition_sublevel=condition_sublevel,
            condition_level=condition_level,
            passed=condition_decrease and condition_sublevel and condition_level,
            n_boundary=len(boundary_pts),
            n_interior=len(interior_pts),
            n_exterior=len(exterior_pts),
            n_failed_points=n_failed,
            notes=notes,
        )


def _fd_grad(fn: Callable[[np.ndarray], float], x, step: Optional[float] = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if step is None:
        step = 1e-5 * max(1.0, float(np.linalg.norm(x)))
    g = np.empty_like(x)
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = step
        g[i] = (float(fn(x + e)) - float(fn(x - e))) / (2.0 * step)
    return g


def smooth_compose(W, p: float):
    """Power-law smoothing s -> s^p composed with W (callable or array).

    For p >= 1 the map is strictly increasing, unbounded, vanishes at zero,
    fixes 1, and satisfies rho(s) <= s rho'(s) for s >= 0, so the composed
    certificate keeps its level sets and decrease direction. p < 1 is
    rejected because the last inequality fails.
    """
    if not (p >= 1.0):
        raise ValueError(f"smoothing exponent must be >= 1, got {p!r}")
    if callable(W):
        def composed(x):
            return float(W(x)) ** p
        return composed
    return np.power(np.asarray(W, dtype=float), p)


_GRID_COLUMNS = "h,V,W,omega1,region,status"


def grid_to_csv(path, spec: SystemSpec, evaluations: Sequence[ClbfEvaluation]):
    """Grid export with columns x1..xn,h,V,W,omega1,region,status."""
    names = list(spec.state_names)
    with open(path, "w") as fh:
        fh.write(",".join(names) + "," + _GRID_COLUMNS + "\n")
        for ev in evaluations:
            try:
                hv = spec.h(ev.x)
                vv = spec.V(ev.x)
            except Exception:  # noqa: BLE001
                hv, vv = math.nan, math.nan
            row = [repr(float(v)) for v in ev.x]
            row += [repr(float(hv)), repr(float(vv)), repr(float(ev.W)),
                    repr(float(ev.omega1)), ev.region, ev.status]
            fh.write(",".join(row) + "\n")
