"""System/certificate data model: config loading, dynamics, standing checks.

A SystemSpec bundles a control-affine model dx/dt = f(x) + g(x) u (or a
directly supplied closed-loop field F), a Lyapunov candidate V, a barrier
candidate h whose zero-superlevel set is the safe region, an analysis box,
and solver tolerances. Everything arrives as JSON text so the whole pipeline
is driven by plain config files; see README for the exact schema.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import expr
from .expr import EvalDomainError, ExprAst
from .sampling import box_samples, sphere_directions

__all__ = [
    "ConfigError",
    "Tolerances",
    "SystemSpec",
    "VectorField",
    "LinearizationReport",
    "LinearizationError",
    "load_system",
    "eval_dynamics",
    "field_jacobian",
    "fd_jacobian",
    "check_linearization",
    "small_control_probe",
    "ProbeRow",
    "example_config",
    "EXAMPLE_NAMES",
]

CONTROLLER_TAGS = ("sontag", "min_norm_qp", "blended", "external-F")

_N_VALIDATION_SAMPLES = 1024


class ConfigError(ValueError):
    pass


class LinearizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Tolerances:
    rtol: float = 1e-9
    atol: float = 1e-12
    event_tol: float = 1e-12
    r_min: float = 1e-6
    t_max: float = 50.0


@dataclass
class VectorField:
    """A vector field together with a Jacobian routine.

    jacobian_mode records whether the Jacobian comes from forward-mode
    differentiation of expressions (exact) or from central finite differences;
    downstream results carry the tag for reproducibility.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    jac: Callable[[np.ndarray], np.ndarray]
    jacobian_mode: str
    name: str = ""

    def __call__(self, x):
        return self.fn(x)


class SystemSpec:
    """Parsed, validated system plus compiled evaluators.

    Immutable after load_system(); every evaluator is a pure function, so a
    single spec may be shared freely across threads.
    """

    def __init__(self, *, n, m, state_names, f_ast, g_ast, cl_ast, V_ast, h_ast,
                 controller, domain_box, tol, gain_K, controller_params,
                 boundary_mode, diagnostics):
        self.n = n
        self.m = m
        self.state_names = tuple(state_names)
        self.f_ast: Optional[list[ExprAst]] = f_ast
        self.g_ast: Optional[list[list[ExprAst]]] = g_ast
        self.cl_ast: Optional[list[ExprAst]] = cl_ast
        self.V_ast: ExprAst = V_ast
        self.h_ast: ExprAst = h_ast
        self.controller = controller
        self.domain_box = np.asarray(domain_box, dtype=float)
        self.tol = tol
        self.gain_K = None if gain_K is None else np.asarray(gain_K, dtype=float)
        self.controller_params = dict(controller_params)
        self.boundary_mode = boundary_mode
        self.diagnostics = list(diagnostics)

        self._f_fns = None if f_ast is None else [expr.compile_fn(e) for e in f_ast]
        self._g_fns = None if g_ast is None else [[expr.compile_fn(e) for e in row] for row in g_ast]
        self._cl_fns = None if cl_ast is None else [expr.compile_fn(e) for e in cl_ast]
        self._V_fn = expr.compile_fn(V_ast)
        self._h_fn = expr.compile_fn(h_ast)

    # -- mode -------------------------------------------------------------

    @property
    def external_mode(self) -> bool:
        return self.cl_ast is not None

    # -- evaluators --------------------------------------------------------

    def f(self, x) -> np.ndarray:
        if self._f_fns is None:
            raise ConfigError("f is not available in closed-loop (external-F) mode")
        return np.array([fn(x) for fn in self._f_fns])

    def g(self, x) -> np.ndarray:
        if self._g_fns is None:
            raise ConfigError("g is not available in closed-loop (external-F) mode")
        return np.array([[fn(x) for fn in row] for row in self._g_fns])

    def F_external(self, x) -> np.ndarray:
        if self._cl_fns is None:
            raise ConfigError("no closed-loop expressions supplied")
        return np.array([fn(x) for fn in self._cl_fns])

    def V(self, x) -> float:
        return self._V_fn(x)

    def h(self, x) -> float:
        return self._h_fn(x)

    def grad_V(self, x) -> np.ndarray:
        return expr.grad(self.V_ast, x)

    def grad_h(self, x) -> np.ndarray:
        return expr.grad(self.h_ast, x)

    def external_field(self) -> VectorField:
        """The directly supplied closed-loop field with its exact Jacobian."""
        if self.cl_ast is None:
            raise ConfigError("system has no closed_loop expressions")
        cl_ast = self.cl_ast
        fns = self._cl_fns

        def fn(x):
            return np.array([f(x) for f in fns])

        def jac(x):
            return np.array([expr.grad(e, x) for e in cl_ast])

        return VectorField(fn, jac, "autodiff", name="closed_loop")

    def max_h_in_box(self, n_samples: int = 512, seed: int = 7) -> float:
        """Sampled maximum of h over the analysis box (plus the origin)."""
        best = -math.inf
        candidates = [np.zeros(self.n)] + list(box_samples(self.domain_box, n_samples, seed=seed))
        for p in candidates:
            try:
                best = max(best, self._h_fn(p))
            except expr.DOMAIN_EXCEPTIONS:
                continue
        return best


# ---------------------------------------------------------------------------
# Config loading


_TOP_KEYS = {
    "state_dim", "input_dim", "state_names", "f", "g", "closed_loop", "V", "h",
    "controller", "domain_box", "tolerances", "gain_K", "controller_params",
    "boundary_sampling",
}
_TOL_KEYS = {"rtol", "atol", "event_tol", "r_min", "t_max"}
_CTRL_PARAM_KEYS = {"c_v", "kappa", "band", "r0", "r1"}
_BOUNDARY_KEYS = {"mode", "max_tries_factor"}


def _require(cond: bool, message: str):
    if not cond:
        raise ConfigError(message)


def _parse_expr(source, variables, where: str) -> ExprAst:
    _require(isinstance(source, str), f"{where}: expected an expression string")
    try:
        return expr.parse(source, variables)
    except expr.ParseError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def load_system(source) -> SystemSpec:
    """Build a SystemSpec from a JSON document (path, JSON text, or dict).

    Validates dimensions, parses every expression against the declared state
    names, rejects unknown keys, and checks the standing structural facts:
    f(0) = 0 when f is supplied, V(0) = 0, h(0) > 0, and V > 0 on at least
    1000 quasi-random points of the domain box away from the origin.
    """
    if isinstance(source, dict):
        doc = source
    else:
        text = Path(source).read_text() if _looks_like_path(source) else str(source)
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    _require(isinstance(doc, dict), "config root must be an object")

    unknown = set(doc) - _TOP_KEYS
    _require(not unknown, f"unknown config keys: {sorted(unknown)}")

    for key in ("state_dim", "input_dim", "state_names", "V", "h", "controller", "domain_box"):
        _require(key in doc, f"missing required config key {key!r}")

    n = doc["state_dim"]
    m = doc["input_dim"]
    _require(isinstance(n, int) and n >= 1, "state_dim must be a positive integer")
    _require(isinstance(m, int) and m >= 0, "input_dim must be a non-negative integer")
    names = doc["state_names"]
    _require(isinstance(names, list) and len(names) == n, "state_names must list one name per state")

    controller = doc["controller"]
    _require(controller in CONTROLLER_TAGS, f"controller must be one of {CONTROLLER_TAGS}")

    has_fg = "f" in doc or "g" in doc
    has_cl = "closed_loop" in doc
    _require(has_fg != has_cl, "supply exactly one of {f, g} or closed_loop")
    if has_fg:
        _require("f" in doc and "g" in doc, "f and g must be supplied together")
        _require(controller != "external-F", "external-F controller requires closed_loop")
        _require(m >= 1, "input_dim must be >= 1 in f,g mode")
    else:
        _require(controller == "external-F", "closed_loop mode requires controller external-F")

    box = doc["domain_box"]
    _require(
        isinstance(box, list) and len(box) == n
        and all(isinstance(r, list) and len(r) == 2 and r[0] < r[1] for r in box),
        "domain_box must be n rows of [low, high] with low < high",
    )

    tol_doc = doc.get("tolerances", {})
    _require(isinstance(tol_doc, dict), "tolerances must be an object")
    unknown = set(tol_doc) - _TOL_KEYS
    _require(not unknown, f"unknown tolerance keys: {sorted(unknown)}")
    tol = Tolerances(**{k: float(v) for k, v in tol_doc.items()})
    _require(tol.r_min > 0, "r_min must be positive")

    cp_doc = doc.get("controller_params", {})
    _require(isinstance(cp_doc, dict), "controller_params must be an object")
    unknown = set(cp_doc) - _CTRL_PARAM_KEYS
    _require(not unknown, f"unknown controller_params keys: {sorted(unknown)}")

    bs_doc = doc.get("boundary_sampling", {})
    _require(isinstance(bs_doc, dict), "boundary_sampling must be an object")
    unknown = set(bs_doc) - _BOUNDARY_KEYS
    _require(not unknown, f"unknown boundary_sampling keys: {sorted(unknown)}")
    boundary_mode = bs_doc.get("mode", "error")
    _require(boundary_mode in ("error", "skip"), "boundary_sampling.mode must be 'error' or 'skip'")

    f_ast = g_ast = cl_ast = None
    if has_fg:
        f_doc, g_doc = doc["f"], doc["g"]
        _require(isinstance(f_doc, list) and len(f_doc) == n, "f must list one expression per state")
        _require(
            isinstance(g_doc, list) and len(g_doc) == n
            and all(isinstance(r, list) and len(r) == m for r in g_doc),
            "g must be an n x m array of expressions",
        )
        f_ast = [_parse_expr(s, names, f"f[{i}]") for i, s in enumerate(f_doc)]
        g_ast = [
            [_parse_expr(s, names, f"g[{i}][{j}]") for j, s in enumerate(row)]
            for i, row in enumerate(g_doc)
        ]
    else:
        cl_doc = doc["closed_loop"]
        _require(isinstance(cl_doc, list) and len(cl_doc) == n,
                 "closed_loop must list one expression per state")
        cl_ast = [_parse_expr(s, names, f"closed_loop[{i}]") for i, s in enumerate(cl_doc)]

    V_ast = _parse_expr(doc["V"], names, "V")
    h_ast = _parse_expr(doc["h"], names, "h")

    gain_K = doc.get("gain_K")
    if gain_K is not None:
        _require(
            isinstance(gain_K, list) and len(gain_K) == m
            and all(isinstance(r, list) and len(r) == n for r in gain_K),
            "gain_K must be an m x n array (row-major)",
        )

    diagnostics: list[str] = []
    spec = SystemSpec(
        n=n, m=m, state_names=names, f_ast=f_ast, g_ast=g_ast, cl_ast=cl_ast,
        V_ast=V_ast, h_ast=h_ast, controller=controller, domain_box=box, tol=tol,
        gain_K=gain_K, controller_params=cp_doc, boundary_mode=boundary_mode,
        diagnostics=diagnostics,
    )
    _validate_spec(spec)
    return spec


def _looks_like_path(source) -> bool:
    if isinstance(source, Path):
        return True
    if isinstance(source, str):
        s = source.lstrip()
        return not (s.startswith("{") or s.startswith("["))
    raise ConfigError(f"cannot load config from {type(source).__name__}")


def _validate_spec(spec: SystemSpec):
    origin = np.zeros(spec.n)
    try:
        v0 = spec.V(origin)
    except expr.DOMAIN_EXCEPTIONS as exc:
        raise ConfigError(f"V is not evaluable at the origin: {exc}") from exc
    if abs(v0) > 1e-12:
        raise ConfigError(f"V(0) must vanish, got {v0!r}")
    try:
        h0 = spec.h(origin)
    except expr.DOMAIN_EXCEPTIONS as exc:
        raise ConfigError(f"h is not evaluable at the origin: {exc}") from exc
    if h0 <= 0:
        raise ConfigError(f"origin outside safe set: h(0) = {h0!r} must be positive")

    if not spec.external_mode:
        try:
            f0 = spec.f(origin)
        except expr.DOMAIN_EXCEPTIONS as exc:
            raise ConfigError(f"f is not evaluable at the origin: {exc}") from exc
        if float(np.max(np.abs(f0))) > 1e-12:
            raise ConfigError(f"f(0) must vanish, got {f0.tolist()}")
        try:
            spec.g(origin)
        except expr.DOMAIN_EXCEPTIONS as exc:
            raise ConfigError(f"g is not evaluable at the origin: {exc}") from exc
    else:
        # the closed-loop field may be singular at the origin itself (for
        # instance a 1/sqrt(r) angular rate); record it rather than reject
        try:
            spec.F_external(origin)
        except expr.DOMAIN_EXCEPTIONS:
            spec.diagnostics.append(
                "closed_loop field is not evaluable at the origin; "
                "continuity at 0 was not verified"
            )

    pts = box_samples(spec.domain_box, _N_VALIDATION_SAMPLES, seed=1)
    for p in pts:
        if float(np.max(np.abs(p))) == 0.0:
            continue
        try:
            v = spec.V(p)
            spec.h(p)
            if not spec.external_mode:
                spec.f(p)
                spec.g(p)
            else:
                spec.F_external(p)
        except expr.DOMAIN_EXCEPTIONS as exc:
            raise ConfigError(
                f"expressions must be evaluable on the domain box; failed at "
                f"{p.tolist()}: {exc}"
            ) from exc
        if not (v > 0.0):
            raise ConfigError(
                f"V must be positive away from the origin; V({p.tolist()}) = {v!r}"
            )
        if not math.isfinite(v):
            raise ConfigError(f"V is not finite at {p.tolist()}")


# ---------------------------------------------------------------------------
# Dynamics and Jacobians


def eval_dynamics(spec: SystemSpec, x, u=None) -> np.ndarray:
    """Right-hand side f(x) + g(x) u, or the supplied closed-loop field.

    In external-F mode u is ignored.
    """
    x = np.asarray(x, dtype=float)
    if spec.external_mode:
        return spec.F_external(x)
    if u is None:
        raise ConfigError("u is required in f,g mode")
    u = np.asarray(u, dtype=float)
    if u.shape != (spec.m,):
        raise ConfigError(f"u must have shape ({spec.m},), got {u.shape}")
    return spec.f(x) + spec.g(x) @ u


def fd_jacobian(fn: Callable[[np.ndarray], np.ndarray], x, step: Optional[float] = None) -> np.ndarray:
    """Central-difference Jacobian with step 1e-6 * max(1, |x|_inf)."""
    x = np.asarray(x, dtype=float)
    if step is None:
        step = 1e-6 * max(1.0, float(np.max(np.abs(x), initial=0.0)))
    cols = []
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = step
        cols.append((np.asarray(fn(x + e), dtype=float) - np.asarray(fn(x - e), dtype=float)) / (2 * step))
    return np.column_stack(cols)


def field_jacobian(field: VectorField, x) -> np.ndarray:
    """Jacobian of a closed-loop field at x, using the field's own routine
    (exact forward-mode for expression-backed fields, central differences
    otherwise)."""
    return field.jac(np.asarray(x, dtype=float))


# ---------------------------------------------------------------------------
# Linearization check


@dataclass
class LinearizationReport:
    """Certificate for the local exponential-stabilizability assumption.

    M = P (A + B K) + (A + B K)^T P must be negative definite, verified by a
    full Cholesky factorisation of -M. P is the (symmetrised) finite-difference
    Hessian of V at the origin, so a pass certifies that the supplied gain K
    makes A + B K Hurwitz with V locally quadratic along the way.
    """

    A: np.ndarray
    B: np.ndarray
    K: np.ndarray
    P: np.ndarray
    M: np.ndarray
    passed: bool
    min_pivot: float
    P_asymmetry: float = 0.0

    def as_dict(self) -> dict:
        return {
            "A": self.A.tolist(), "B": self.B.tolist(), "K": self.K.tolist(),
            "P": self.P.tolist(), "M": self.M.tolist(),
            "pass": self.passed, "min_pivot": self.min_pivot,
        }


def cholesky_pivots(mat: np.ndarray) -> tuple[bool, list[float]]:
    """Plain Cholesky, returning (completed, pivots-before-sqrt).

    Stops at the first non-positive pivot; 'completed' is True only if every
    pivot was strictly positive.
    """
    a = np.array(mat, dtype=float)
    k = a.shape[0]
    L = np.zeros_like(a)
    pivots = []
    for i in range(k):
        s = a[i, i] - np.dot(L[i, :i], L[i, :i])
        pivots.append(float(s))
        if s <= 0.0:
            return False, pivots
        L[i, i] = math.sqrt(s)
        for j in range(i + 1, k):
            L[j, i] = (a[j, i] - np.dot(L[j, :i], L[i, :i])) / L[i, i]
    return True, pivots


def fd_hessian(fn: Callable, x, step: float = 1e-4) -> np.ndarray:
    """Nested central differences; step balances truncation against roundoff
    for second derivatives in double precision."""
    x = np.asarray(x, dtype=float)
    k = x.shape[0]
    H = np.empty((k, k))
    for i in range(k):
        ei = np.zeros(k)
        ei[i] = step
        for j in range(k):
            ej = np.zeros(k)
            ej[j] = step
            if i == j:
                H[i, i] = (fn(x + ei) - 2.0 * fn(x) + fn(x - ei)) / step**2
            else:
                H[i, j] = (
                    fn(x + ei + ej) - fn(x + ei - ej) - fn(x - ei + ej) + fn(x - ei - ej)
                ) / (4.0 * step**2)
    return H


def check_linearization(spec: SystemSpec, K) -> LinearizationReport:
    """Verify that the gain K stabilises the linearisation in the metric of V.

    A is the exact Jacobian of f at the origin (forward-mode on the supplied
    expressions), B = g(0), and P is the finite-difference Hessian of V at 0.
    """
    if spec.external_mode:
        raise ConfigError("linearization check requires f,g mode")
    K = np.asarray(K, dtype=float)
    if K.shape != (spec.m, spec.n):
        raise ConfigError(f"K must have shape ({spec.m}, {spec.n})")
    origin = np.zeros(spec.n)
    try:
        A = np.array([expr.grad(e, origin) for e in spec.f_ast])
    except EvalDomainError as exc:
        raise LinearizationError(f"f is not differentiable at the origin: {exc}") from exc
    B = spec.g(origin)
    try:
        P_raw = fd_hessian(spec._V_fn, origin)
    except expr.DOMAIN_EXCEPTIONS as exc:
        raise LinearizationError(f"Hessian of V at the origin failed: {exc}") from exc
    asym = float(np.max(np.abs(P_raw - P_raw.T)))
    P = 0.5 * (P_raw + P_raw.T)
    ok, pivots = cholesky_pivots(P)
    if not ok:
        raise LinearizationError(
            "V is not locally quadratic-positive: its Hessian at the origin "
            f"is not positive definite (pivots {pivots})"
        )
    Abar = A + B @ K
    M = P @ Abar + Abar.T @ P
    ok, pivots = cholesky_pivots(-M)
    return LinearizationReport(
        A=A, B=B, K=K, P=P, M=M, passed=ok, min_pivot=min(pivots), P_asymmetry=asym
    )


# ---------------------------------------------------------------------------
# Small-control probe


@dataclass
class ProbeRow:
    eps: float
    delta: float
    passed: bool
    worst_margin: float


def small_control_probe(
    spec: SystemSpec,
    eps_list: Sequence[float],
    n_dirs: int = 16,
    n_radii: int = 8,
    n_delta: int = 12,
    seed: int = 3,
) -> list[ProbeRow]:
    """Probe the small-control property near the origin.

    For each bound eps (decreasing), bisect over a geometric grid of candidate
    radii delta for the largest one such that every sampled x with
    0 < |x| < delta admits a control of norm below eps making V strictly
    decrease. Feasibility is certified through the compatibility margin with
    the control ball |u|_2 <= eps (which implies the per-coordinate bound).
    An infinite eps drops the bound and reduces to the plain strict
    decrease-feasibility check near 0.
    """
    from .compat import lie_rows, margin, strict_feasible

    if spec.external_mode:
        raise ConfigError("small-control probe requires f,g mode")
    delta_max = float(np.min(np.max(np.abs(spec.domain_box), axis=1)))
    deltas = delta_max * 2.0 ** (-np.arange(n_delta, dtype=float))  # decreasing
    dirs = sphere_directions(spec.n, n_dirs, seed=seed, lattice=False)

    def feasible_ball(delta: float, eps: float) -> tuple[bool, float]:
        worst = math.inf
        for d in dirs:
            for k in range(n_radii):
                r = delta * 2.0 ** (-k)
                if r < spec.tol.r_min:
                    break
                x = r * d
                try:
                    a0, a, _, _ = lie_rows(spec, x)
                except expr.DOMAIN_EXCEPTIONS:
                    return False, -math.inf
                if math.isinf(eps):
                    ok, _ = strict_feasible(a0, a, mode="interior")
                    worst = min(worst, math.inf if ok else -math.inf)
                    if not ok:
                        return False, worst
                else:
                    m_val, _ = margin(a0, a, None, None, U=eps, mode="interior")
                    worst = min(worst, m_val)
                    if not (m_val > 0.0):
                        return False, worst
        return True, worst

    rows = []
    for eps in eps_list:
        # deltas decrease with index, so feasibility is (approximately)
        # monotone in the index; bisect for the first feasible entry
        ok0, m0 = feasible_ball(deltas[0], eps)
        if ok0:
            best_idx, best_margin = 0, m0
        else:
            ok_last, m_last = feasible_ball(deltas[-1], eps)
            if not ok_last:
                rows.append(ProbeRow(float(eps), 0.0, False, float(m_last)))
                continue
            lo, hi, best_margin = 0, len(deltas) - 1, m_last
            while hi - lo > 1:
                mid = (lo + hi) // 2
                ok, m_val = feasible_ball(deltas[mid], eps)
                if ok:
                    hi, best_margin = mid, m_val
                else:
                    lo = mid
            best_idx = hi
        rows.append(ProbeRow(float(eps), float(deltas[best_idx]), True, float(best_margin)))
    return rows


# ---------------------------------------------------------------------------
# Built-in example systems

EXAMPLE_NAMES = ("polar", "linear", "double_integrator")


def example_config(name: str) -> dict:
    """Ready-to-run config documents for the bundled reference systems.

    "linear" is the analytic reference (integrator dynamics, quadratic V,
    circular safe set) with closed forms for everything downstream. "polar"
    is the autonomous two-dimensional system in polar-style coordinates with
    a known boundary hitting law; its V certifies decrease only on a sector
    around the safe disk, so the shipped analysis box keeps the angle in
    [0, pi] where the certificate is valid. "double_integrator" has a barrier
    whose control rows vanish at two boundary points, making it the canonical
    strict-compatibility failure.
    """
    if name == "linear":
        return {
            "state_dim": 2,
            "input_dim": 2,
            "state_names": ["x1", "x2"],
            "f": ["0", "0"],
            "g": [["1", "0"], ["0", "1"]],
            "V": "(x1^2 + x2^2)/2",
            "h": "1 - x1^2 - x2^2",
            "controller": "sontag",
            "domain_box": [[-3.5, 3.5], [-3.5, 3.5]],
            "tolerances": {"rtol": 1e-9, "atol": 1e-12, "event_tol": 1e-12,
                           "r_min": 1e-6, "t_max": 50.0},
            "gain_K": [[-1.0, 0.0], [0.0, -1.0]],
        }
    if name == "polar":
        return {
            "state_dim": 2,
            "input_dim": 0,
            "state_names": ["r", "th"],
            "closed_loop": ["-r^3", "r^(-1/2)"],
            "V": "4*r^2 + r^5*sin(th)",
            "h": "1 - r^2",
            "controller": "external-F",
            "domain_box": [[0.1, 2.2], [0.0, 3.141592653589793]],
            "tolerances": {"rtol": 1e-9, "atol": 1e-12, "event_tol": 1e-12,
                           "r_min": 1e-6, "t_max": 80.0},
            "boundary_sampling": {"mode": "skip"},
        }
    if name == "double_integrator":
        return {
            "state_dim": 2,
            "input_dim": 1,
            "state_names": ["x1", "x2"],
            "f": ["x2", "0"],
            "g": [["0"], ["1"]],
            "V": "x1^2 + x1*x2 + x2^2",
            "h": "1 - x1^2 - x2^2",
            "controller": "min_norm_qp",
            "domain_box": [[-1.5, 1.5], [-1.5, 1.5]],
            "tolerances": {"rtol": 1e-9, "atol": 1e-12, "event_tol": 1e-12,
                           "r_min": 1e-6, "t_max": 50.0},
            "gain_K": [[-1.0, -2.0]],
        }
    raise ConfigError(f"unknown example {name!r}; choose from {EXAMPLE_NAMES}")
