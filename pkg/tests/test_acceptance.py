"""Acceptance suite: every release criterion, at its stated tolerance.

Each test prints one PASS/FAIL line (visible with pytest -s or -rA) and
asserts the criterion. Expected values come from closed forms of the two
reference systems or from independent brute-force/finite-difference oracles;
the polar closed forms were additionally confirmed against an external
integrator before being frozen here.
"""

import math

import numpy as np
import pytest

from clbf_forge import clbf, compat, control, expr, hitting, model
from conftest import polar_T_exact, polar_theta_shift_exact
from test_compat import brute_force_verdicts
from test_expr import _fd_gradient, _random_tree


def _report(name: str, ok: bool, detail: str):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------------------


def test_criterion_polar_hitting_time(polar_spec, polar_field):
    """Closed-form hitting law of the polar reference: T and the hit angle."""
    radii = [0.5, 0.8, 1.0, 1.5, 2.0]
    thetas = np.linspace(0.15, 2.95, 8)
    worst_T = worst_th = 0.0
    for r in radii:
        for th in thetas:
            res = hitting.hitting_time(
                polar_field, polar_spec._h_fn, [r, th], grad_h=polar_spec.grad_h,
                t_max=polar_spec.tol.t_max, rtol=polar_spec.tol.rtol,
                atol=polar_spec.tol.atol,
            )
            assert res.ok, (r, th, res.status)
            worst_T = max(worst_T, abs(res.T - polar_T_exact(r)))
            th_expected = th + polar_theta_shift_exact(r)
            worst_th = max(worst_th, abs(res.x_hit[1] - th_expected))
    _report(
        "polar hitting time",
        worst_T <= 1e-6 and worst_th <= 1e-5,
        f"max |T err| {worst_T:.2e} (tol 1e-6), max |theta err| {worst_th:.2e} (tol 1e-5)",
    )


def test_criterion_polar_clbf(polar_spec):
    """Unified certificate on the polar reference: boundary level, grid
    dichotomy, and the decrease identity as a flow-difference residual."""
    evaluator = clbf.ClbfEvaluator(polar_spec, rtol=1e-8, atol=1e-11)

    boundary = compat.sample_boundary(polar_spec, 64, seed=0)
    dev = max(abs(evaluator.W(p) - 1.0) for p in boundary)

    evs = evaluator.grid([(0.2, 2.0, 41), (0.0, math.pi, 41)])
    n_checked = violations = 0
    for ev in evs:
        assert ev.ok, (ev.x, ev.status)
        hv = polar_spec.h(ev.x)
        if abs(hv) <= 1e-3:
            continue
        n_checked += 1
        if (ev.W < 1.0) != (hv > 0.0):
            violations += 1

    tight = clbf.ClbfEvaluator(polar_spec)  # default tight tolerances
    rng = np.random.default_rng(42)
    worst_resid = 0.0
    for _ in range(100):
        x = [rng.uniform(0.2, 2.0), rng.uniform(0.0, math.pi)]
        ev = tight.value(x)
        dt = 1e-5 * (1.0 + abs(ev.T))
        worst_resid = max(worst_resid, tight.pde_residual(x, dt=dt))

    _report(
        "polar unified certificate",
        dev <= 1e-7 and violations == 0 and worst_resid <= 1e-5,
        f"boundary max |W-1| {dev:.2e} (tol 1e-7); "
        f"{violations}/{n_checked} grid dichotomy violations; "
        f"max residual {worst_resid:.2e} (tol 1e-5)",
    )


def test_criterion_linear_closed_forms(linear_spec, linear_field):
    """Analytic reference: T = log |x|, grad T = x/|x|^2, W = |x|^2, and
    quotient-vs-finite-difference gradient agreement at 100 points."""
    rng = np.random.default_rng(7)
    evaluator = clbf.ClbfEvaluator(linear_spec)

    worst_T = 0.0
    for radius in np.linspace(0.1, 3.0, 12):
        ang = rng.uniform(0, 2 * math.pi)
        x = radius * np.array([math.cos(ang), math.sin(ang)])
        res = hitting.hitting_time(linear_field, linear_spec._h_fn, x,
                                   grad_h=linear_spec.grad_h, t_max=50.0)
        assert res.ok
        worst_T = max(worst_T, abs(res.T - math.log(radius)))

    worst_g = worst_W = 0.0
    for _ in range(25):
        radius = rng.uniform(0.15, 2.5)
        ang = rng.uniform(0, 2 * math.pi)
        x = radius * np.array([math.cos(ang), math.sin(ang)])
        g = hitting.grad_hitting_time(linear_field, linear_spec._h_fn, x,
                                      grad_h=linear_spec.grad_h)
        worst_g = max(worst_g, float(np.max(np.abs(g - x / radius**2))))
        worst_W = max(worst_W, abs(evaluator.W(x) - radius**2))

    worst_rel = 0.0
    for _ in range(100):
        radius = rng.uniform(0.2, 2.0)
        ang = rng.uniform(0, 2 * math.pi)
        x = radius * np.array([math.cos(ang), math.sin(ang)])
        q = hitting.grad_hitting_time(linear_field, linear_spec._h_fn, x,
                                      grad_h=linear_spec.grad_h)
        fd = hitting.grad_T_fd(linear_field, linear_spec._h_fn, x,
                               grad_h=linear_spec.grad_h)
        worst_rel = max(worst_rel, float(np.max(np.abs(q - fd)))
                        / max(1.0, float(np.max(np.abs(q)))))

    _report(
        "linear closed forms",
        worst_T <= 1e-6 and worst_g <= 1e-5 and worst_W <= 1e-6 and worst_rel <= 1e-4,
        f"|T - log r| {worst_T:.2e} (1e-6); |grad T - x/r^2| {worst_g:.2e} (1e-5); "
        f"|W - r^2| {worst_W:.2e} (1e-6); quotient-vs-FD rel {worst_rel:.2e} (1e-4)",
    )


def test_criterion_gradient_growth_laws(linear_spec, linear_field, polar_spec, polar_field):
    """Blow-up exponents of |grad T| toward the origin, and the logarithmic
    growth of |T|. The polar system's exponent is -3, not -1: its angular rate
    diverges at the origin, so the linearization hypothesis behind the -1 law
    fails there by design."""
    lin = hitting.growth_probe(linear_field, linear_spec._h_fn, [1.0, 0.0],
                               0.8, 10, grad_h=linear_spec.grad_h, t_max=50.0)
    pol = hitting.growth_probe(polar_field, polar_spec._h_fn, [1.0, 0.0],
                               0.8, 3, grad_h=polar_spec.grad_h, t_max=300.0)
    ok = (
        abs(lin.slope - (-1.0)) <= 0.02
        and abs(lin.T_slope - 1.0) <= 0.02
        and abs(pol.slope - (-3.0)) <= 0.05
    )
    _report(
        "gradient growth laws",
        ok,
        f"linear slope {lin.slope:.4f} (-1 +/- 0.02), |T| slope {lin.T_slope:.4f} "
        f"(1 +/- 0.02), polar slope {pol.slope:.4f} (-3 +/- 0.05)",
    )


def test_criterion_compatibility_oracle(linear_spec, double_integrator_spec):
    """Exact feasibility rules against brute-force grid search, the known
    boundary failure of the double integrator, and the linear margin."""
    rng = np.random.default_rng(2024)
    disagreements = 0
    for k in range(1000):
        m = k % 3 + 1
        a0, b0 = (rng.normal(size=2) * 2.0).tolist()
        a = rng.normal(size=m) * (rng.random() > 0.1)
        b = rng.normal(size=m) * (rng.random() > 0.1)
        analytic, _ = compat.strict_feasible(a0, a, b0, b, mode="boundary")
        robust, any_pos = brute_force_verdicts(a0, a, b0, b)
        if (robust and not analytic) or (not analytic and any_pos):
            disagreements += 1

    rep = compat.compat_report(double_integrator_spec, n_interior=40,
                               n_boundary=16, U=1.0)
    cxs = np.array(rep.counterexamples) if rep.counterexamples else np.zeros((0, 2))
    axis_found = (
        any(np.allclose(c, [1.0, 0.0], atol=1e-8) for c in cxs)
        and any(np.allclose(c, [-1.0, 0.0], atol=1e-8) for c in cxs)
    )

    lin_rep = compat.compat_report(linear_spec, n_interior=100, n_boundary=32, U=1.0)
    _report(
        "compatibility oracle",
        disagreements == 0 and axis_found and lin_rep.overall
        and lin_rep.worst_boundary_margin >= 0.5,
        f"{disagreements}/1000 oracle disagreements; axis failures found: {axis_found}; "
        f"linear worst boundary margin {lin_rep.worst_boundary_margin:.6f} (>= 0.5)",
    )


def test_criterion_controller_suite(linear_spec, rng):
    """Sontag decrease identity, minimum-norm optimality against a fine grid,
    and forward invariance over sampled safe starts."""
    worst_rel = 0.0
    checked = 0
    while checked < 500:
        x = rng.uniform(-3.0, 3.0, size=2)
        a0, a, _, _ = compat.lie_rows(linear_spec, x)
        na2 = float(a @ a)
        if na2 == 0.0:
            continue
        u = control.sontag(linear_spec, x)
        target = -math.sqrt(a0 * a0 + na2 * na2)
        worst_rel = max(worst_rel, abs(a0 + float(a @ u) - target) / abs(target))
        checked += 1

    from clbf_forge.control import _min_norm_two_halfspaces

    qp_ok = True
    qp_checked = 0
    while qp_checked < 30:
        m = int(rng.integers(1, 4))
        a = rng.normal(size=m)
        alpha = float(rng.normal())
        b = rng.normal(size=m)
        beta = float(rng.normal())
        u = _min_norm_two_halfspaces(a, alpha, b, beta)
        if u is None:
            continue
        L = max(2.0, 2.5 * float(np.linalg.norm(u)))
        npts = 81 if m < 3 else 41
        axes = [np.linspace(-L, L, npts)] * m
        G = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m)
        feas = (G @ a <= alpha) & (G @ b >= beta)
        if not feas.any():
            continue
        gmin = float(np.min(np.einsum("ij,ij->i", G[feas], G[feas])))
        if float(u @ u) > gmin * 1.01 + 1e-6:
            qp_ok = False
        qp_checked += 1

    worst_h = 0.0
    for _ in range(100):
        ang = rng.uniform(0, 2 * math.pi)
        rad = math.sqrt(rng.uniform(0, 1.0))
        sim = control.simulate_closed_loop(
            linear_spec, "min_norm_qp",
            [rad * math.cos(ang), rad * math.sin(ang)], 4.0,
        )
        worst_h = min(worst_h, sim.min_h)

    _report(
        "controller suite",
        worst_rel <= 1e-9 and qp_ok and worst_h >= -1e-6,
        f"sontag identity rel err {worst_rel:.2e} (1e-9); "
        f"min-norm within 1% of grid optimum over {qp_checked} instances: {qp_ok}; "
        f"min path h over 100 safe starts {worst_h:.2e} (>= -1e-6)",
    )


def test_criterion_assumption_checks(linear_spec):
    """Linearization certificate and the small-control probe."""
    good = model.check_linearization(linear_spec, [[-1, 0], [0, -1]])
    M_err = float(np.max(np.abs(good.M + 2.0 * np.eye(2))))
    bad = model.check_linearization(linear_spec, [[1, 0], [0, 1]])
    probe = model.small_control_probe(linear_spec, [1.0, 0.1, 0.01])
    probe_ok = all(r.passed for r in probe)
    _report(
        "assumption checks",
        good.passed and M_err <= 1e-9 and not bad.passed and probe_ok,
        f"M entrywise err {M_err:.2e} (1e-9), stabilizing pass {good.passed}, "
        f"destabilizing fail {not bad.passed}, small-control probe "
        f"{[(r.eps, r.passed) for r in probe]}",
    )


def test_criterion_negative_control(polar_spec, polar_clbf):
    """The verifier must reject the raw Lyapunov candidate, whose boundary
    values range over [3, 5] instead of sitting on the unit level."""
    report = polar_clbf.verify(polar_spec.V, n_boundary=32, n_interior=10,
                               n_exterior=10, n_condition1=4)
    _report(
        "negative control (raw V)",
        (not report.passed) and (not report.condition_level)
        and report.boundary_max_dev >= 0.2,
        f"level condition failed with max |W-1| {report.boundary_max_dev:.3f} (>= 0.2)",
    )


def test_criterion_expression_layer():
    """Forward-mode gradients against central differences on random trees,
    plus the exact precedence fixtures."""
    rng = np.random.default_rng(31415)
    names = ["x1", "x2", "x3"]
    worst = 0.0
    checked = 0
    while checked < 200:
        src = _random_tree(rng, names, depth=int(rng.integers(1, 5)))
        try:
            ast = expr.parse(src, names)
        except expr.ParseError:
            continue
        x = rng.uniform(-2.0, 2.0, size=3)
        try:
            g = expr.grad(ast, x)
            fd = _fd_gradient(ast, x)
        except expr.EvalDomainError:
            continue
        if not np.all(np.isfinite(fd)) or np.max(np.abs(g)) > 1e5:
            continue
        worst = max(worst, float(np.max(np.abs(g - fd)))
                    / max(1.0, float(np.max(np.abs(g)))))
        checked += 1

    fixtures = (
        expr.evaluate(expr.parse("2+3*4", []), []) == 14
        and expr.evaluate(expr.parse("2^3^2", []), []) == 512
        and expr.evaluate(expr.parse("-2^2", []), []) == -4
    )
    _report(
        "expression/AD layer",
        worst <= 1e-6 and fixtures,
        f"max AD-vs-FD rel err {worst:.2e} over 200 trees (1e-6); "
        f"precedence fixtures exact: {fixtures}",
    )
