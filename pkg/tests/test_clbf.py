import math

import numpy as np
import pytest

from clbf_forge import clbf, model, ode
from conftest import polar_theta_shift_exact


def polar_W_exact(r, th):
    """Closed-form certificate value for the polar reference system."""
    th_hit = th + polar_theta_shift_exact(r)
    return (4 * r**2 + r**5 * math.sin(th)) / (4.0 + math.sin(th_hit))


# ---------------------------------------------------------------------------
# pointwise values


def test_linear_certificate_is_squared_radius(linear_clbf):
    ev = linear_clbf.value([0.5, 0.0])
    assert ev.ok
    assert ev.W == pytest.approx(0.25, abs=1e-8)
    assert ev.omega == pytest.approx(0.25, abs=1e-10)  # -grad V . F = |x|^2
    assert ev.omega1 == pytest.approx(0.5, abs=1e-8)
    assert ev.region == "inside"


def test_boundary_value_is_one(linear_clbf, polar_clbf, linear_spec, polar_spec):
    from clbf_forge.compat import sample_boundary

    for spec, evaluator in ((linear_spec, linear_clbf), (polar_spec, polar_clbf)):
        for p in sample_boundary(spec, 6, seed=3):
            ev = evaluator.value(p)
            assert ev.region == "boundary"
            assert ev.W == pytest.approx(1.0, abs=1e-7)


def test_polar_value_matches_closed_form(polar_clbf):
    # independent oracle: numerically integrated ratio agrees with the closed
    # form; the frozen literal was confirmed with an external integrator
    ev = polar_clbf.value([2.0, 0.0])
    assert ev.ok
    assert ev.W == pytest.approx(polar_W_exact(2.0, 0.0), abs=1e-6)
    assert ev.W == pytest.approx(3.7008161975, abs=1e-6)
    assert ev.T == pytest.approx(0.375, abs=1e-7)


def test_value_at_exact_origin(linear_clbf):
    ev = linear_clbf.value([0.0, 0.0])
    assert ev.ok and ev.W == 0.0 and ev.omega1 == 0.0


def test_origin_ball_status(linear_clbf):
    ev = linear_clbf.value([1e-8, 0.0])
    assert ev.status == "origin_too_close"


def test_denominator_guard(linear_spec):
    guarded = clbf.ClbfEvaluator(linear_spec, d_min=10.0)
    ev = guarded.value([0.5, 0.0])
    assert ev.status == "denominator_too_small"


# ---------------------------------------------------------------------------
# grids


def test_linear_grid_matches_squared_radius(linear_spec):
    evaluator = clbf.ClbfEvaluator(linear_spec, rtol=1e-9, atol=1e-12)
    evs = evaluator.grid([(-1.5, 1.5, 21), (-1.5, 1.5, 21)])
    assert len(evs) == 441
    for ev in evs:
        if not ev.ok:
            assert ev.status == "origin_too_close"
            continue
        want = float(ev.x @ ev.x)
        if want == 0.0:
            assert ev.W == 0.0
        else:
            assert ev.W == pytest.approx(want, abs=1e-6)


def test_polar_grid_dichotomy_on_shipped_box(polar_spec):
    evaluator = clbf.ClbfEvaluator(polar_spec, rtol=1e-8, atol=1e-11)
    evs = evaluator.grid([(0.2, 2.0, 21), (0.0, math.pi, 21)])
    for ev in evs:
        assert ev.ok
        hv = polar_spec.h(ev.x)
        if abs(hv) <= 1e-3:
            continue
        assert (ev.W < 1.0) == (hv > 0.0)
        assert ev.decrease_ok


def test_polar_full_circle_breaks_the_dichotomy():
    """The shipped config restricts the angle to [0, pi] deliberately: the
    certificate V = 4 r^2 + r^5 sin(th) stops decreasing along the flow
    (omega < 0) for some angles once r is well above 1, and the sublevel
    dichotomy provably fails there. This documents the counterexample and
    checks that the evaluator reports rather than masks it."""
    doc = model.example_config("polar")
    doc["domain_box"] = [[0.1, 1.55], [0.0, 6.283185307179586]]  # V > 0 needs r < 4^(1/3)
    spec = model.load_system(doc)
    evaluator = clbf.ClbfEvaluator(spec, rtol=1e-8, atol=1e-11)

    ev = evaluator.value([1.5, 3 * math.pi / 2])
    assert ev.ok
    assert ev.W == pytest.approx(polar_W_exact(1.5, 3 * math.pi / 2), abs=1e-6)
    assert spec.h(ev.x) < 0 and ev.W < 1.0  # dichotomy violated outside the safe set
    assert not ev.decrease_ok  # and the evaluator flags the decrease failure

    # with the angle confined to the valid sector the same radius is fine
    ev2 = evaluator.value([1.5, 1.0])
    assert ev2.W > 1.0 and ev2.decrease_ok


def test_full_circle_box_to_radius_two_is_rejected_at_load():
    # beyond r = 4^(1/3) the candidate V itself goes negative at some angles,
    # so the config validation refuses the box before any flow is computed
    doc = model.example_config("polar")
    doc["domain_box"] = [[0.1, 2.2], [0.0, 6.283185307179586]]
    with pytest.raises(model.ConfigError, match="positive"):
        model.load_system(doc)


def test_grid_csv_export(tmp_path, linear_spec):
    evaluator = clbf.ClbfEvaluator(linear_spec)
    evs = evaluator.grid([(-1.0, 1.0, 5), (-1.0, 1.0, 5)])
    out = tmp_path / "grid.csv"
    clbf.grid_to_csv(out, linear_spec, evs)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "x1,x2,h,V,W,omega1,region,status"
    assert len(lines) == 26


# ---------------------------------------------------------------------------
# decrease identity and flow properties


def test_pde_residual_linear(linear_clbf):
    assert linear_clbf.pde_residual([0.5, 0.0]) <= 1e-6


def test_pde_residual_on_boundary(linear_clbf):
    assert linear_clbf.pde_residual([1.0, 0.0]) <= 1e-6


def test_pde_residual_polar(polar_clbf):
    ev = polar_clbf.value([1.5, 1.0])
    dt = 1e-5 * (1.0 + abs(ev.T))
    assert polar_clbf.pde_residual([1.5, 1.0], dt=dt) <= 1e-5


def test_flow_monotonicity(linear_clbf, linear_spec, rng):
    field = linear_clbf.field
    for _ in range(50):
        x = rng.uniform(-1.6, 1.6, size=2)
        if np.linalg.norm(x) < 0.1:
            continue
        s = rng.uniform(0.01, 0.1)
        ahead = ode.integrate(field.fn, x, (0.0, s), rtol=1e-11, atol=1e-13).y_end
        assert linear_clbf.W(ahead) < linear_clbf.W(x)


def test_denominator_invariant_along_trajectory(polar_clbf, polar_spec):
    x = np.array([1.4, 0.8])
    ev = polar_clbf.value(x)
    ahead = ode.integrate(polar_clbf.field.fn, x, (0.0, 0.08), rtol=1e-11, atol=1e-13).y_end
    ev2 = polar_clbf.value(ahead)
    rel = abs(ev.V_hit - ev2.V_hit) / abs(ev.V_hit)
    assert rel <= 1e-6


def test_converse_integral_cross_check(linear_clbf):
    val = linear_clbf.converse_integral([0.5, 0.0])
    assert val == pytest.approx(0.25, abs=1e-3)


# ---------------------------------------------------------------------------
# smoothing composition


def test_smoothing_properties():
    with pytest.raises(ValueError):
        clbf.smooth_compose(lambda x: 1.0, 0.5)
    vals = np.array([0.0, 0.25, 1.0, 4.0])
    assert np.allclose(clbf.smooth_compose(vals, 1.0), vals)
    squared = clbf.smooth_compose(vals, 2.0)
    assert squared[2] == 1.0  # the unit level set survives
    assert np.all(np.diff(squared) > 0)  # strictly increasing


def test_smoothing_on_linear_certificate(linear_clbf):
    w2 = clbf.smooth_compose(linear_clbf.W, 2.0)
    x = np.array([0.5, 0.0])
    assert w2(x) == pytest.approx(0.0625, abs=1e-7)  # |x|^4
    assert w2(np.array([1.0, 0.0])) == pytest.approx(1.0, abs=1e-9)


# ---------------------------------------------------------------------------
# verification


def test_verify_linear_passes(linear_clbf):
    report = linear_clbf.verify(n_boundary=16, n_interior=25, n_exterior=25,
                                n_condition1=10, n_pde=5)
    assert report.passed
    assert report.boundary_max_dev <= 1e-7
    assert report.interior_max_W < 1.0
    assert report.exterior_min_W > 1.0
    assert not report.decrease_failures


def test_verify_polar_passes(polar_clbf):
    report = polar_clbf.verify(n_boundary=16, n_interior=20, n_exterior=20,
                               n_condition1=8, n_pde=4)
    assert report.passed


def test_verify_smoothed_certificate(linear_clbf):
    report = linear_clbf.verify(clbf.smooth_compose(linear_clbf.W, 2.0),
                                n_boundary=12, n_interior=15, n_exterior=15,
                                n_condition1=6)
    assert report.passed


def test_verify_raw_candidate_fails_level_condition(polar_clbf, polar_spec):
    report = polar_clbf.verify(polar_spec.V, n_boundary=16, n_interior=10,
                               n_exterior=10, n_condition1=4)
    assert not report.passed
    assert not report.condition_level
    assert report.boundary_max_dev >= 0.2
    json_doc = report.to_json()
    assert "condition_level" in json_doc


def test_report_json(linear_clbf):
    import json

    report = linear_clbf.verify(n_boundary=8, n_interior=10, n_exterior=10,
                                n_condition1=4, n_pde=2)
    doc = json.loads(report.to_json())
    assert doc["passed"] is True
    assert doc["n_boundary"] == 8
