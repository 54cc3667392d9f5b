import numpy as np
import pytest

from clbf_forge import compat, control, model


# ---------------------------------------------------------------------------
# Sontag formula


def test_sontag_reduces_to_minus_x(linear_spec, rng):
    for _ in range(50):
        x = rng.uniform(-2, 2, size=2)
        if np.linalg.norm(x) < 1e-9:
            continue
        assert np.allclose(control.sontag(linear_spec, x), -x, rtol=1e-12, atol=1e-14)


def test_sontag_zero_cases(linear_spec):
    assert np.all(control.sontag(linear_spec, [0.0, 0.0]) == 0.0)


def test_sontag_zero_when_drift_already_decreases():
    # stable drift with no gain on V anywhere: a = 0, a0 < 0 away from 0
    doc = {
        "state_dim": 1,
        "input_dim": 1,
        "state_names": ["x1"],
        "f": ["-x1"],
        "g": [["0"]],
        "V": "x1^2",
        "h": "1 - x1^2",
        "controller": "sontag",
        "domain_box": [[-1.4, 1.4]],
    }
    spec = model.load_system(doc)
    assert control.sontag(spec, [0.5]) == pytest.approx([0.0])


def test_sontag_decrease_identity(linear_spec, double_integrator_spec, rng):
    for spec in (linear_spec, double_integrator_spec):
        count = 0
        while count < 100:
            x = rng.uniform(-1.4, 1.4, size=2)
            a0, a, _, _ = compat.lie_rows(spec, x)
            if a0 == 0.0 and not a.any():
                continue
            u = control.sontag(spec, x)
            na2 = float(a @ a)
            if na2 == 0.0:
                continue
            target = -np.sqrt(a0 * a0 + na2 * na2)
            got = a0 + float(a @ u)
            assert abs(got - target) <= 1e-9 * max(1.0, abs(target))
            count += 1


# ---------------------------------------------------------------------------
# minimum-norm program


def test_min_norm_boundary_fixture(linear_spec):
    params = control.resolve_params(linear_spec, c_v=1.0, kappa=1.0, band=1.0)
    u = control.min_norm_qp(linear_spec, [1.0, 0.0], params)
    assert np.allclose(u, [-0.5, 0.0], atol=1e-12)


def test_min_norm_zero_when_drift_suffices():
    doc = {
        "state_dim": 2,
        "input_dim": 2,
        "state_names": ["x1", "x2"],
        "f": ["-x1", "-x2"],  # drift already decays faster than c_v V
        "g": [["1", "0"], ["0", "1"]],
        "V": "(x1^2 + x2^2)/2",
        "h": "1 - x1^2 - x2^2",
        "controller": "min_norm_qp",
        "domain_box": [[-1.4, 1.4], [-1.4, 1.4]],
    }
    spec = model.load_system(doc)
    params = control.resolve_params(spec)  # c_v = 0.1
    u = control.min_norm_qp(spec, [0.3, 0.1], params)  # deep inside, band inactive
    assert np.all(u == 0.0)


def test_min_norm_infeasible_carries_evidence(double_integrator_spec):
    params = control.resolve_params(double_integrator_spec)
    with pytest.raises(control.ControllerInfeasibleError) as err:
        control.min_norm_qp(double_integrator_spec, [1.0, 0.0], params)
    rec = err.value.record
    assert rec.mode == "boundary"
    assert not rec.feasible
    assert rec.b0 == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(rec.b, 0.0, atol=1e-12)


def test_min_norm_optimality_vs_grid(rng):
    from clbf_forge.control import _min_norm_two_halfspaces

    checked = 0
    while checked < 60:
        m = int(rng.integers(1, 4))
        a = rng.normal(size=m)
        alpha = float(rng.normal())
        with_b = rng.random() < 0.7
        b = rng.normal(size=m) if with_b else None
        beta = float(rng.normal()) if with_b else None
        u = _min_norm_two_halfspaces(a, alpha, b, beta)

        L = 6.0
        npts = 61 if m < 3 else 31
        axes = [np.linspace(-L, L, npts)] * m
        G = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m)
        feas = G @ a <= alpha
        if with_b:
            feas &= G @ b >= beta
        if u is not None:
            # returned point satisfies its constraints
            assert float(a @ u) <= alpha + 1e-9
            if with_b:
                assert float(b @ u) >= beta - 1e-9
        if not feas.any():
            continue  # grid too coarse to judge optimality
        gmin = float(np.min(np.einsum("ij,ij->i", G[feas], G[feas])))
        assert u is not None, "program declared empty but the grid found points"
        assert float(u @ u) <= gmin + 1e-9
        checked += 1


def test_min_norm_constraint_slack(rng, linear_spec):
    params = control.resolve_params(linear_spec)
    for _ in range(100):
        x = rng.uniform(-1.3, 1.3, size=2)
        if np.linalg.norm(x) < 0.05:
            continue
        u = control.min_norm_qp(linear_spec, x, params)
        a0, a, b0, b = compat.lie_rows(linear_spec, x)
        assert a0 + float(a @ u) <= -params.c_v * linear_spec.V(x) + 1e-9
        if linear_spec.h(x) <= params.band:
            assert b0 + float(b @ u) >= params.kappa - 1e-9


# ---------------------------------------------------------------------------
# blended law


def test_blend_weight_shape():
    r0, r1 = 0.25, 0.5
    assert control.bump_weight(0.1, r0, r1) == 1.0
    assert control.bump_weight(0.25, r0, r1) == 1.0
    assert control.bump_weight(0.5, r0, r1) == 0.0
    assert control.bump_weight(0.9, r0, r1) == 0.0
    assert control.bump_weight(0.375, r0, r1) == pytest.approx(0.5, abs=1e-15)
    samples = [control.bump_weight(s, r0, r1) for s in np.linspace(0.0, 0.7, 200)]
    assert all(b <= a + 1e-15 for a, b in zip(samples, samples[1:]))


def test_blended_regions(linear_spec):
    params = control.resolve_params(linear_spec)
    x_in = np.array([0.1, -0.05])
    assert np.array_equal(control.blended(linear_spec, x_in, params), params.K @ x_in)
    x_out = np.array([0.9, 0.2])
    assert np.allclose(
        control.blended(linear_spec, x_out, params),
        control.min_norm_qp(linear_spec, x_out, params),
    )


def test_blended_continuity_across_radii(linear_spec):
    params = control.resolve_params(linear_spec)
    for s in (params.r0, params.r1):
        d = np.array([0.6, 0.8])
        lo = control.blended(linear_spec, (s - 1e-7) * d, params)
        hi = control.blended(linear_spec, (s + 1e-7) * d, params)
        assert float(np.max(np.abs(hi - lo))) <= 1e-5


def test_blended_rejects_bad_gain(linear_spec):
    params = control.resolve_params(linear_spec)
    params.K = np.eye(2)  # destabilizing
    params._blend_validated = False
    with pytest.raises(model.ConfigError, match="linearization"):
        control.blended(linear_spec, [0.1, 0.1], params)


def test_blended_rejects_radius_outside_safe_set(linear_spec):
    params = control.resolve_params(linear_spec, r0=0.8, r1=1.2)
    with pytest.raises(model.ConfigError, match="safe set"):
        control.blended(linear_spec, [0.1, 0.1], params)


# ---------------------------------------------------------------------------
# closed-loop simulation


def test_simulate_sontag_from_inside(linear_spec):
    sim = control.simulate_closed_loop(linear_spec, "sontag", [0.9, 0.0], 10.0)
    assert sim.min_h >= 0.19 - 1e-9
    assert sim.final_norm <= 1e-4
    assert sim.max_V_increase <= 1e-12
    assert sim.decay_slope == pytest.approx(-1.0, abs=1e-3)


def test_simulate_boundary_start_pushes_inward(linear_spec):
    sim = control.simulate_closed_loop(linear_spec, "min_norm_qp", [1.0, 0.0], 20.0)
    assert sim.min_h >= -1e-9
    assert not sim.infeasible


def test_simulate_equilibrium_is_stationary(linear_spec):
    sim = control.simulate_closed_loop(linear_spec, "sontag", [0.0, 0.0], 5.0)
    assert sim.final_norm == 0.0
    assert np.max(np.abs(sim.states)) == 0.0


def test_simulate_reports_infeasibility(double_integrator_spec):
    sim = control.simulate_closed_loop(double_integrator_spec, "min_norm_qp", [1.0, 0.0], 5.0)
    assert sim.infeasible
    assert sim.infeasible_record is not None


def test_simulate_external_mode(polar_spec):
    sim = control.simulate_closed_loop(polar_spec, None, [0.5, 0.3], 2.0)
    assert sim.min_h >= 0.0
    assert sim.controls is None


def test_safety_invariance_sampled(linear_spec, rng):
    worst = 0.0
    for _ in range(25):
        ang = rng.uniform(0, 2 * np.pi)
        rad = np.sqrt(rng.uniform(0, 1))
        sim = control.simulate_closed_loop(
            linear_spec, "min_norm_qp", [rad * np.cos(ang), rad * np.sin(ang)], 4.0
        )
        worst = min(worst, sim.min_h)
    assert worst >= -1e-6
