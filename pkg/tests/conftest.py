import numpy as np
import pytest

from clbf_forge import clbf, control, model


@pytest.fixture(scope="session")
def linear_spec():
    return model.load_system(model.example_config("linear"))


@pytest.fixture(scope="session")
def polar_spec():
    return model.load_system(model.example_config("polar"))


@pytest.fixture(scope="session")
def double_integrator_spec():
    return model.load_system(model.example_config("double_integrator"))


@pytest.fixture(scope="session")
def linear_field(linear_spec):
    # sontag on the quadratic V reduces to u = -x, so the closed loop is -x
    return control.closed_loop_field(linear_spec, "sontag")


@pytest.fixture(scope="session")
def polar_field(polar_spec):
    return polar_spec.external_field()


@pytest.fixture(scope="session")
def linear_clbf(linear_spec):
    return clbf.ClbfEvaluator(linear_spec)


@pytest.fixture(scope="session")
def polar_clbf(polar_spec):
    return clbf.ClbfEvaluator(polar_spec)


def polar_T_exact(r):
    """Closed-form hitting time of the polar reference flow."""
    return (1.0 - 1.0 / r**2) / 2.0


def polar_theta_shift_exact(r):
    """Closed-form angular drift accumulated until the boundary hit."""
    return 0.4 * (1.0 - r ** (-2.5))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
