import numpy as np
import pytest

from fieldlab import (RadialProfile, TailModel, aux_problem_nonlinearity,
                      build_envelope, default_p0, make_power_nonlinearity,
                      solution_family)


@pytest.fixture(scope="session")
def cubic3():
    return make_power_nonlinearity(1.0, 3.0, 3)


@pytest.fixture(scope="session")
def cubic2():
    return make_power_nonlinearity(1.0, 3.0, 2)


@pytest.fixture(scope="session")
def family3(cubic3):
    return solution_family(cubic3, 3, 5)


@pytest.fixture(scope="session")
def family2(cubic2):
    return solution_family(cubic2, 2, 2)


@pytest.fixture(scope="session")
def family4():
    nl = make_power_nonlinearity(1.0, 2.5, 4)
    return nl, solution_family(nl, 4, 3, scan_limit=2e3)


@pytest.fixture(scope="session")
def envelope3(cubic3):
    return build_envelope(cubic3, default_p0(3), np.linspace(0.0, 10.0, 10001))


@pytest.fixture(scope="session")
def aux_ground(cubic3):
    """Dense envelope, auxiliary nonlinearity, and its ground state."""
    env = build_envelope(cubic3, default_p0(3), np.linspace(0.0, 12.0, 120001))
    aux = aux_problem_nonlinearity(env, 1.0)
    profile = solution_family(aux, 3, 1)[0]
    return env, aux, profile


def gaussian_profile(n_dim, r_max=8.0, points=4001):
    """Non-solution fixture u(r) = exp(-r^2) with a formally attached tail."""
    assert n_dim in (2, 3)
    r = np.linspace(0.0, r_max, points)
    v = np.exp(-r ** 2)
    w = -2.0 * r * v
    nu = (n_dim - 1) / 2.0
    tail = TailModel(match_radius=r_max,
                     amplitude=float(v[-1] * r_max ** nu * np.exp(r_max)),
                     decay_rate=1.0, algebraic_power=nu)
    nl = make_power_nonlinearity(1.0, 3.0, n_dim)
    return RadialProfile(dimension=n_dim, radii=r, values=v, derivs=w,
                         node_count=0, shoot_height=1.0, tail=tail,
                         f_id=dict(nl.descriptor), source_f=nl)


@pytest.fixture
def gaussian3():
    return gaussian_profile(3)
