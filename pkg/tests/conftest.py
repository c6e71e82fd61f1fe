import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from se3nmpc import (OcpSpec, QuadrotorParams, RigidState, hover_equilibrium)


@pytest.fixture(scope="session")
def quad():
    return QuadrotorParams()


@pytest.fixture(scope="session")
def body(quad):
    return quad.body


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_rotations(n, seed=0):
    return Rotation.random(n, random_state=np.random.RandomState(seed)).as_matrix()


def random_state(rng, v_scale=2.0, omega_scale=2.0):
    R = Rotation.random(random_state=np.random.RandomState(rng.integers(2**31))).as_matrix()
    return RigidState(
        R=R,
        xi=rng.normal(scale=3.0, size=3),
        omega=rng.normal(scale=omega_scale, size=3),
        v=rng.normal(scale=v_scale, size=3),
    )


def make_spec(body, horizon=40, dt=0.01, zeta=1.0, xi_e=(0.0, 0.0, 4.0), **kw):
    return OcpSpec(horizon=horizon, dt=dt, zeta=zeta,
                   equilibrium=hover_equilibrium(body, xi_e),
                   rotor_bounds=kw.pop("rotor_bounds", (0.0, 12.3)), **kw)
