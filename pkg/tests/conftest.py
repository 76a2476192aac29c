"""Shared fixtures and oracles for the test suite."""

import numpy as np
import pytest

from sparsact.model import GeneralizedPlant, validate_plant

SCALAR = dict(A=[[1.0]], Bu=[[1.0]], Bw=[[1.0]], Cz=[[1.0]],
              Du=[[0.0]], Dw=[[0.0]], Cy=[[1.0]], Dyw=[[0.0]])


@pytest.fixture
def scalar_plant():
    """A=Bu=Bw=Cz=Cy=1: optimal designs known in closed form."""
    return GeneralizedPlant(**SCALAR)


@pytest.fixture
def dup_actuator_plant():
    """Scalar dynamics with two identical actuators."""
    return GeneralizedPlant(A=[[1.0]], Bu=[[1.0, 1.0]], Bw=[[1.0]],
                            Cz=[[1.0]], Du=[[0.0, 0.0]], Dw=[[0.0]],
                            Cy=[[1.0]], Dyw=[[0.0]])


@pytest.fixture
def dup_sensor_plant():
    """Stable two-state plant measured twice by the same sensor."""
    return GeneralizedPlant(
        A=[[-1.0, 0.2], [0.0, -0.5]], Bu=[[1.0], [0.5]], Bw=[[1.0], [0.3]],
        Cz=[[1.0, 0.0], [0.0, 0.0]], Du=[[0.0], [0.1]], Dw=[[0.0], [0.0]],
        Cy=[[1.0, 0.0], [1.0, 0.0]], Dyw=[[0.0], [0.0]])


def random_plant(rng, nx=3, nu=2, nw=2, nz=2, ny=2, stable_margin=0.5,
                 dw_zero=True):
    """Random well-posed plant; A shifted to a guaranteed stability margin."""
    for _ in range(50):
        A = rng.standard_normal((nx, nx))
        if stable_margin is not None:
            shift = np.max(np.linalg.eigvals(A).real) + stable_margin
            A = A - shift * np.eye(nx)
        plant = GeneralizedPlant(
            A=A,
            Bu=rng.standard_normal((nx, nu)),
            Bw=rng.standard_normal((nx, nw)),
            Cz=rng.standard_normal((nz, nx)),
            Du=0.3 * rng.standard_normal((nz, nu)),
            Dw=np.zeros((nz, nw)) if dw_zero else 0.1 * rng.standard_normal((nz, nw)),
            Cy=rng.standard_normal((ny, nx)),
            Dyw=np.zeros((ny, nw)))
        if not validate_plant(plant):
            return plant
    raise RuntimeError("could not generate a well-posed random plant")


def coupled_lyapunov_pair(rng, nx):
    """Random (X, Y) with [[X, I], [I, Y]] positive definite."""
    L = rng.standard_normal((nx, nx))
    X = L @ L.T + nx * np.eye(nx)
    P = rng.standard_normal((nx, nx))
    Y = np.linalg.inv(X) + P @ P.T + 0.5 * np.eye(nx)
    return X, 0.5 * (Y + Y.T)
