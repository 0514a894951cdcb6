"""Shared fixtures: small, fast problem instances used across the test suite."""

import numpy as np
import pytest

from adaptive_langevin import (
    constant_monitor,
    harmonic,
    modified_harmonic,
    monitor_g3,
)


@pytest.fixture(scope="session")
def sharp_well():
    """Modified harmonic well with a sharp high-frequency core (omega(x0) = 10)."""
    return modified_harmonic(a=10.0, b=0.1, c=0.1, x0=0.5)


@pytest.fixture(scope="session")
def mild_well():
    """Milder modified harmonic well (omega(x0) = 2.75)."""
    return modified_harmonic(a=2.75, b=0.1, c=0.1, x0=0.5)


@pytest.fixture(scope="session")
def sharp_monitor(sharp_well):
    return monitor_g3(sharp_well, m=0.001, Mcap=2.0, r=1.0, alpha=1)


@pytest.fixture(scope="session")
def mild_monitor(mild_well):
    return monitor_g3(mild_well, m=0.1, Mcap=1.1, r=1.0, alpha=1)


@pytest.fixture(scope="session")
def unit_harmonic():
    return harmonic(k=1.0)


@pytest.fixture(scope="session")
def unit_monitor():
    return constant_monitor(1.0)


def finite_difference_grad(f, x, eps=1e-6):
    """Central-difference gradient of a batched scalar function at points x."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    g = np.zeros_like(x)
    for j in range(x.shape[1]):
        xp = x.copy()
        xm = x.copy()
        xp[:, j] += eps
        xm[:, j] -= eps
        g[:, j] = (f(xp) - f(xm)) / (2 * eps)
    return g
