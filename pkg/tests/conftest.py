"""Shared fixtures and independent oracles for the test suite."""
from __future__ import annotations

import numpy as np
import pytest
from scipy.linalg import expm
from scipy.optimize import brentq

from scatline import create_app
from scatline.models import Interpolation, PotentialGrid, TransferMatrix


def bump(x):
    x = np.asarray(x, dtype=float)
    return np.where(np.abs(x) < 1, (1 - x ** 2) ** 2, 0.0)


def other_bump(x):
    x = np.asarray(x, dtype=float)
    return np.where(np.abs(x) < 1, 0.5 * (1 - x ** 2) ** 3 * (1 + 0.5 * x), 0.0)


def expm_propagator(q: PotentialGrid, lam: complex, a: float, b: float) -> np.ndarray:
    """Product of matrix exponentials over the constant cells between ``a`` and ``b``."""
    edges = np.concatenate(([a], q.breakpoints(a, b), [b]))
    total = np.eye(2, dtype=complex)
    for x0, x1 in zip(edges[:-1], edges[1:]):
        qval = q(0.5 * (x0 + x1))
        gen = np.array([[0, 1], [qval - lam, 0]], dtype=complex)
        total = expm(gen * (x1 - x0)) @ total
    return total


def free_AB(matrix: TransferMatrix, xi):
    """Closed-form coefficients for ``q = 0``."""
    xi = np.asarray(xi, dtype=float)
    a = matrix.trace / 2 - 1j * xi * matrix.m12 / 2 + 1j * matrix.m21 / (2 * xi)
    b = (matrix.m22 - matrix.m11) / 2 + 1j * xi * matrix.m12 / 2 - matrix.m21 / (2j * xi)
    return a, b


def square_well_etas(depth: float, half_width: float) -> np.ndarray:
    """Bound-state ``eta`` of ``q = -depth`` on ``[-a, a]`` from the even and odd conditions."""
    top = np.sqrt(depth)

    def even(eta):
        k = np.sqrt(depth - eta ** 2)
        return k * np.sin(k * half_width) - eta * np.cos(k * half_width)

    def odd(eta):
        k = np.sqrt(depth - eta ** 2)
        return k * np.cos(k * half_width) + eta * np.sin(k * half_width)

    grid = np.linspace(1e-9, top - 1e-9, 4001)
    roots = []
    for fn in (even, odd):
        values = fn(grid)
        for i in np.flatnonzero(values[:-1] * values[1:] < 0):
            roots.append(brentq(fn, grid[i], grid[i + 1], xtol=1e-14))
    return np.sort(roots)


@pytest.fixture
def app():
    return create_app({"TESTING": True, "LOG_LEVEL": "WARNING"})


@pytest.fixture
def runner(app):
    return app.test_cli_runner()


@pytest.fixture
def invoke(runner):
    def _invoke(*args):
        return runner.invoke(args=[str(a) for a in args])
    return _invoke


@pytest.fixture
def bump_grid() -> PotentialGrid:
    return PotentialGrid.from_function(bump, 1.0, 200, Interpolation.CONSTANT)


@pytest.fixture
def other_bump_grid() -> PotentialGrid:
    return PotentialGrid.from_function(other_bump, 1.0, 200, Interpolation.CONSTANT)


@pytest.fixture
def free_grid() -> PotentialGrid:
    return PotentialGrid.zero(1.0)


@pytest.fixture
def diag_matrix() -> TransferMatrix:
    return TransferMatrix(2.0, 0.0, 0.0, 0.5)


@pytest.fixture
def shear_matrix() -> TransferMatrix:
    return TransferMatrix(1.0, 1.0, 0.0, 1.0)


@pytest.fixture
def mixed_xi() -> np.ndarray:
    """Positive grid, log-spaced near 0 and uniform up to 200."""
    return np.unique(np.concatenate((np.geomspace(1e-4, 1.0, 400), np.linspace(1.0, 200.0, 4000))))
