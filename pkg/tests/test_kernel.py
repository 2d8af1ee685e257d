"""Tests for the propagation kernel."""
from __future__ import annotations

import numpy as np
import pytest

from scatline.errors import DomainError
from scatline.models import Interpolation, PotentialGrid, Propagation, Side, SolverOptions, StateVector, TransferMatrix
from scatline.services.kernel import (
    apply_transfer,
    apply_transfer_inverse,
    cell_propagator,
    line_propagator,
    propagate,
    propagator,
    wronskian,
)

from .conftest import expm_propagator

CELLS = [1.5, -0.5, 2.0, 0.75]


def test_cell_propagator_matches_matrix_exponential() -> None:
    q = PotentialGrid.from_cells(0.3, [2.0])
    lam = 3.0 + 1.0j
    assert np.allclose(cell_propagator(lam, 2.0, 0.6), expm_propagator(q, lam, -0.3, 0.3), atol=1e-12)


def test_cell_propagator_at_turning_point() -> None:
    p = cell_propagator(np.array([2.0]), 2.0, 0.5)[0]
    assert np.allclose(p, [[1.0, 0.5], [0.0, 1.0]])


def test_exact_and_runge_kutta_paths_agree() -> None:
    q = PotentialGrid.from_cells(1.0, CELLS)
    lam = 5.0 + 0.5j
    exact = propagator(q, lam, -1.0, 0.0, SolverOptions(method=Propagation.EXACT))
    rk = propagator(q, lam, -1.0, 0.0, SolverOptions(rtol=1e-12, atol=1e-12, method=Propagation.RK))
    assert np.allclose(exact, rk, atol=1e-8)
    assert np.allclose(exact, expm_propagator(q, lam, -1.0, 0.0), atol=1e-12)


def test_propagator_has_unit_determinant() -> None:
    q = PotentialGrid.from_cells(1.0, CELLS)
    lams = np.array([-4.0, 0.0, 2.5, 30.0 + 2.0j])
    p = propagator(q, lams, 0.0, 1.0)
    assert np.allclose(np.linalg.det(p), 1.0, atol=1e-10)


def test_backward_propagation_inverts_forward() -> None:
    q = PotentialGrid.from_cells(1.0, CELLS)
    forward = propagator(q, 7.0, 0.0, 1.0)
    backward = propagator(q, 7.0, 1.0, 0.0)
    assert np.allclose(backward @ forward, np.eye(2), atol=1e-12)


def test_propagator_rejects_straddling_interval() -> None:
    q = PotentialGrid.zero(1.0)
    with pytest.raises(DomainError):
        propagator(q, 1.0, -0.5, 0.5)


def test_exact_method_needs_constant_cells() -> None:
    q = PotentialGrid(1.0, [-1.0, 0.0, 1.0], [0.0, 1.0, 0.0], Interpolation.LINEAR)
    with pytest.raises(DomainError):
        propagator(q, 1.0, 0.0, 1.0, SolverOptions(method="exact"))


def test_line_propagator_applies_transfer_at_origin() -> None:
    q = PotentialGrid.from_cells(1.0, CELLS)
    matrix = TransferMatrix(2.0, 0.3, 0.0, 0.5)
    lam = 4.0
    expected = expm_propagator(q, lam, 0.0, 0.5) @ matrix.as_array() @ expm_propagator(q, lam, -0.5, 0.0)
    assert np.allclose(line_propagator(q, matrix, lam, -0.5, 0.5), expected, atol=1e-12)
    back = line_propagator(q, matrix, lam, 0.5, -0.5)
    assert np.allclose(back @ expected, np.eye(2), atol=1e-12)


def test_transfer_preserves_wronskian() -> None:
    q = PotentialGrid.from_cells(1.0, CELLS)
    matrix = TransferMatrix(1.0, 1.0, -0.25, 0.75)
    zeta = 1.3 + 0.2j
    u = propagate(q, zeta, -1.0, 0.0, StateVector(1.0, 0.0, -1.0, zeta))
    v = propagate(q, zeta, -1.0, 0.0, StateVector(0.0, 1.0, -1.0, zeta))
    before = wronskian(u, v)
    u_plus, v_plus = apply_transfer(matrix, u), apply_transfer(matrix, v)
    assert u_plus.side is Side.PLUS
    assert wronskian(u_plus, v_plus) == pytest.approx(before, abs=1e-12)
    assert apply_transfer_inverse(matrix, u_plus).as_array() == pytest.approx(u.as_array())


def test_transfer_requires_state_at_origin() -> None:
    state = StateVector(1.0, 0.0, 0.5, 1.0, Side.PLUS)
    with pytest.raises(DomainError):
        apply_transfer(TransferMatrix.identity(), state)


def test_propagate_checks_start_point() -> None:
    q = PotentialGrid.zero(1.0)
    with pytest.raises(DomainError):
        propagate(q, 1.0, -1.0, -0.5, StateVector(1.0, 0.0, -0.9, 1.0))


def test_thread_count_does_not_change_results() -> None:
    q = PotentialGrid(1.0, [-1.0, 0.0, 1.0], [0.0, 1.0, 0.0], Interpolation.LINEAR)
    lams = np.linspace(1.0, 20.0, 6)
    one = propagator(q, lams, 0.0, 1.0, SolverOptions(threads=1))
    many = propagator(q, lams, 0.0, 1.0, SolverOptions(threads=3))
    assert np.array_equal(one, many)


def test_free_plane_wave_propagation() -> None:
    q = PotentialGrid.zero(3.0)
    out = propagate(q, 1.0, 0.0, 3.0, StateVector(1.0, 1j, 0.0, 1.0, Side.PLUS))
    assert out.y == pytest.approx(np.exp(3j), abs=1e-10)
    assert out.yp == pytest.approx(1j * np.exp(3j), abs=1e-10)
    assert out.side is Side.PLUS


def test_free_decaying_propagation_to_the_left() -> None:
    q = PotentialGrid.zero(1.0)
    out = propagate(q, 2j, 0.0, -1.0, StateVector(1.0, -2.0, 0.0, 2j, Side.MINUS))
    assert out.y == pytest.approx(np.exp(2.0), rel=1e-10)
    assert out.yp == pytest.approx(-2 * np.exp(2.0), rel=1e-10)


def test_wronskian_of_plane_waves() -> None:
    zeta, x = 1.7 + 0.4j, 0.3
    u = StateVector(np.exp(1j * zeta * x), 1j * zeta * np.exp(1j * zeta * x), x, zeta)
    v = StateVector(np.exp(-1j * zeta * x), -1j * zeta * np.exp(-1j * zeta * x), x, zeta)
    assert wronskian(u, v) == pytest.approx(-2j * zeta, abs=1e-12)


def test_wronskian_is_constant_along_interval() -> None:
    q = PotentialGrid.from_cells(1.0, CELLS)
    zeta = 1.3 + 0.2j
    u0 = StateVector(1.0, 0.0, -1.0, zeta)
    v0 = StateVector(0.0, 1.0, -1.0, zeta)
    for x in (-0.9, -0.6, -0.3, -0.05):
        u = propagate(q, zeta, -1.0, x, u0)
        v = propagate(q, zeta, -1.0, x, v0)
        assert wronskian(u, v) == pytest.approx(1.0, abs=1e-10)


def test_conjugate_data_give_conjugate_solutions() -> None:
    q = PotentialGrid(1.0, [-1.0, -0.5, 0.0], [0.0, 2.0, 1.0], Interpolation.LINEAR)
    zeta = 2.5
    u = propagate(q, zeta, -1.0, -0.2, StateVector(1.0, 1j * zeta, -1.0, zeta))
    v = propagate(q, -zeta, -1.0, -0.2, StateVector(1.0, -1j * zeta, -1.0, -zeta))
    assert v.y == pytest.approx(np.conj(u.y), abs=1e-9)
    assert v.yp == pytest.approx(np.conj(u.yp), abs=1e-9)
