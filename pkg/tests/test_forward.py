"""Tests for forward scattering with a point transfer condition."""
from __future__ import annotations

import numpy as np
import pytest

from scatline.errors import DomainError
from scatline.models import PotentialGrid, Propagation, SolverOptions, TransferMatrix
from scatline.services.forward import (
    asymptotic_AB_check,
    bound_states,
    continued_AB,
    jost_minus_M,
    jost_plus_M,
    jost_wronskian,
    reflection,
    scattering_AB,
    scattering_coefficients,
    unitarity,
)

from .conftest import free_AB, square_well_etas


def test_free_diagonal_coefficients(free_grid, diag_matrix) -> None:
    a, b = scattering_AB(free_grid, diag_matrix, 3.0)
    assert a == pytest.approx(1.25, abs=1e-12)
    assert b == pytest.approx(-0.75, abs=1e-12)


def test_free_shear_coefficients(free_grid, shear_matrix) -> None:
    a, b = scattering_AB(free_grid, shear_matrix, 2.0)
    assert a == pytest.approx(1 - 1j, abs=1e-12)
    assert b == pytest.approx(1j, abs=1e-12)


def test_free_coefficients_match_closed_form(free_grid) -> None:
    matrix = TransferMatrix(1.5, 0.4, -0.3, 0.586666666666666666)
    xi = np.linspace(0.1, 30.0, 50)
    a, b = scattering_coefficients(free_grid, matrix, xi)
    a_ref, b_ref = free_AB(matrix, xi)
    assert np.allclose(a, a_ref, atol=1e-10)
    assert np.allclose(b, b_ref, atol=1e-10)


def test_jost_solutions_are_plane_waves_for_zero_potential(free_grid) -> None:
    xs = np.linspace(0.05, 2.0, 9)
    zeta = 1.7
    plus = jost_plus_M(free_grid, TransferMatrix.identity(), zeta, xs)
    minus = jost_minus_M(free_grid, TransferMatrix.identity(), zeta, -xs)
    assert np.allclose(plus.y, np.exp(1j * zeta * xs), atol=1e-12)
    assert np.allclose(plus.yp, 1j * zeta * np.exp(1j * zeta * xs), atol=1e-12)
    assert np.allclose(minus.y, np.exp(1j * zeta * xs), atol=1e-12)


def test_jost_rejects_lower_half_plane(free_grid) -> None:
    with pytest.raises(DomainError):
        jost_plus_M(free_grid, TransferMatrix.identity(), 1.0 - 0.5j, [0.0])


def test_zero_frequency_is_rejected(free_grid) -> None:
    with pytest.raises(DomainError):
        scattering_coefficients(free_grid, TransferMatrix.identity(), [0.0, 1.0])


def test_unitarity_for_bump_and_general_matrix(bump_grid) -> None:
    xi = np.linspace(0.05, 60.0, 200)
    for matrix in (TransferMatrix.identity(), TransferMatrix(1.2, 0.7, -0.4, 0.6)):
        report = unitarity(bump_grid, matrix, xi)
        assert report.max_residual <= 1e-8
        assert report.conjugation_residual <= 1e-8


def test_reflection_is_bounded_by_one(bump_grid, diag_matrix) -> None:
    sd = reflection(bump_grid, diag_matrix, np.linspace(0.1, 40.0, 100))
    assert np.all(np.abs(sd.R) < 1)
    assert sd.has_coefficients
    assert sd.support == 1.0
    assert np.allclose(sd.R, sd.B / sd.A)


def test_delta_interaction_bound_state(free_grid) -> None:
    attractive = TransferMatrix(1.0, 0.0, -1.0, 1.0)
    etas = bound_states(free_grid, attractive, 2.0)
    assert etas == pytest.approx([0.5], abs=1e-8)
    a, _ = continued_AB(free_grid, attractive, np.array([0.5j]))
    assert abs(a[0]) < 1e-8
    assert jost_wronskian(free_grid, attractive, np.array([0.5]))[0] == pytest.approx(0.0, abs=1e-10)


def test_repulsive_interaction_has_no_bound_state(free_grid) -> None:
    assert bound_states(free_grid, TransferMatrix(1.0, 0.0, 1.0, 1.0), 3.0).size == 0


def test_square_well_bound_states() -> None:
    well = PotentialGrid.from_cells(1.0, [-4.0])
    expected = square_well_etas(4.0, 1.0)
    etas = bound_states(well, TransferMatrix.identity(), 2.5)
    assert etas.size == expected.size == 2
    assert np.allclose(etas, expected, atol=1e-8)


def test_reflection_reports_bound_states(free_grid) -> None:
    sd = reflection(free_grid, TransferMatrix(1.0, 0.0, -1.0, 1.0), np.linspace(0.5, 5.0, 10), eta_max=2.0)
    assert sd.etas == pytest.approx([0.5], abs=1e-8)


def test_asymptotic_check_is_exact_for_zero_potential(free_grid, diag_matrix, shear_matrix) -> None:
    xi = np.linspace(50.0, 200.0, 50)
    for matrix in (diag_matrix, shear_matrix, TransferMatrix.identity()):
        a_res, b_res = asymptotic_AB_check(free_grid, matrix, xi)
        assert a_res.diagnostics["slope"] == "exact"
        assert b_res.diagnostics["slope"] == "exact"


def test_asymptotic_check_decay_for_bump(bump_grid) -> None:
    a_res, _ = asymptotic_AB_check(bump_grid, TransferMatrix.identity(), np.linspace(50.0, 500.0, 400))
    assert a_res.diagnostics["slope"] <= -0.9


def test_asymptotic_check_needs_large_frequencies(free_grid) -> None:
    with pytest.raises(DomainError):
        asymptotic_AB_check(free_grid, TransferMatrix.identity(), np.linspace(1.0, 10.0, 5))


def test_asymptotic_check_decay_for_cell_potential() -> None:
    cells = PotentialGrid.from_cells(1.0, [1.5, -0.5, 2.0, 0.75])
    a_res, b_res = asymptotic_AB_check(cells, TransferMatrix.identity(), np.linspace(50.0, 500.0, 400))
    assert a_res.diagnostics["slope"] <= -0.9
    assert b_res.diagnostics["slope"] <= -0.9


def test_coefficients_are_conjugate_under_frequency_reversal(bump_grid) -> None:
    matrix = TransferMatrix(1.2, 0.7, -0.4, 0.6)
    xi = np.linspace(0.1, 30.0, 40)
    a, b = scattering_coefficients(bump_grid, matrix, xi)
    a_neg, b_neg = scattering_coefficients(bump_grid, matrix, -xi)
    assert np.allclose(a_neg, np.conj(a), atol=1e-10)
    assert np.allclose(b_neg, np.conj(b), atol=1e-10)


def test_bound_states_stable_under_tolerance_refinement() -> None:
    well = PotentialGrid.from_cells(1.0, [-4.0])
    coarse = bound_states(well, TransferMatrix.identity(), 2.5, step=0.01,
                          opts=SolverOptions(rtol=1e-9, atol=1e-9, method=Propagation.RK))
    fine = bound_states(well, TransferMatrix.identity(), 2.5, step=0.01,
                        opts=SolverOptions(rtol=1e-10, atol=1e-10, method=Propagation.RK))
    assert coarse.size == fine.size == 2
    assert np.allclose(coarse, fine, atol=1e-8)
    assert np.allclose(fine, square_well_etas(4.0, 1.0), atol=1e-7)
