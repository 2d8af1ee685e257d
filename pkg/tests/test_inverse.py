"""Tests for transfer-matrix reconstruction and the dispersion formula."""
from __future__ import annotations

import numpy as np
import pytest

from scatline.errors import DomainError, NumericalError
from scatline.models import (
    Interpolation,
    MatrixCase,
    MReconstruction,
    PotentialGrid,
    ScatteringData,
    TransferMatrix,
)
from scatline.services.forward import continued_AB, reflection
from scatline.services.inverse import (
    DispersionQuadrature,
    blaschke,
    classify_case,
    continue_ratios,
    dispersion_A,
    dispersion_A_boundary,
    estimate_C1,
    estimate_C2,
    estimate_K,
    fold_grid,
    invert,
    reconstruct_B,
    reconstruct_M_diag,
    reconstruct_M_offdiag,
)

WIDE = np.linspace(0.1, 100.0, 500)
LONG = np.linspace(0.5, 1000.0, 4000)


def constant_data(value: float, etas=()) -> ScatteringData:
    return ScatteringData(WIDE, np.full(WIDE.size, value, dtype=complex), etas)


def test_fold_grid_mirrors_one_sided_data() -> None:
    sd = ScatteringData([1.0, 2.0], [0.1 + 0.2j, 0.3j])
    xi, r = fold_grid(sd)
    assert np.allclose(xi, [-2.0, -1.0, 1.0, 2.0])
    assert np.allclose(r, [-0.3j, 0.1 - 0.2j, 0.1 + 0.2j, 0.3j])


def test_zero_reflection_is_diagonal_identity() -> None:
    sd = constant_data(0.0)
    assert classify_case(sd) is MatrixCase.DIAG
    mrec = invert(sd)
    assert mrec.C2 == pytest.approx(0.0, abs=1e-12)
    first, second = mrec.branches
    assert (first.m11, first.m22) == pytest.approx((1.0, 1.0))
    assert (second.m11, second.m22) == pytest.approx((-1.0, -1.0))


def test_diagonal_limit_from_forward_data(free_grid, diag_matrix) -> None:
    sd = reflection(free_grid, diag_matrix, WIDE)
    assert estimate_C2(sd) == pytest.approx(-0.6, abs=1e-10)
    branch = invert(sd).branch
    assert (branch.m11, branch.m22) == pytest.approx((2.0, 0.5), abs=1e-9)


def test_inconclusive_tail_is_reported() -> None:
    with pytest.raises(NumericalError):
        classify_case(constant_data(-0.95))


def test_short_grid_cannot_be_classified() -> None:
    sd = ScatteringData(np.linspace(0.1, 20.0, 50), np.zeros(50))
    with pytest.raises(DomainError):
        classify_case(sd)


def test_shear_is_offdiagonal_and_recovered(free_grid, shear_matrix) -> None:
    sd = reflection(free_grid, shear_matrix, LONG)
    assert classify_case(sd) is MatrixCase.OFFDIAG
    assert estimate_C1(sd) == pytest.approx(1.0, abs=1e-6)
    kfit = estimate_K(sd)
    assert kfit.K1 == pytest.approx(1.0, abs=1e-8)
    assert kfit.K2 == pytest.approx(4.0, abs=1e-3)
    mrec = invert(sd)
    assert mrec.case is MatrixCase.OFFDIAG
    assert mrec.branch.to_matrix().as_array() == pytest.approx(shear_matrix.as_array(), abs=1e-3)


def test_rotation_matrix_intercept_is_two(free_grid) -> None:
    rotation = TransferMatrix(0.0, 1.0, -1.0, 0.0)
    sd = reflection(free_grid, rotation, np.linspace(0.5, 200.0, 2000))
    assert estimate_K(sd).K2 == pytest.approx(2.0, abs=1e-3)
    branch = invert(sd).branch
    assert (branch.m12, branch.m21) == pytest.approx((1.0, -1.0), abs=1e-2)
    assert abs(branch.m11) < 0.05
    assert abs(branch.m22) < 1e-2


def test_synthetic_K_fit() -> None:
    xi = np.linspace(1.0, 100.0, 300)
    r = np.sqrt(1.0 - 4.0 / (9.0 * xi ** 2 + 16.0))
    kfit = estimate_K(ScatteringData(xi, r))
    assert kfit.K1 == pytest.approx(9.0, rel=1e-9)
    assert kfit.K2 == pytest.approx(16.0, rel=1e-6)


def test_offdiag_reconstruction_from_trace_square() -> None:
    mrec = reconstruct_M_offdiag(1.0, 1.0, 4.0)
    matrices = [b.to_matrix().as_array() for b in mrec.branches]
    assert any(np.allclose(m, [[1.0, 1.0], [0.0, 1.0]]) for m in matrices)
    assert all(abs(np.linalg.det(m) - 1.0) < 1e-12 for m in matrices)


def test_offdiag_reconstruction_rotation_family() -> None:
    mrec = reconstruct_M_offdiag(0.0, 1.0, 0.0)
    assert len(mrec.branches) == 2
    m21s = sorted(b.m21 for b in mrec.branches)
    assert m21s == pytest.approx([-1.0, 1.0])
    assert all(b.m22 == 0.0 and b.m11 == 0.0 for b in mrec.branches)


def test_offdiag_reconstruction_rejects_bad_slope() -> None:
    with pytest.raises(DomainError):
        reconstruct_M_offdiag(1.0, -1.0, 4.0)


def test_reconstruct_diag_rejects_large_limit() -> None:
    with pytest.raises(DomainError):
        reconstruct_M_diag(1.0)


def test_blaschke_product() -> None:
    assert blaschke([1.0], 2j) == pytest.approx(1 / 3)
    assert blaschke([], 1.0 + 1j) == pytest.approx(1.0)
    on_axis = blaschke([0.5, 2.0], np.linspace(-5.0, 5.0, 11))
    assert np.allclose(np.abs(on_axis), 1.0)
    with pytest.raises(DomainError):
        blaschke([1.0], -1j)


def test_quadrature_of_constant_is_zero() -> None:
    xi = np.linspace(-5.0, 5.0, 101)
    rule = DispersionQuadrature(xi, np.zeros(xi.size))
    assert np.allclose(rule.integral([1j, 2.0 + 0.5j]), 0.0)


def test_quadrature_matches_lorentzian() -> None:
    # int dx / ((1 + x^2)(x - z)) = -pi / (z + i) for Im z > 0
    xi = np.concatenate((-np.geomspace(2000.0, 1e-3, 6000), np.geomspace(1e-3, 2000.0, 6000)))
    phi = 1.0 / (1.0 + xi ** 2)
    z = np.array([2j, 1.0 + 1j])
    expected = -np.pi / (z + 1j)
    assert np.allclose(DispersionQuadrature(xi, phi).integral(z), expected, atol=1e-4)


def test_dispersion_with_zero_reflection_and_bound_state() -> None:
    sd = constant_data(0.0, etas=[1.0])
    mrec = reconstruct_M_diag(0.0)
    assert dispersion_A(sd, mrec, 2j) == pytest.approx(1 / 3, abs=1e-10)


def test_dispersion_for_free_diagonal_matrix(free_grid, diag_matrix) -> None:
    sd = reflection(free_grid, diag_matrix, WIDE)
    mrec = invert(sd)
    assert dispersion_A(sd, mrec, 1.0 + 0.5j) == pytest.approx(1.25, abs=1e-9)
    a_trace = dispersion_A_boundary(sd, mrec, WIDE[:20])
    assert np.allclose(a_trace.values, 1.25, atol=1e-9)
    b_trace = reconstruct_B(sd, a_trace)
    assert np.allclose(b_trace.values, -0.75, atol=1e-9)
    assert not b_trace.diagnostics["inconsistent"]


def test_dispersion_matches_continued_coefficient(free_grid, mixed_xi) -> None:
    attractive = TransferMatrix(1.0, 0.0, -1.0, 1.0)
    sd = reflection(free_grid, attractive, mixed_xi, eta_max=2.0)
    assert sd.etas == pytest.approx([0.5], abs=1e-8)
    zeta = np.array([-3.0, -1.0, 0.5, 2.0]) + 1j
    expected, _ = continued_AB(free_grid, attractive, zeta)
    got = dispersion_A(sd, MReconstruction.from_matrix(attractive), zeta)
    assert np.allclose(got, expected, rtol=1e-3, atol=1e-3)


def test_dispersion_rejects_real_axis_and_families() -> None:
    sd = constant_data(0.0)
    with pytest.raises(DomainError):
        dispersion_A(sd, reconstruct_M_diag(0.0), 1.0)
    with pytest.raises(DomainError):
        dispersion_A(sd, reconstruct_M_offdiag(1.0), 1j)


def test_reconstruct_B_needs_grid_abscissae(free_grid, diag_matrix) -> None:
    sd = reflection(free_grid, diag_matrix, WIDE)
    a_trace = dispersion_A_boundary(sd, invert(sd), [0.123456])
    with pytest.raises(DomainError):
        reconstruct_B(sd, a_trace)


def test_tail_band_is_configurable() -> None:
    sd = constant_data(-0.95)
    assert classify_case(sd, diag_band=0.04) is MatrixCase.DIAG
    assert classify_case(sd, tail_tol=0.06) is MatrixCase.OFFDIAG
    assert invert(sd, diag_band=0.04).case is MatrixCase.DIAG
    with pytest.raises(DomainError):
        classify_case(sd, tail_tol=0.2, diag_band=0.1)


def test_bump_diagonal_limit(bump_grid, diag_matrix) -> None:
    sd = reflection(bump_grid, diag_matrix, np.linspace(0.5, 200.0, 2000))
    assert classify_case(sd) is MatrixCase.DIAG
    assert estimate_C2(sd) == pytest.approx(-0.6, abs=1e-3)
    branch = invert(sd).branch
    assert (branch.m11, branch.m22) == pytest.approx((2.0, 0.5), abs=1e-3)


def test_bump_offdiag_limit_carries_right_half_mean(bump_grid) -> None:
    # int_0^1 (1 - x^2)^2 dx = 8/15, half of it joins m22/m12 = 2
    matrix = TransferMatrix(1.0, 0.5, 0.0, 1.0)
    sd = reflection(bump_grid, matrix, np.linspace(0.5, 400.0, 4000))
    assert classify_case(sd) is MatrixCase.OFFDIAG
    assert estimate_C1(sd) == pytest.approx(2.0 + 4.0 / 15.0, abs=5e-2)


def test_bump_offdiag_limit_ignores_left_half() -> None:
    def left_bump(x):
        x = np.asarray(x, dtype=float)
        return np.where((x > -1) & (x < 0), 4 * (1 - (2 * x + 1) ** 2) ** 2, 0.0)

    q = PotentialGrid.from_function(left_bump, 1.0, 200, Interpolation.CONSTANT)
    sd = reflection(q, TransferMatrix(1.0, 0.5, 0.0, 1.0), np.linspace(0.5, 400.0, 4000))
    assert estimate_C1(sd) == pytest.approx(2.0, abs=5e-2)


def test_dispersion_matches_bump_coefficient(bump_grid, diag_matrix, mixed_xi) -> None:
    sd = reflection(bump_grid, diag_matrix, mixed_xi, eta_max=3.0)
    zeta = np.array([-3.0, -1.0, 0.5, 2.0]) + 1j
    expected, _ = continued_AB(bump_grid, diag_matrix, zeta)
    got = dispersion_A(sd, MReconstruction.from_matrix(diag_matrix), zeta)
    assert np.allclose(got, expected, rtol=1e-2)


def test_continued_ratios_for_free_diagonal_matrix(free_grid, diag_matrix) -> None:
    sd = reflection(free_grid, diag_matrix, np.linspace(0.01, 200.0, 20000))
    zeta = np.array([1j, 3j, 2.0 + 0.5j])
    ratios = continue_ratios(sd, MReconstruction.from_matrix(diag_matrix), zeta, 1.0)
    expected = 0.6 * np.exp(2j * zeta)
    assert np.allclose(ratios.A, 1.25, atol=1e-8)
    assert np.allclose(ratios.rho_plus, expected, atol=1e-4)
    assert np.allclose(ratios.rho_minus, expected, atol=1e-4)


def test_continued_ratios_match_bump_coefficients(bump_grid, diag_matrix) -> None:
    sd = reflection(bump_grid, diag_matrix, np.linspace(0.01, 200.0, 20000))
    zeta = np.array([0.5j, 2j, 1.0 + 0.5j])
    ratios = continue_ratios(sd, MReconstruction.from_matrix(diag_matrix), zeta, 1.0)
    a_plus, big_b_plus = continued_AB(bump_grid, diag_matrix, zeta)
    _, big_b_minus = continued_AB(bump_grid, diag_matrix, -zeta)
    phase = np.exp(2j * zeta)
    assert np.allclose(ratios.rho_plus, -big_b_plus * phase / a_plus, atol=1e-3)
    assert np.allclose(ratios.rho_minus, -big_b_minus * phase / a_plus, atol=1e-3)


def test_continued_ratios_reject_real_axis() -> None:
    sd = constant_data(0.0)
    with pytest.raises(DomainError):
        continue_ratios(sd, reconstruct_M_diag(0.0), 1.0, 1.0)
    with pytest.raises(DomainError):
        continue_ratios(sd, reconstruct_M_diag(0.0), 1j, 0.0)
