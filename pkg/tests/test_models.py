"""Tests for the domain types and error payloads."""
from __future__ import annotations

import numpy as np
import pytest

from scatline.errors import DomainError, NumericalError, ValidationError
from scatline.models import (
    EntryStatus,
    Interpolation,
    MatrixCase,
    MReconstruction,
    PotentialGrid,
    RunConfig,
    ScatteringData,
    SolverOptions,
    TransferMatrix,
)
from scatline.services.inverse import reconstruct_M_diag, reconstruct_M_offdiag


def test_transfer_matrix_rejects_non_unit_determinant() -> None:
    with pytest.raises(DomainError) as exc:
        TransferMatrix(2.0, 0.0, 0.0, 2.0)
    assert exc.value.fields["det"] == pytest.approx(4.0)


def test_transfer_matrix_inverse() -> None:
    m = TransferMatrix(1.0, 1.0, -0.5, 0.5)
    assert np.allclose(m.inverse().as_array() @ m.as_array(), np.eye(2))
    assert not m.is_diagonal_case()
    assert TransferMatrix.identity().is_diagonal_case()


def test_solver_options_validate() -> None:
    with pytest.raises(DomainError):
        SolverOptions(rtol=0.0)
    with pytest.raises(DomainError):
        SolverOptions(threads=0)
    assert SolverOptions(method="rk").method.value == "rk"


def test_potential_grid_evaluation() -> None:
    q = PotentialGrid.from_cells(1.0, [1.0, 2.0, 3.0, 4.0])
    assert q(-0.9) == 1.0
    assert q(0.0) == 3.0
    assert q(0.99) == 4.0
    assert q(1.5) == 0.0
    assert q(-1.5) == 0.0
    lin = PotentialGrid(1.0, [-1.0, 0.0, 1.0], [0.0, 2.0, 0.0], Interpolation.LINEAR)
    assert lin(0.5) == pytest.approx(1.0)


def test_potential_grid_rejects_nodes_outside_support() -> None:
    with pytest.raises(DomainError):
        PotentialGrid(1.0, [-2.0, 0.0], [1.0, 0.0])
    with pytest.raises(DomainError):
        PotentialGrid(1.0, [0.0, -0.5], [1.0, 0.0])


def test_cell_averages() -> None:
    q = PotentialGrid.from_cells(1.0, [1.0, 2.0, 3.0, 4.0])
    assert np.allclose(q.cell_averages(4), [1.0, 2.0, 3.0, 4.0])
    assert np.allclose(q.cell_averages(2), [1.5, 3.5])


def test_breakpoints_follow_direction() -> None:
    q = PotentialGrid.from_cells(1.0, [1.0, 2.0, 3.0, 4.0])
    assert np.allclose(q.breakpoints(-1.0, 1.0), [-0.5, 0.0, 0.5])
    assert np.allclose(q.breakpoints(1.0, 0.0), [0.5])


def test_scattering_data_validation() -> None:
    with pytest.raises(DomainError):
        ScatteringData([0.0, 1.0], [0.1, 0.1])
    with pytest.raises(DomainError):
        ScatteringData([1.0, 2.0], [0.1, 1.0])
    with pytest.raises(DomainError):
        ScatteringData([1.0], [0.1], etas=[2.0, 1.0])
    sd = ScatteringData([1.0, 2.0], [0.1, 0.2j], A=[1, 1], B=[0.1, 0.2j])
    assert sd.has_coefficients


def test_diag_reconstruction_branches() -> None:
    mrec = reconstruct_M_diag(-0.6)
    assert mrec.case is MatrixCase.DIAG
    assert mrec.m21_status is EntryStatus.UNDETERMINED
    first, second = mrec.branches
    assert (first.m11, first.m22) == pytest.approx((2.0, 0.5))
    assert (second.m11, second.m22) == pytest.approx((-2.0, -0.5))
    assert mrec.select(-1).branch.trace < 0
    assert sum(b.trace > 0 for b in mrec.branches) == 1


def test_diag_completion_needs_m21() -> None:
    mrec = reconstruct_M_diag(0.0)
    with pytest.raises(DomainError):
        mrec.complete()
    matrix = mrec.complete(m21=0.3)
    assert matrix.det == pytest.approx(1.0)
    assert matrix.m21 == 0.3


def test_offdiag_family_completion_satisfies_constraint() -> None:
    mrec = reconstruct_M_offdiag(2.0)
    assert not mrec.resolved
    assert mrec.m21_status is EntryStatus.CONSTRAINED
    with pytest.raises(DomainError):
        mrec.branch
    matrix = mrec.complete(m11=0.7, m12=0.4)
    assert matrix.m22 == pytest.approx(0.8)
    assert matrix.m12 * (2.0 * matrix.m11 - matrix.m21) == pytest.approx(1.0)


def test_from_matrix_round_trip() -> None:
    mrec = MReconstruction.from_matrix(TransferMatrix(1.0, 0.5, 0.0, 1.0))
    assert mrec.case is MatrixCase.OFFDIAG
    assert mrec.C1 == pytest.approx(2.0)
    assert mrec.complete().as_array() == pytest.approx(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_error_payload_shape() -> None:
    payload, code = NumericalError("Fit failed.", fields={"residual": 1.0}).to_response()
    assert code == 3
    assert payload == {"error": {"code": "NUMERICAL_ERROR", "message": "Fit failed.", "fields": {"residual": 1.0}}}
    assert ValidationError("x").exit_code == 1
    assert DomainError("x").exit_code == 2


def test_run_config_digest_ignores_outputs_and_threads() -> None:
    base = RunConfig("forward", {"xi_max": 200.0, "out": "a.json", "threads": 1})
    moved = RunConfig("forward", {"xi_max": 200.0, "out": "b.json", "threads": 4})
    changed = RunConfig("forward", {"xi_max": 100.0, "out": "a.json", "threads": 1})
    assert base.digest() == moved.digest()
    assert base.digest() != changed.digest()
