"""Forward scattering with a point transfer condition.

Jost solutions are built from their exact exponential form outside the
support and propagated inward, crossing the origin through ``M`` or
``M^{-1}``. The coefficients ``A`` and ``B`` come from matching the left
Jost solution against ``{e^{-i zeta x}, e^{i zeta x}}`` at ``x = S``.

Sign convention: the matching gives ``f_- = a e^{-i zeta x} + b e^{i zeta x}``
for ``x >= S``. We report ``A = a`` and ``B = -b``, which makes the large-
frequency limit of ``B`` equal to ``(m22 - m11)/2`` when ``m12 = 0``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from ..errors import DomainError, NumericalError
from ..models import (
    ComplexFunctionTrace,
    JostSide,
    PotentialGrid,
    ScatteringData,
    Side,
    SolverOptions,
    TransferMatrix,
)
from ..util.fitting import envelope_slope
from ..util.quadrature import panel_rule, potential_panels
from .kernel import line_propagator

logger = logging.getLogger(__name__)

DEGENERATE_A = 1e-12


def _check_upper(zeta) -> None:
    if np.any(np.imag(zeta) < 0):
        raise DomainError("Jost solutions need Im(zeta) >= 0.", fields={"zeta": str(zeta)})


def jost_plus_M(q: PotentialGrid, matrix: TransferMatrix, zeta: complex, xs, opts: SolverOptions | None = None) -> JostSide:
    """Right Jost solution, ``e^{i zeta x}`` for ``x >= S``."""
    _check_upper(zeta)
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    S = q.support
    lam = complex(zeta) ** 2
    start = np.array([np.exp(1j * zeta * S), 1j * zeta * np.exp(1j * zeta * S)])
    y = np.empty(xs.size, dtype=complex)
    yp = np.empty(xs.size, dtype=complex)
    for i, x in enumerate(xs):
        if x >= S:
            y[i] = np.exp(1j * zeta * x)
            yp[i] = 1j * zeta * y[i]
        else:
            y[i], yp[i] = line_propagator(q, matrix, lam, S, x, opts) @ start
    return JostSide(Side.PLUS, zeta, xs, y, yp)


def jost_minus_M(q: PotentialGrid, matrix: TransferMatrix, zeta: complex, xs, opts: SolverOptions | None = None) -> JostSide:
    """Left Jost solution, ``e^{-i zeta x}`` for ``x <= -S``."""
    _check_upper(zeta)
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    S = q.support
    lam = complex(zeta) ** 2
    start = np.array([np.exp(1j * zeta * S), -1j * zeta * np.exp(1j * zeta * S)])
    y = np.empty(xs.size, dtype=complex)
    yp = np.empty(xs.size, dtype=complex)
    for i, x in enumerate(xs):
        if x <= -S:
            y[i] = np.exp(-1j * zeta * x)
            yp[i] = -1j * zeta * y[i]
        else:
            y[i], yp[i] = line_propagator(q, matrix, lam, -S, x, opts) @ start
    return JostSide(Side.MINUS, zeta, xs, y, yp)


def _left_state_at_support(q, matrix, zeta: np.ndarray, opts) -> tuple[np.ndarray, np.ndarray]:
    S = q.support
    p = line_propagator(q, matrix, zeta ** 2, -S, S, opts)
    phase = np.exp(1j * zeta * S)
    y = p[..., 0, 0] * phase - 1j * zeta * p[..., 0, 1] * phase
    yp = p[..., 1, 0] * phase - 1j * zeta * p[..., 1, 1] * phase
    return y, yp


def continued_AB(q: PotentialGrid, matrix: TransferMatrix, zeta, opts: SolverOptions | None = None):
    """``A`` and ``B`` at any nonzero complex ``zeta``.

    Compact support makes the matching coefficients entire away from 0,
    so this also serves points in the lower half-plane.
    """
    zeta = np.asarray(zeta, dtype=complex)
    if np.any(zeta == 0):
        raise DomainError("Coefficients are not defined at zeta = 0.")
    S = q.support
    y, yp = _left_state_at_support(q, matrix, zeta, opts)
    a = np.exp(1j * zeta * S) * (1j * zeta * y - yp) / (2j * zeta)
    b = np.exp(-1j * zeta * S) * (1j * zeta * y + yp) / (2j * zeta)
    return a, -b


def scattering_coefficients(q: PotentialGrid, matrix: TransferMatrix, xi, opts: SolverOptions | None = None):
    """``A(xi)`` and ``B(xi)`` on an array of nonzero real frequencies."""
    xi = np.asarray(xi, dtype=float)
    if np.any(xi == 0):
        raise DomainError("Frequency xi = 0 is excluded; the matching system is degenerate there.")
    return continued_AB(q, matrix, xi.astype(complex), opts)


def scattering_AB(q: PotentialGrid, matrix: TransferMatrix, xi: float, opts: SolverOptions | None = None) -> tuple[complex, complex]:
    """Scalar form of :func:`scattering_coefficients`."""
    a, b = scattering_coefficients(q, matrix, np.array([xi]), opts)
    return complex(a[0]), complex(b[0])


def reflection(
    q: PotentialGrid,
    matrix: TransferMatrix,
    xi_grid,
    eta_max: float | None = None,
    opts: SolverOptions | None = None,
) -> ScatteringData:
    """Reflection data ``R = B/A`` on ``xi_grid``, optionally with bound states."""
    xi = np.asarray(xi_grid, dtype=float)
    a, b = scattering_coefficients(q, matrix, xi, opts)
    small = np.abs(a) < DEGENERATE_A
    if small.any():
        raise NumericalError(
            "Coefficient A is numerically zero on the grid.",
            fields={"xi": xi[small].tolist()},
        )
    r = b / a
    if np.any(np.abs(r) >= 1):
        raise NumericalError("Computed |R| reached 1; refine the tolerances.", fields={"max_abs_R": float(np.abs(r).max())})
    etas = bound_states(q, matrix, eta_max, opts=opts) if eta_max else np.empty(0)
    logger.info("Computed reflection data on %d frequencies with %d bound states", xi.size, etas.size)
    return ScatteringData(xi, r, etas, A=a, B=b, support=q.support)


def jost_wronskian(q: PotentialGrid, matrix: TransferMatrix, eta, opts: SolverOptions | None = None) -> np.ndarray:
    """Real function ``Wron(f_-, f_+)(i eta)``, equal to ``-2 eta A(i eta)``."""
    eta = np.asarray(eta, dtype=float)
    S = q.support
    y, yp = _left_state_at_support(q, matrix, 1j * eta.astype(complex), opts)
    return np.real(-np.exp(-eta * S) * (eta * y + yp))


def bound_states(
    q: PotentialGrid,
    matrix: TransferMatrix,
    eta_max: float,
    step: float | None = None,
    opts: SolverOptions | None = None,
) -> np.ndarray:
    """Bound-state parameters ``eta`` in ``(0, eta_max]``.

    A sign scan of :func:`jost_wronskian` brackets each root, which
    Brent's method then refines to ``1e-10``. Roots closer than two scan
    steps are logged as clustered.
    """
    if eta_max <= 0:
        raise DomainError("eta_max must be positive.", fields={"eta_max": eta_max})
    step = step or 1e-3 * eta_max
    grid = np.arange(1, int(np.floor(eta_max / step)) + 1) * step
    values = jost_wronskian(q, matrix, grid, opts)

    def scalar(e: float) -> float:
        return float(jost_wronskian(q, matrix, np.array([e]), opts)[0])

    roots = []
    for i in range(grid.size):
        if values[i] == 0.0:
            roots.append(grid[i])
        elif i + 1 < grid.size and values[i] * values[i + 1] < 0:
            roots.append(brentq(scalar, grid[i], grid[i + 1], xtol=1e-12))
    roots = np.unique(np.asarray(roots, dtype=float))
    if roots.size > 1 and np.min(np.diff(roots)) < 2 * step:
        logger.warning("Bound states closer than the scan resolution %.3g: %s", step, roots.tolist())
    return roots


def _potential_integrals(q: PotentialGrid, xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    edges = potential_panels(q)
    ia = np.empty(xi.size, dtype=complex)
    ib = np.empty(xi.size, dtype=complex)
    for i, x in enumerate(xi):
        tau, w = panel_rule(edges, max_freq=2 * abs(x))
        qt = q(tau)
        ia[i] = np.sum(w * np.cos(x * tau) * qt * np.exp(1j * x * np.abs(tau)))
        ib[i] = np.sum(w * np.cos(x * tau) * qt * np.exp(-1j * x * tau))
    return ia, ib


def asymptotic_AB_check(
    q: PotentialGrid,
    matrix: TransferMatrix,
    xi_grid_large,
    opts: SolverOptions | None = None,
) -> tuple[ComplexFunctionTrace, ComplexFunctionTrace]:
    """Residuals of ``A`` and ``B`` against their large-frequency forms.

    The forms keep the linear, constant and potential-integral terms.
    Each returned trace records its fitted log-log slope in
    ``diagnostics["slope"]``, or ``"exact"`` when the residual vanishes.
    """
    xi = np.asarray(xi_grid_large, dtype=float)
    if np.max(np.abs(xi)) < 50:
        raise DomainError("Asymptotic check needs a grid reaching |xi| >= 50.")
    a, b = scattering_coefficients(q, matrix, xi, opts)
    ia, ib = _potential_integrals(q, xi)
    m11, m12, m22 = matrix.m11, matrix.m12, matrix.m22
    a_asym = m12 * xi / 2j + (m11 + m22) / 2 + 0.5 * m12 * ia
    b_asym = -m12 * xi / 2j + (m22 - m11) / 2 - 0.5 * m12 * ib
    traces = []
    for label, res in (("A residual", np.abs(a - a_asym)), ("B residual", np.abs(b - b_asym))):
        scale = max(1.0, float(np.max(np.abs(a))))
        if np.max(res) <= 1e-10 * scale:
            slope = "exact"
        else:
            large = np.abs(xi) >= 50
            slope = envelope_slope(np.abs(xi[large]), res[large], n_bins=8)
        traces.append(ComplexFunctionTrace(xi, res, label, diagnostics={"slope": slope}))
    return traces[0], traces[1]


@dataclass(frozen=True)
class UnitarityReport:
    max_residual: float
    conjugation_residual: float


def unitarity(q: PotentialGrid, matrix: TransferMatrix, xi, opts: SolverOptions | None = None) -> UnitarityReport:
    """Check ``|A|^2 - |B|^2 = 1`` and conjugation symmetry on ``xi``."""
    xi = np.asarray(xi, dtype=float)
    a, b = scattering_coefficients(q, matrix, xi, opts)
    am, bm = scattering_coefficients(q, matrix, -xi, opts)
    resid = np.abs(np.abs(a) ** 2 - np.abs(b) ** 2 - 1)
    conj = np.maximum(np.abs(am - np.conj(a)), np.abs(bm - np.conj(b)))
    return UnitarityReport(float(resid.max()), float(conj.max()))
