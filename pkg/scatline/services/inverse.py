"""Transfer matrix and ``A(zeta)`` from reflection data.

The large-frequency behaviour of ``R`` tells whether ``m12`` vanishes:
``R -> C2`` with ``|C2| < 1`` when it does, ``R -> -1`` otherwise.
From the limit (and, in the off-diagonal case, the slope fit of
``4/(1 - |R|^2)`` against ``xi**2``) the matrix entries follow up to the
sign branches and the entry the data leave free. ``A`` is then rebuilt
in the upper half-plane as prefactor times Blaschke product times the
exponential of a Cauchy integral over ``log(1 - |R|^2)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, NumericalError
from ..models import (
    ComplexFunctionTrace,
    EntryStatus,
    MatrixBranch,
    MatrixCase,
    MReconstruction,
    ScatteringData,
)
from ..util.fitting import fit_basis, inverse_power_fit

logger = logging.getLogger(__name__)

MIN_TAIL_XI = 50.0
INCONCLUSIVE_BAND = 0.1
DEFAULT_EPSILONS = (0.1, 0.05, 0.025)
UNITARITY_FLAG = 1e-3
PANEL_BUDGET = 2 ** 20
CONSTRAINT_TEXT = "m12*(C1*m11 - m21) = 1"


def _fold(xi: np.ndarray, *columns: np.ndarray):
    has_neg, has_pos = np.any(xi < 0), np.any(xi > 0)
    if not (has_neg and has_pos):
        xi = np.concatenate((xi, -xi))
        columns = tuple(np.concatenate((c, np.conj(c))) for c in columns)
    order = np.argsort(xi)
    xi = xi[order]
    keep = np.concatenate(([True], np.diff(xi) > 0))
    return (xi[keep],) + tuple(c[order][keep] for c in columns)


def fold_grid(sd: ScatteringData) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric ``(xi, R)`` on both half-lines using ``R(-xi) = conj R(xi)``.

    Samples given on both sides are kept as they are; a one-sided grid is
    mirrored.
    """
    return _fold(sd.xi, sd.R)


def positive_half(sd: ScatteringData) -> tuple[np.ndarray, np.ndarray]:
    xi, r = fold_grid(sd)
    pos = xi > 0
    return xi[pos], r[pos]


def classify_case(
    sd: ScatteringData,
    tail_tol: float = 1e-2,
    diag_band: float = INCONCLUSIVE_BAND,
) -> MatrixCase:
    """Decide from the tail of ``R`` whether ``m12`` vanishes.

    ``R`` is fitted as ``r0 + r1/xi + r2/xi**2`` on the top third of the
    frequency range. ``|r0 + 1| <= tail_tol`` means ``R -> -1`` (off-diagonal);
    ``|r0 + 1| >= diag_band`` means a limit with ``|C2| < 1`` (diagonal).
    Anything in between, or a poor fit, is inconclusive.
    """
    if not 0 < tail_tol <= diag_band:
        raise DomainError(
            "Classification needs 0 < tail_tol <= diag_band.",
            fields={"tail_tol": tail_tol, "diag_band": diag_band},
        )
    xi, r = positive_half(sd)
    if xi.size == 0 or xi.max() < MIN_TAIL_XI:
        raise DomainError(
            "Case classification needs the grid to reach |xi| >= 50.",
            fields={"xi_max": float(xi.max()) if xi.size else 0.0},
        )
    tail = xi >= (2.0 / 3.0) * xi.max()
    if tail.sum() < 4:
        raise NumericalError("Too few samples in the frequency tail; widen or refine the grid.")
    fit = inverse_power_fit(xi[tail], r[tail], degree=2)
    distance = abs(fit.coefficients[0] + 1)
    logger.debug("Tail limit %s, distance from -1 %.3g, residual %.3g", fit.coefficients[0], distance, fit.residual)
    if fit.residual > 0.05:
        raise NumericalError(
            "Reflection tail does not settle; classification is inconclusive. Widen the grid.",
            fields={"residual": fit.residual},
        )
    if distance <= tail_tol:
        return MatrixCase.OFFDIAG
    if distance >= diag_band:
        return MatrixCase.DIAG
    raise NumericalError(
        "Reflection tail limit is too close to -1 to classify. Widen the grid.",
        fields={"distance_from_minus_one": distance},
    )


def estimate_C2(sd: ScatteringData) -> float:
    """``lim R`` from a ``C2 + c/xi`` fit over the top third of the grid."""
    xi, r = positive_half(sd)
    start = (2 * xi.size) // 3
    if xi.size - start < 2:
        raise NumericalError("Too few samples to fit the reflection limit.")
    fit = inverse_power_fit(xi[start:], r[start:], degree=1)
    c2 = complex(fit.coefficients[0])
    if abs(c2.imag) > 1e-6:
        logger.warning("Reflection limit has imaginary part %.3g; keeping the real part", c2.imag)
    if abs(c2) >= 1:
        raise DomainError("Fitted limit |C2| >= 1 is inconsistent with |R| < 1.", fields={"C2": c2.real})
    return float(c2.real)


def reconstruct_M_diag(C2: float) -> MReconstruction:
    """Both sign branches of ``m11 = 1/m22``, positive trace first."""
    if abs(C2) >= 1:
        raise DomainError("|C2| must be below one.", fields={"C2": C2})
    m22 = float(np.sqrt((1 + C2) / (1 - C2)))
    m11 = float(np.sqrt((1 - C2) / (1 + C2)))
    branches = [MatrixBranch(m11, 0.0, None, m22), MatrixBranch(-m11, 0.0, None, -m22)]
    return MReconstruction(MatrixCase.DIAG, branches, EntryStatus.UNDETERMINED, C2=C2)


def estimate_C1(sd: ScatteringData, residual_limit: float = 0.5) -> float:
    """``lim xi (R + 1) / (2i)`` by a quadratic fit in ``1/xi``.

    For ``q = 0`` the limit is ``m22/m12``. A potential adds half its
    integral over ``[0, S]`` to the real part, since it shifts the
    effective ``m22`` by ``m12/2`` times that integral; the part on
    ``[-S, 0]`` only changes a common phase. Oscillating terms are left to
    the fit. Only the real part is fitted.
    """
    xi, r = positive_half(sd)
    tail = xi >= xi.max() / 3.0
    if tail.sum() < 4:
        raise NumericalError("Too few samples to fit C1.")
    g = xi[tail] * (r[tail] + 1) / 2j
    fit = inverse_power_fit(xi[tail], g.real, degree=2)
    c1 = float(fit.coefficients[0])
    if fit.residual > residual_limit * max(1.0, abs(c1)):
        raise NumericalError("C1 fit did not converge.", fields={"residual": fit.residual, "C1": c1})
    return c1


@dataclass(frozen=True)
class KFit:
    """Slope ``K1 = m12**2`` and fitted intercept ``K2``.

    For ``q = 0`` the intercept is ``(m11 + m22)**2 - 2*m12*m21``, which
    reduces to ``(m11 + m22)**2`` only when ``m21 = 0``.
    """
    K1: float
    K2: float
    residual: float


def estimate_K(sd: ScatteringData, xi_min: float | None = None) -> KFit:
    """Linear fit of ``4/(1 - |R|^2)`` against ``xi**2``.

    The fit runs over ``xi >= xi_min`` (default: the top two thirds of the
    range) so low-frequency terms in ``1/xi**2`` do not bias the intercept.
    """
    xi, r = positive_half(sd)
    lower = xi.max() / 3.0 if xi_min is None else xi_min
    use = xi >= lower
    y = 4.0 / (1.0 - np.abs(r[use]) ** 2)
    fit = fit_basis([xi[use] ** 2, np.ones(use.sum())], y)
    k1, k2 = (float(c) for c in fit.coefficients)
    if k1 <= 0:
        raise DomainError("Negative slope: data inconsistent with m12 != 0.", fields={"K1": k1})
    return KFit(k1, k2, fit.residual)


def _dedupe(branches: list[MatrixBranch], candidate: MatrixBranch) -> None:
    if not any(np.allclose(
        (candidate.m11, candidate.m12, candidate.m21, candidate.m22),
        (b.m11, b.m12, b.m21, b.m22),
    ) for b in branches):
        branches.append(candidate)


def _branches_from_intercept(C1: float, K1: float, intercept: float) -> list[MatrixBranch]:
    # intercept = m11**2 + m22**2 + 2 once det M = 1 is used
    branches: list[MatrixBranch] = []
    for s11 in (1.0, -1.0):
        for s12 in (1.0, -1.0):
            m12 = s12 * np.sqrt(K1)
            m22 = C1 * m12
            m11_sq = intercept - 2.0 - m22 ** 2
            if m11_sq < -0.05 * max(1.0, abs(intercept)):
                raise DomainError(
                    "Fitted intercept is too small for the fitted C1 and K1.",
                    fields={"intercept": intercept, "C1": C1, "K1": K1},
                )
            m11 = s11 * np.sqrt(max(m11_sq, 0.0))
            _dedupe(branches, MatrixBranch(float(m11), float(m12), float((m11 * m22 - 1.0) / m12), float(m22)))
    branches.sort(key=lambda b: b.trace <= 0)
    return branches


def reconstruct_M_offdiag(
    C1: float,
    K1: float | None = None,
    K2: float | None = None,
    intercept: float | None = None,
) -> MReconstruction:
    """Constraint family, or the sign possibilities when ``K1, K2`` are known.

    ``K2`` is ``(m11 + m22)**2``. Passing the raw fitted ``intercept`` of
    :func:`estimate_K` instead resolves ``m11`` from
    ``m11**2 + m22**2 + 2``; the intercept is kept in ``diagnostics``.
    """
    if K1 is not None and intercept is not None:
        if K1 <= 0:
            raise DomainError("K1 must be positive.", fields={"K1": K1})
        mrec = MReconstruction(
            MatrixCase.OFFDIAG,
            _branches_from_intercept(C1, K1, intercept),
            EntryStatus.RESOLVED,
            C1=C1,
            K1=K1,
            constraint=CONSTRAINT_TEXT,
        )
        mrec.diagnostics["K_intercept"] = intercept
        return mrec
    if K1 is None or K2 is None:
        return MReconstruction(
            MatrixCase.OFFDIAG,
            [],
            EntryStatus.CONSTRAINED,
            C1=C1,
            constraint=f"m22 = C1*m12; {CONSTRAINT_TEXT}",
        )
    if K1 <= 0:
        raise DomainError("K1 must be positive.", fields={"K1": K1})
    if K2 < 0:
        raise DomainError("K2 must be non-negative.", fields={"K2": K2})
    branches: list[MatrixBranch] = []
    for s_trace in (1.0, -1.0):
        for s12 in (1.0, -1.0):
            m12 = s12 * np.sqrt(K1)
            m22 = C1 * m12
            m11 = s_trace * np.sqrt(K2) - m22
            m21 = (m11 * m22 - 1.0) / m12
            _dedupe(branches, MatrixBranch(float(m11), float(m12), float(m21), float(m22)))
    return MReconstruction(
        MatrixCase.OFFDIAG,
        branches,
        EntryStatus.RESOLVED,
        C1=C1,
        K1=K1,
        K2=K2,
        constraint=CONSTRAINT_TEXT,
    )


def blaschke(etas, zeta):
    """``prod (zeta - i eta_j)/(zeta + i eta_j)``."""
    etas = np.asarray(etas, dtype=float)
    zeta = np.asarray(zeta, dtype=complex)
    if np.any(zeta.imag < 0):
        raise DomainError("Blaschke product is evaluated for Im(zeta) >= 0.")
    out = np.ones_like(zeta)
    for eta in etas:
        if np.any(zeta == -1j * eta):
            raise DomainError("Blaschke product hit a pole.", fields={"eta": float(eta)})
        out = out * (zeta - 1j * eta) / (zeta + 1j * eta)
    return out if out.ndim else complex(out)


class DispersionQuadrature:
    """Cauchy integral ``int phi(xi)/(xi - zeta) dxi`` for piecewise-linear ``phi``.

    Each panel is integrated exactly against ``1/(xi - zeta)``; beyond the
    grid ``phi`` is continued as ``c/xi**2`` and integrated in closed form,
    unless ``tails`` is off, in which case the integral stops at the grid ends.
    The rule depends only on the grid and ``phi`` and is shared read-only.
    """

    chunk = 256

    def __init__(self, xi: np.ndarray, phi: np.ndarray, tails: bool = True) -> None:
        self.tails = tails
        self.a = xi[:-1]
        self.b = xi[1:]
        self.phi_a = phi[:-1]
        self.slope = np.diff(phi) / np.diff(xi)
        self.right = (float(xi[-1]), complex(phi[-1] * xi[-1] ** 2))
        self.left = (float(-xi[0]), complex(phi[0] * xi[0] ** 2))

    def _tails(self, z: np.ndarray) -> np.ndarray:
        xr, cr = self.right
        xl, cl = self.left
        right = cr * (-1.0 / (z * xr) - np.log1p(-z / xr) / z ** 2)
        left = -cl * (1.0 / (z * xl) - np.log1p(z / xl) / z ** 2)
        return right + left

    def integral(self, zeta) -> np.ndarray:
        zeta = np.atleast_1d(np.asarray(zeta, dtype=complex))
        out = np.empty(zeta.shape, dtype=complex)
        flat = zeta.ravel()
        result = out.ravel()
        step = max(1, min(self.chunk, PANEL_BUDGET // max(1, self.a.size)))
        for start in range(0, flat.size, step):
            z = flat[start:start + step, None]
            logs = np.log(self.b - z) - np.log(self.a - z)
            panels = (self.phi_a + self.slope * (z - self.a)) * logs + self.slope * (self.b - self.a)
            result[start:start + step] = panels.sum(axis=1)
            if self.tails:
                result[start:start + step] += self._tails(flat[start:start + step])
        return result.reshape(zeta.shape)


def _kernel_and_prefactor(sd: ScatteringData, mrec: MReconstruction):
    if not mrec.resolved:
        raise DomainError(
            "Dispersion reconstruction needs a resolved transfer matrix; supply K1 and K2.",
            fields={"constraint": mrec.constraint},
        )
    branch = mrec.branch
    xi, r = fold_grid(sd)
    one_minus = 1.0 - np.abs(r) ** 2
    if np.any(one_minus <= 0):
        raise DomainError("log(1 - |R|^2) is singular: |R| reached 1.")
    tr = branch.trace
    if mrec.case is MatrixCase.DIAG:
        phi = 2.0 * np.log(abs(2.0 / tr)) - np.log(one_minus)

        def prefactor(z):
            return tr / 2.0 + 0.0 * z
    else:
        m12 = branch.m12
        phi = 2.0 * np.log(2.0 / np.sqrt(xi ** 2 * m12 ** 2 + tr ** 2)) - np.log(one_minus)

        def prefactor(z):
            return (m12 * z + 1j * tr) / 2j
    return xi, phi, prefactor


def dispersion_quadrature(sd: ScatteringData, mrec: MReconstruction) -> tuple[DispersionQuadrature, DispersionQuadrature]:
    """Fine rule on the full grid and a coarse rule on every other sample."""
    xi, phi, _ = _kernel_and_prefactor(sd, mrec)
    idx = np.unique(np.concatenate((np.arange(0, xi.size, 2), [xi.size - 1])))
    return DispersionQuadrature(xi, phi), DispersionQuadrature(xi[idx], phi[idx])


def dispersion_A(
    sd: ScatteringData,
    mrec: MReconstruction,
    zeta,
    tol: float = 1e-2,
    check: bool = True,
):
    """``A(zeta)`` for ``Im zeta > 0`` from reflection data and bound states.

    Raises
    ------
    DomainError
        For ``Im zeta <= 0`` or an unresolved off-diagonal reconstruction.
    NumericalError
        When the coarse and fine quadratures disagree by more than ``tol``
        in the exponent, which means the grid is too sparse near ``Re zeta``.
    """
    zeta_arr = np.asarray(zeta, dtype=complex)
    if np.any(zeta_arr.imag <= 0):
        raise DomainError("dispersion_A needs Im(zeta) > 0; use dispersion_A_boundary on the real axis.")
    _, _, prefactor = _kernel_and_prefactor(sd, mrec)
    fine, coarse = dispersion_quadrature(sd, mrec)
    exponent = fine.integral(zeta_arr) / (2j * np.pi)
    if check:
        error = np.abs(exponent - coarse.integral(zeta_arr) / (2j * np.pi))
        if np.max(error) > tol:
            worst = int(np.argmax(error))
            raise NumericalError(
                "Dispersion quadrature error above tolerance; refine the grid near Re(zeta).",
                fields={"zeta": str(np.ravel(zeta_arr)[worst]), "estimate": float(np.max(error))},
            )
    value = prefactor(zeta_arr) * blaschke(sd.etas, zeta_arr) * np.exp(exponent)
    return value if np.ndim(value) else complex(value)


def _extrapolation_weights(eps) -> np.ndarray:
    eps = np.asarray(eps, dtype=float)
    w = np.ones(eps.size)
    for i in range(eps.size):
        for j in range(eps.size):
            if i != j:
                w[i] *= eps[j] / (eps[j] - eps[i])
    return w


def dispersion_A_boundary(
    sd: ScatteringData,
    mrec: MReconstruction,
    xi,
    eps=DEFAULT_EPSILONS,
    tol: float = 1e-2,
) -> ComplexFunctionTrace:
    """Real-axis ``A(xi)`` by polynomial extrapolation of ``A(xi + i eps)`` to ``eps = 0``.

    The quadrature check runs on the largest offset only.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    eps = tuple(sorted(eps, reverse=True))
    weights = _extrapolation_weights(eps)
    total = np.zeros(xi.size, dtype=complex)
    for k, (e, w) in enumerate(zip(eps, weights)):
        total += w * np.asarray(dispersion_A(sd, mrec, xi + 1j * e, tol=tol, check=(k == 0)))
    return ComplexFunctionTrace(xi, total, "A", diagnostics={"epsilons": list(eps)})


def reconstruct_B(sd: ScatteringData, A_trace: ComplexFunctionTrace) -> ComplexFunctionTrace:
    """``B = R A`` on the abscissae of ``A_trace`` with a unitarity re-check."""
    xi_all, r_all = fold_grid(sd)
    xi = np.asarray(A_trace.abscissae, dtype=float)
    idx = np.searchsorted(xi_all, xi)
    idx = np.clip(idx, 0, xi_all.size - 1)
    if not np.allclose(xi_all[idx], xi, rtol=1e-12, atol=1e-14):
        raise DomainError("A trace abscissae are not on the reflection grid.")
    b = r_all[idx] * A_trace.values
    resid = float(np.max(np.abs(np.abs(A_trace.values) ** 2 - np.abs(b) ** 2 - 1)))
    inconsistent = resid > UNITARITY_FLAG
    if inconsistent:
        logger.warning("Reconstructed A/B violate unitarity by %.3g", resid)
    return ComplexFunctionTrace(
        xi,
        b,
        "B",
        diagnostics={"unitarity_residual": resid, "inconsistent": inconsistent},
    )


@dataclass(frozen=True)
class ContinuedRatios:
    """Data-side values at points ``zeta`` of the upper half-plane.

    With ``b = -B`` the matching coefficient of ``e^{i zeta x}``,
    ``rho_plus = b(zeta) e^{2i zeta S}/a(zeta)`` and
    ``rho_minus = b(-zeta) e^{2i zeta S}/a(zeta)``.
    """
    zeta: np.ndarray
    A: np.ndarray
    rho_plus: np.ndarray
    rho_minus: np.ndarray
    support: float


def _boundary_coefficients(sd: ScatteringData, mrec: MReconstruction, eps):
    if sd.has_coefficients:
        return _fold(sd.xi, sd.A, sd.B)
    xi, r = fold_grid(sd)
    a = dispersion_A_boundary(sd, mrec, xi, eps=eps).values
    return xi, a, r * a


def continue_ratios(
    sd: ScatteringData,
    mrec: MReconstruction,
    zeta,
    S: float,
    eps=DEFAULT_EPSILONS,
    tol: float = 1e-2,
) -> ContinuedRatios:
    """Carry the reflection ratios from the real axis to ``Im zeta > 0``.

    ``rho * Bl / (zeta + i)`` is analytic and decaying in the upper
    half-plane when ``q`` vanishes beyond ``S``, so it equals the Cauchy
    integral of its real-axis samples; nothing is added beyond the grid.
    The real-axis ``A``/``B`` are the data traces when present and the
    dispersion reconstruction otherwise. ``A(zeta)`` is :func:`dispersion_A`.

    Raises
    ------
    DomainError
        For ``Im zeta <= 0``, ``S <= 0`` or ``zeta`` on a bound state.
    """
    zeta = np.atleast_1d(np.asarray(zeta, dtype=complex))
    if np.any(zeta.imag <= 0):
        raise DomainError("Continuation needs Im(zeta) > 0.")
    if S <= 0:
        raise DomainError("Support bound must be positive.", fields={"support": S})
    xi, a_edge, big_b_edge = _boundary_coefficients(sd, mrec, eps)
    weight = np.exp(2j * xi * S) * blaschke(sd.etas, xi) / (xi + 1j)
    rho_plus_edge = -big_b_edge / a_edge * weight
    rho_minus_edge = -np.conj(big_b_edge) / a_edge * weight

    bl = blaschke(sd.etas, zeta)
    if np.any(np.abs(bl) < 1e-12):
        raise DomainError("zeta sits on a bound state.", fields={"etas": sd.etas.tolist()})
    scale = (zeta + 1j) / (2j * np.pi * bl)
    rho_plus = scale * DispersionQuadrature(xi, rho_plus_edge, tails=False).integral(zeta)
    rho_minus = scale * DispersionQuadrature(xi, rho_minus_edge, tails=False).integral(zeta)
    a = np.atleast_1d(dispersion_A(sd, mrec, zeta, tol=tol))
    logger.debug("Continued reflection ratios to %d points with support %.3g", zeta.size, S)
    return ContinuedRatios(zeta, a, rho_plus, rho_minus, S)


def invert(
    sd: ScatteringData,
    sign: int = 1,
    tail_tol: float = 1e-2,
    diag_band: float = INCONCLUSIVE_BAND,
) -> MReconstruction:
    """Run case classification and the matching reconstruction."""
    case = classify_case(sd, tail_tol=tail_tol, diag_band=diag_band)
    if case is MatrixCase.DIAG:
        mrec = reconstruct_M_diag(estimate_C2(sd))
    else:
        c1 = estimate_C1(sd)
        kfit = estimate_K(sd)
        mrec = reconstruct_M_offdiag(c1, kfit.K1, intercept=kfit.K2)
        mrec.diagnostics["K_residual"] = kfit.residual
    logger.info("Classified reflection data as %s", case.value)
    return mrec.select(sign)
