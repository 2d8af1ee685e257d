"""Compact-support pipeline: W(S), the m-function, Delta and potential recovery.

With ``q`` supported in ``[-S, S]`` the fundamental pair started from
``H = diag(-1, 1)`` at ``-S`` can be written at ``S`` through the
scattering coefficients alone, because the left Jost solutions are pure
exponentials on both ends. That gives the m-function
``m = -w1(S)/w2(S)`` from data, and the potential is recovered by fitting
a piecewise-constant model whose m-function is computed directly.
Off the real axis the data m-function uses ``A`` from the dispersion
formula and the reflection ratios continued by a Cauchy integral; the
real-axis route through ``W(S)`` is kept with a chordal misfit.
"""
from __future__ import annotations

import logging

import numpy as np
import pandas as pd
from scipy.optimize import brentq, least_squares

from ..errors import DomainError, NumericalError
from ..models import (
    ComplexFunctionTrace,
    FundamentalPair,
    Interpolation,
    IterationRecord,
    MFunctionTrace,
    MReconstruction,
    PotentialGrid,
    RecoveryResult,
    ScatteringData,
    SolverOptions,
    TransferMatrix,
)
from ..util.parallel import ordered_map
from .forward import continued_AB
from .inverse import DEFAULT_EPSILONS, continue_ratios
from .kernel import line_propagator

logger = logging.getLogger(__name__)

H = np.array([[-1.0, 0.0], [0.0, 1.0]])
POLE_GUARD = 1e-12
WRONSKIAN_TOLERANCE = 1e-10
STAGNATION_WINDOW = 10


def fundamental_pair_direct(
    q: PotentialGrid,
    matrix: TransferMatrix,
    lam,
    xs,
    opts: SolverOptions | None = None,
) -> FundamentalPair:
    """Columns of ``P(-S -> x) H`` for every ``x`` in ``xs``.

    ``lam`` may be an array when ``xs`` is a scalar; the pair then holds
    one value per spectral parameter.
    """
    S = q.support
    lam = np.asarray(lam, dtype=complex)
    scalar_x = np.ndim(xs) == 0
    x_arr = np.atleast_1d(np.asarray(xs, dtype=float))
    if lam.ndim and not scalar_x:
        raise DomainError("Give either an array of lambdas or an array of points, not both.")
    cols = []
    for x in x_arr:
        cols.append(line_propagator(q, matrix, lam, -S, float(x), opts) @ H)
    w = cols[0] if scalar_x else np.stack(cols, axis=-3)
    pair = FundamentalPair(
        lam=lam,
        x=float(x_arr[0]) if scalar_x else x_arr,
        w1=w[..., 0, 0],
        w1p=w[..., 1, 0],
        w2=w[..., 0, 1],
        w2p=w[..., 1, 1],
        support=S,
    )
    wr = pair.wronskian()
    scale = np.maximum(1.0, np.abs(pair.w1 * pair.w2p))
    if np.any(np.abs(wr + 1.0) > WRONSKIAN_TOLERANCE * scale):
        raise NumericalError(
            "Fundamental pair lost the Wronskian invariant; tighten the tolerances.",
            fields={"max_deviation": float(np.max(np.abs(wr + 1.0)))},
        )
    return pair


def pair_at_support(q: PotentialGrid, matrix: TransferMatrix, lam, opts: SolverOptions | None = None) -> FundamentalPair:
    return fundamental_pair_direct(q, matrix, lam, q.support, opts)


def pair_from_coefficients(S: float, zeta, a_plus, b_plus, a_minus, b_minus) -> FundamentalPair:
    """``W(S)`` from the left Jost expansion coefficients at ``zeta`` and ``-zeta``.

    ``b_plus``/``b_minus`` are the matching coefficients of ``e^{i zeta x}``
    (the negative of the reported ``B``).
    """
    zeta = np.asarray(zeta, dtype=complex)
    if np.any(zeta == 0):
        raise DomainError("W(S) from coefficients is undefined at zeta = 0.")
    em = np.exp(-1j * zeta * S)
    ep = np.exp(1j * zeta * S)
    # columns: starting coefficients of w1 and w2 in the basis e^{-i zeta x}, e^{i zeta x}
    alpha = (-em / 2, -em / (2j * zeta))
    beta = (-ep / 2, ep / (2j * zeta))
    values = []
    for al, be in zip(alpha, beta):
        hat_a = a_plus * al + b_minus * be
        hat_b = b_plus * al + a_minus * be
        y = em * hat_a + ep * hat_b
        yp = -1j * zeta * em * hat_a + 1j * zeta * ep * hat_b
        values.append((y, yp))
    (w1, w1p), (w2, w2p) = values
    return FundamentalPair(zeta ** 2, S, w1, w1p, w2, w2p, S)


def _coefficients_on_grid(sd: ScatteringData, xi: np.ndarray, interpolate: bool):
    if not sd.has_coefficients:
        raise DomainError("Scattering data carry no A/B traces; run the forward or invert step first.")
    grid = np.concatenate((sd.xi, -sd.xi))
    a_all = np.concatenate((sd.A, np.conj(sd.A)))
    b_all = np.concatenate((-sd.B, -np.conj(sd.B)))
    order = np.argsort(grid, kind="stable")
    grid, a_all, b_all = grid[order], a_all[order], b_all[order]
    out_a = np.empty(xi.size, dtype=complex)
    out_b = np.empty(xi.size, dtype=complex)
    missing = []
    for i, x in enumerate(xi):
        hit = np.flatnonzero(np.isclose(grid, x, rtol=1e-12, atol=1e-14))
        if hit.size:
            out_a[i], out_b[i] = a_all[hit[0]], b_all[hit[0]]
        else:
            missing.append(float(x))
    if missing:
        if not interpolate:
            raise DomainError("A/B are not sampled at the requested frequencies.", fields={"xi": missing})
        logger.warning("Interpolating A/B at %d frequencies off the data grid", len(missing))
        for i, x in enumerate(xi):
            if float(x) in missing:
                out_a[i] = np.interp(x, grid, a_all.real) + 1j * np.interp(x, grid, a_all.imag)
                out_b[i] = np.interp(x, grid, b_all.real) + 1j * np.interp(x, grid, b_all.imag)
    return out_a, out_b


def reconstruct_W_at_S(sd: ScatteringData, S: float, xi, interpolate: bool = False) -> FundamentalPair:
    """``[w1, w2]`` and derivatives at ``x = S`` from real-axis A/B data.

    Values at ``-xi`` follow from conjugation symmetry. When ``xi`` is
    off the data grid the coefficients are interpolated (with a warning)
    if ``interpolate`` is set, and rejected otherwise.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if np.any(xi == 0):
        raise DomainError("xi = 0 is excluded.")
    a, b = _coefficients_on_grid(sd, xi, interpolate)
    return pair_from_coefficients(S, xi, a, b, np.conj(a), np.conj(b))


def _nearest_zero_estimate(lam: complex, S: float) -> float:
    root = np.sqrt(complex(lam)).real
    k = max(1, round(2 * root * S / np.pi))
    return float((k * np.pi / (2 * S)) ** 2)


def m_function(pair: FundamentalPair):
    """``m = -w1(S)/w2(S)``; a vanishing ``w2(S)`` is reported as a pole."""
    w1, _, w2, _ = pair.at_support()
    w1 = np.asarray(w1)
    w2 = np.asarray(w2)
    tiny = np.abs(w2) < POLE_GUARD
    if np.any(tiny):
        lam = complex(np.ravel(pair.lam)[np.argmax(np.ravel(tiny))])
        raise DomainError(
            "lambda is at a Dirichlet eigenvalue; m has a pole there.",
            fields={"lambda": str(lam), "nearest_free_zero": _nearest_zero_estimate(lam, pair.support)},
        )
    m = -w1 / w2
    return m if m.ndim else complex(m)


def _m_values(q: PotentialGrid, matrix: TransferMatrix, lambdas: np.ndarray, opts) -> np.ndarray:
    p = line_propagator(q, matrix, lambdas, -q.support, q.support, opts)
    return p[..., 0, 0] / p[..., 0, 1]


def m_trace(q: PotentialGrid, matrix: TransferMatrix, lambdas, opts: SolverOptions | None = None) -> MFunctionTrace:
    """Model m-function on the given spectral parameters."""
    lambdas = np.atleast_1d(np.asarray(lambdas, dtype=complex))
    values = m_function(pair_at_support(q, matrix, lambdas, opts))
    return MFunctionTrace(lambdas, values, q.support)


def delta_trace(q: PotentialGrid, matrix: TransferMatrix, lambda_grid, opts: SolverOptions | None = None) -> ComplexFunctionTrace:
    """``Delta(lambda) = w2(S, lambda)``; ``lambda = 0`` is a regular point of the propagator."""
    lambdas = np.atleast_1d(np.asarray(lambda_grid, dtype=complex))
    p = line_propagator(q, matrix, lambdas, -q.support, q.support, opts)
    return ComplexFunctionTrace(lambdas, p[..., 0, 1], "Delta")


def dirichlet_eigenvalues(
    q: PotentialGrid,
    matrix: TransferMatrix,
    lam_min: float,
    lam_max: float,
    n_scan: int = 4000,
    opts: SolverOptions | None = None,
) -> np.ndarray:
    """Real zeros of ``Delta`` in ``[lam_min, lam_max]``."""
    if lam_max <= lam_min:
        raise DomainError("Empty eigenvalue window.", fields={"lam_min": lam_min, "lam_max": lam_max})
    grid = np.linspace(lam_min, lam_max, n_scan)
    values = delta_trace(q, matrix, grid, opts).values.real

    def delta(lam: float) -> float:
        return float(delta_trace(q, matrix, np.array([lam]), opts).values[0].real)

    roots = []
    for i in range(grid.size - 1):
        if values[i] == 0.0:
            roots.append(grid[i])
        elif values[i] * values[i + 1] < 0:
            roots.append(brentq(delta, grid[i], grid[i + 1], xtol=1e-13, rtol=1e-15))
    return np.asarray(roots)


def _winding_number(fn, corners, n: int, refinements: int = 4) -> int:
    for _ in range(refinements + 1):
        path = np.concatenate([
            np.linspace(a, b, n, endpoint=False) for a, b in zip(corners, corners[1:] + corners[:1])
        ])
        path = np.append(path, path[0])
        values = fn(path)
        if np.any(values == 0):
            raise NumericalError("Delta vanishes on the counting contour; move the box.")
        steps = np.angle(values[1:] / values[:-1])
        if np.max(np.abs(steps)) < np.pi / 2:
            return int(round(np.sum(steps) / (2 * np.pi)))
        n *= 2
    raise NumericalError("Argument-principle contour is too coarse; shrink the box.")


def offaxis_zero_count(
    q: PotentialGrid,
    matrix: TransferMatrix,
    re_min: float,
    re_max: float,
    im_max: float,
    im_min: float = 0.5,
    n: int = 400,
    opts: SolverOptions | None = None,
) -> int:
    """Number of zeros of ``Delta`` in the box ``Re in [re_min, re_max]``, ``im_min <= |Im| <= im_max``.

    Counted with the argument principle on the upper box and its mirror.
    """
    if not 0 < im_min < im_max:
        raise DomainError("Need 0 < im_min < im_max.")

    def delta(lams):
        return delta_trace(q, matrix, lams, opts).values

    upper = [complex(re_min, im_min), complex(re_max, im_min), complex(re_max, im_max), complex(re_min, im_max)]
    lower = [complex(re_min, -im_max), complex(re_max, -im_max), complex(re_max, -im_min), complex(re_min, -im_min)]
    count = _winding_number(delta, upper, n) + _winding_number(delta, lower, n)
    if count:
        logger.warning("Found %d non-real zeros of Delta", count)
    return count


def v_solution(
    q: PotentialGrid,
    matrix: TransferMatrix,
    lam: complex,
    xs,
    opts: SolverOptions | None = None,
) -> ComplexFunctionTrace:
    """Solution with ``v(S) = 0``, ``v'(S) = 1``, propagated back through ``M^{-1}``."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    start = np.array([0.0, 1.0], dtype=complex)
    values = np.empty(xs.size, dtype=complex)
    derivs = np.empty(xs.size, dtype=complex)
    for i, x in enumerate(xs):
        values[i], derivs[i] = line_propagator(q, matrix, lam, q.support, float(x), opts) @ start
    return ComplexFunctionTrace(xs, values, "v", derivatives=derivs)


def sample_lambdas(kind: str = "ray", n: int = 40) -> np.ndarray:
    """Spectral parameters for recovery.

    ``"ray"`` samples ``-tau**2`` for ``tau`` in ``[1, 10]``, where m is
    smooth and pole-free; ``"strip"`` samples ``(xi + 0.5i)**2`` for ``xi``
    in ``[0.5, 15]``, which reaches the oscillatory part of m. ``"mixed"``
    puts a third of the points on the ray and the rest on the strip.
    """
    if kind == "mixed":
        n_ray = n // 3
        return np.concatenate((sample_lambdas("ray", n_ray), sample_lambdas("strip", n - n_ray)))
    if kind == "ray":
        return -np.linspace(1.0, 10.0, n) ** 2 + 0j
    if kind == "strip":
        return (np.linspace(0.5, 15.0, n) + 0.5j) ** 2
    raise DomainError("Unknown lambda sample kind.", fields={"kind": kind})


def m_trace_from_coefficients(
    q: PotentialGrid,
    matrix: TransferMatrix,
    lambdas,
    opts: SolverOptions | None = None,
) -> MFunctionTrace:
    """Data m-function from A and the matching coefficient continued to ``zeta = sqrt(lambda)``."""
    lambdas = np.atleast_1d(np.asarray(lambdas, dtype=complex))
    zeta = np.sqrt(lambdas)
    a_plus, big_b_plus = continued_AB(q, matrix, zeta, opts)
    a_minus, big_b_minus = continued_AB(q, matrix, -zeta, opts)
    pair = pair_from_coefficients(q.support, zeta, a_plus, -big_b_plus, a_minus, -big_b_minus)
    return MFunctionTrace(lambdas, m_function(pair), q.support)


def m_trace_from_data(
    sd: ScatteringData,
    reconstruction: TransferMatrix | MReconstruction,
    S: float,
    lambdas,
    eps=DEFAULT_EPSILONS,
    tol: float = 1e-2,
) -> MFunctionTrace:
    """Data m-function at ``lambda`` off ``[0, inf)`` from reflection data.

    ``A(zeta)`` comes from the dispersion formula and the two reflection
    ratios from their Cauchy continuation, with ``zeta = sqrt(lambda)``
    in the upper half-plane. Then
    ``m = i zeta (c + 1 + rho_plus)/(c - 1 - rho_plus)`` where
    ``c = e^{4i zeta S}/A**2 + rho_plus*rho_minus + rho_minus``.
    """
    lambdas = np.atleast_1d(np.asarray(lambdas, dtype=complex))
    zeta = np.sqrt(lambdas)
    if np.any(zeta.imag <= 0):
        raise DomainError("Data m-function needs lambda off the half-line [0, inf).")
    mrec = reconstruction if isinstance(reconstruction, MReconstruction) else MReconstruction.from_matrix(reconstruction)
    ratios = continue_ratios(sd, mrec, zeta, S, eps=eps, tol=tol)
    common = np.exp(4j * zeta * S) / ratios.A ** 2 + ratios.rho_plus * ratios.rho_minus + ratios.rho_minus
    denominator = common - 1 - ratios.rho_plus
    tiny = np.abs(denominator) < POLE_GUARD
    if np.any(tiny):
        lam = complex(lambdas[np.argmax(tiny)])
        raise DomainError(
            "lambda is at a Dirichlet eigenvalue; m has a pole there.",
            fields={"lambda": str(lam), "nearest_free_zero": _nearest_zero_estimate(lam, S)},
        )
    m = 1j * zeta * (common + 1 + ratios.rho_plus) / denominator
    return MFunctionTrace(lambdas, m, S, diagnostics={"source": "continued"})


def m_trace_from_scattering(
    sd: ScatteringData,
    S: float,
    xi_window: tuple[float, float] = (0.5, 10.0),
    max_points: int = 40,
) -> MFunctionTrace:
    """Data m-function on ``lambda = xi**2`` from real-axis A/B samples.

    Samples too close to a pole of m are dropped; the trace uses the
    chordal metric.
    """
    if not sd.has_coefficients:
        raise DomainError("Scattering data carry no A/B traces.")
    xi = sd.xi[(sd.xi >= xi_window[0]) & (sd.xi <= xi_window[1])]
    if xi.size == 0:
        raise DomainError("No data frequencies inside the window.", fields={"window": list(xi_window)})
    if xi.size > max_points:
        xi = xi[np.unique(np.linspace(0, xi.size - 1, max_points).round().astype(int))]
    pair = reconstruct_W_at_S(sd, S, xi)
    w1, w2 = np.asarray(pair.w1), np.asarray(pair.w2)
    keep = np.abs(w2) > 1e-8 * np.maximum(1.0, np.abs(w1))
    if not keep.all():
        logger.warning("Dropped %d samples near poles of m", int((~keep).sum()))
    return MFunctionTrace(xi[keep] ** 2, -w1[keep] / w2[keep], S, metric="chordal", diagnostics={"dropped": int((~keep).sum())})


def _misfit_vector(model: np.ndarray, data: np.ndarray, metric: str) -> np.ndarray:
    diff = model - data
    if metric == "chordal":
        diff = diff / np.sqrt((1 + np.abs(model) ** 2) * (1 + np.abs(data) ** 2))
    return np.concatenate((diff.real, diff.imag))


def _second_difference(n: int) -> np.ndarray:
    if n < 3:
        return np.zeros((0, n))
    d = np.zeros((n - 2, n))
    for i in range(n - 2):
        d[i, i:i + 3] = (1.0, -2.0, 1.0)
    return d


class _Objective:
    """Residuals and finite-difference Jacobian for the cellwise fit."""

    def __init__(self, matrix, S, n_cells, target: MFunctionTrace, reg, opts):
        self.matrix = matrix
        self.S = S
        self.n_cells = n_cells
        self.target = target
        self.sqrt_reg = np.sqrt(reg)
        self.d2 = _second_difference(n_cells)
        self.opts = opts
        self.history: list[IterationRecord] = []

    def grid(self, cells: np.ndarray) -> PotentialGrid:
        return PotentialGrid.from_cells(self.S, cells, Interpolation.CONSTANT)

    def data_residual(self, cells):
        model = _m_values(self.grid(cells), self.matrix, self.target.lambdas, self.opts)
        return _misfit_vector(model, self.target.m_values, self.target.metric)

    def __call__(self, cells):
        return np.concatenate((self.data_residual(cells), self.sqrt_reg * (self.d2 @ cells)))

    def jacobian(self, cells):
        base = self(cells)

        def column(j):
            h = 1e-7 * max(1.0, abs(cells[j]))
            shifted = cells.copy()
            shifted[j] += h
            return (self(shifted) - base) / h

        jac = np.column_stack(ordered_map(column, range(cells.size), self.opts.threads))
        self.history.append(IterationRecord(
            len(self.history),
            float(base @ base),
            float(np.linalg.norm(2 * jac.T @ base)),
        ))
        return jac


def _stagnated(history: list[IterationRecord]) -> bool:
    if len(history) < STAGNATION_WINDOW:
        return False
    tail = [h.misfit for h in history[-STAGNATION_WINDOW:]]
    return all(b >= a for a, b in zip(tail, tail[1:]))


def recover_potential(
    sd: ScatteringData | None,
    matrix: TransferMatrix,
    S: float,
    n_cells: int,
    reg: float = 1e-4,
    target: MFunctionTrace | None = None,
    q0=None,
    max_iter: int = 200,
    restarts: int = 0,
    seed: int = 0,
    opts: SolverOptions | None = None,
) -> RecoveryResult:
    """Fit an ``n_cells`` piecewise-constant potential to m-function data.

    The objective is the m-misfit on the target's spectral parameters
    plus ``reg`` times the squared second difference of the cell values.
    Without an explicit ``target`` the data m-function is continued from
    ``sd`` onto ``sample_lambdas("mixed", 60)``; see :func:`m_trace_from_data`.

    Raises
    ------
    DomainError
        If ``reg <= 0`` or no target can be formed.
    """
    if reg <= 0:
        raise DomainError("Regularisation weight must be positive.", fields={"reg": reg})
    if n_cells < 1:
        raise DomainError("Need at least one cell.", fields={"cells": n_cells})
    opts = opts or SolverOptions()
    if target is None:
        if sd is None:
            raise DomainError("Recovery needs scattering data or an explicit m-trace.")
        target = m_trace_from_data(sd, matrix, S, sample_lambdas("mixed", 60))
    objective = _Objective(matrix, S, n_cells, target, reg, opts)
    start = np.zeros(n_cells) if q0 is None else np.asarray(q0, dtype=float).copy()
    if start.shape != (n_cells,):
        raise DomainError("Initial guess has the wrong number of cells.")

    rng = np.random.default_rng(seed)
    best = None
    stagnated = False
    for attempt in range(restarts + 1):
        objective.history = []
        x0 = start if attempt == 0 else best.x + rng.normal(scale=0.1 * max(1.0, np.abs(best.x).max()), size=n_cells)
        fit = least_squares(
            objective,
            x0,
            jac=objective.jacobian,
            method="trf",
            ftol=1e-14,
            xtol=1e-14,
            gtol=1e-14,
            max_nfev=max_iter,
        )
        history = list(objective.history)
        stagnated = _stagnated(history)
        if best is None or 2 * fit.cost < 2 * best.cost:
            best, best_history = fit, history
        logger.info("Recovery attempt %d: misfit %.3e after %d evaluations", attempt, 2 * fit.cost, fit.nfev)
        if not stagnated:
            break
        logger.warning("Misfit stagnated over %d iterations", STAGNATION_WINDOW)

    grid = objective.grid(best.x)
    return RecoveryResult(
        grid=grid,
        history=best_history,
        misfit=float(2 * best.cost),
        stagnated=stagnated,
        restarts_used=attempt,
        diagnostics={
            "status": int(best.status),
            "message": str(best.message),
            "metric": target.metric,
            "samples": int(target.lambdas.size),
            "data_misfit": float(np.sum(objective.data_residual(best.x) ** 2)),
        },
    )


def l_curve(
    target: MFunctionTrace,
    matrix: TransferMatrix,
    S: float,
    n_cells: int,
    regs,
    opts: SolverOptions | None = None,
    **kwargs,
) -> pd.DataFrame:
    """Data misfit and roughness of the fitted potential over a sweep of ``reg``."""
    rows = []
    for reg in regs:
        result = recover_potential(None, matrix, S, n_cells, reg=reg, target=target, opts=opts, **kwargs)
        cells = result.grid.values[:-1]
        rows.append({
            "reg": float(reg),
            "residual_norm": float(np.sqrt(result.diagnostics["data_misfit"])),
            "solution_seminorm": float(np.linalg.norm(_second_difference(n_cells) @ cells)),
        })
    return pd.DataFrame(rows, columns=["reg", "residual_norm", "solution_seminorm"])
