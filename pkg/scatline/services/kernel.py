"""ODE propagation kernel for ``-y'' + q y = lambda y``.

Every service builds on the 2x2 propagator computed here. On segments
where ``q`` is constant the propagator has the closed form

    [[cos(kh), sin(kh)/k], [-k sin(kh), cos(kh)]],   k**2 = lambda - q,

which is entire in ``lambda`` and is evaluated for whole arrays of
spectral parameters at once. Piecewise-linear potentials go through an
adaptive Runge-Kutta pair instead. The transfer condition at ``x = 0``
is never applied implicitly by :func:`propagate`; the line-level helpers
apply ``M`` (or its inverse) whenever a path crosses the origin, with
``x = 0`` itself read as ``0+``.
"""
from __future__ import annotations

import logging

import numpy as np
from scipy.integrate import solve_ivp

from ..errors import DomainError, NumericalError
from ..models import (
    Interpolation,
    PotentialGrid,
    Propagation,
    Side,
    SolverOptions,
    StateVector,
    TransferMatrix,
)
from ..util.parallel import ordered_map

logger = logging.getLogger(__name__)

DEFAULT_OPTIONS = SolverOptions()


def resolve_method(q: PotentialGrid, opts: SolverOptions) -> Propagation:
    """Pick the concrete propagation method for ``q``."""
    if opts.method is Propagation.AUTO:
        return Propagation.EXACT if q.interpolation is Interpolation.CONSTANT else Propagation.RK
    if opts.method is Propagation.EXACT and q.interpolation is Interpolation.LINEAR:
        raise DomainError("Exact propagation needs a piecewise-constant potential.")
    return opts.method


def cell_propagator(lam, qval: float, h: float) -> np.ndarray:
    """Closed-form propagator over a width ``h`` of constant potential.

    ``h`` may be negative for backward propagation. The result has
    shape ``lam.shape + (2, 2)``.
    """
    lam = np.asarray(lam, dtype=complex)
    k2 = lam - qval
    kh = np.sqrt(k2) * h
    c = np.cos(kh)
    s = h * np.sinc(kh / np.pi)
    out = np.empty(lam.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = c
    out[..., 0, 1] = s
    out[..., 1, 0] = -k2 * s
    out[..., 1, 1] = c
    return out


def _rk_single(q: PotentialGrid, lam: complex, a: float, b: float, qval, opts: SolverOptions) -> np.ndarray:
    if qval is None:
        def rhs(x, y):
            shift = q(x) - lam
            return np.array([y[1], shift * y[0], y[3], shift * y[2]])
    else:
        shift = qval - lam

        def rhs(x, y):
            return np.array([y[1], shift * y[0], y[3], shift * y[2]])

    sol = solve_ivp(
        rhs,
        (a, b),
        np.array([1, 0, 0, 1], dtype=complex),
        method="DOP853",
        rtol=opts.rtol,
        atol=opts.atol,
    )
    if not sol.success:
        raise NumericalError(
            "Runge-Kutta integration failed.",
            fields={"lambda": str(lam), "interval": [a, b], "message": sol.message},
        )
    y = sol.y[:, -1]
    return np.array([[y[0], y[2]], [y[1], y[3]]])


def _rk_block(q, lam: np.ndarray, a: float, b: float, qval, opts: SolverOptions) -> np.ndarray:
    flat = lam.ravel()
    blocks = ordered_map(lambda l: _rk_single(q, l, a, b, qval, opts), flat, opts.threads)
    return np.asarray(blocks).reshape(lam.shape + (2, 2))


def propagator(
    q: PotentialGrid,
    lam,
    a: float,
    b: float,
    opts: SolverOptions | None = None,
) -> np.ndarray:
    """Propagator from ``a`` to ``b`` on one side of the origin.

    Raises
    ------
    DomainError
        If ``[a, b]`` straddles 0.
    NumericalError
        If the Runge-Kutta path fails.
    """
    if a < 0 < b or b < 0 < a:
        raise DomainError(
            "Propagation interval straddles the origin; apply the transfer condition explicitly.",
            fields={"from_x": a, "to_x": b},
        )
    opts = opts or DEFAULT_OPTIONS
    lam = np.asarray(lam, dtype=complex)
    total = np.broadcast_to(np.eye(2, dtype=complex), lam.shape + (2, 2)).copy()
    if a == b:
        return total
    method = resolve_method(q, opts)
    edges = np.concatenate(([a], q.breakpoints(a, b), [b]))
    for x0, x1 in zip(edges[:-1], edges[1:]):
        if q.is_zero_on(x0, x1):
            step = cell_propagator(lam, 0.0, x1 - x0)
        elif q.interpolation is Interpolation.CONSTANT:
            qval = q(0.5 * (x0 + x1))
            if method is Propagation.EXACT:
                step = cell_propagator(lam, qval, x1 - x0)
            else:
                step = _rk_block(q, lam, x0, x1, qval, opts)
        else:
            step = _rk_block(q, lam, x0, x1, None, opts)
        total = step @ total
    return total


def line_propagator(
    q: PotentialGrid,
    matrix: TransferMatrix,
    lam,
    a: float,
    b: float,
    opts: SolverOptions | None = None,
) -> np.ndarray:
    """Propagator from ``a`` to ``b`` across the origin if needed.

    Points with ``x >= 0`` are on the plus side. Crossing from minus to
    plus applies ``M``; crossing back applies ``M^{-1}``.
    """
    if (a < 0) == (b < 0):
        return propagator(q, lam, a, b, opts)
    jump = matrix.as_array() if a < 0 else matrix.inverse().as_array()
    return propagator(q, lam, 0.0, b, opts) @ jump @ propagator(q, lam, a, 0.0, opts)


def propagate(
    q: PotentialGrid,
    zeta: complex,
    from_x: float,
    to_x: float,
    init: StateVector,
    opts: SolverOptions | None = None,
) -> StateVector:
    """Carry ``init`` from ``from_x`` to ``to_x`` with ``lambda = zeta**2``."""
    if init.x != from_x:
        raise DomainError("Initial state is not located at from_x.", fields={"init_x": init.x, "from_x": from_x})
    p = propagator(q, complex(zeta) ** 2, from_x, to_x, opts)
    y, yp = p @ init.as_array()
    if to_x > 0:
        side = Side.PLUS
    elif to_x < 0:
        side = Side.MINUS
    else:
        side = init.side
    return StateVector(complex(y), complex(yp), to_x, zeta, side)


def apply_transfer(matrix: TransferMatrix, s: StateVector) -> StateVector:
    """Map ``(y, y')(0-)`` to ``(y, y')(0+)``."""
    if s.x != 0 or s.side is Side.PLUS:
        raise DomainError("Transfer applies to a state at 0-.", fields={"x": s.x, "side": s.side.value})
    y, yp = matrix.as_array() @ s.as_array()
    return StateVector(complex(y), complex(yp), 0.0, s.zeta, Side.PLUS)


def apply_transfer_inverse(matrix: TransferMatrix, s: StateVector) -> StateVector:
    """Map ``(y, y')(0+)`` back to ``(y, y')(0-)``."""
    if s.x != 0 or s.side is Side.MINUS:
        raise DomainError("Inverse transfer applies to a state at 0+.", fields={"x": s.x, "side": s.side.value})
    y, yp = matrix.inverse().as_array() @ s.as_array()
    return StateVector(complex(y), complex(yp), 0.0, s.zeta, Side.MINUS)


def wronskian(u: StateVector, v: StateVector) -> complex:
    """``u.y * v.yp - v.y * u.yp`` for states at the same point."""
    same_side = u.side is Side.NONE or v.side is Side.NONE or u.side is v.side
    if u.x != v.x or not same_side:
        raise DomainError("Wronskian needs states at the same evaluation point.", fields={"u_x": u.x, "v_x": v.x})
    if u.zeta != v.zeta:
        raise DomainError("Wronskian needs states with the same spectral parameter.")
    return u.y * v.yp - v.y * u.yp


def zeta_from_lambda(lam) -> np.ndarray:
    """Principal square root, branch cut on the negative real axis."""
    return np.sqrt(np.asarray(lam, dtype=complex))
