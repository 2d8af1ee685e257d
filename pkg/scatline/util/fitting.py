"""Small least-squares fits used by the inverse and validation services."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NumericalError


@dataclass(frozen=True)
class LinearFit:
    """Coefficients of a least-squares fit and the RMS of its residual."""
    coefficients: np.ndarray
    residual: float


def fit_basis(columns: list, y) -> LinearFit:
    """Least-squares fit of ``y`` (real or complex) on the given basis columns."""
    y = np.asarray(y)
    design = np.column_stack(columns).astype(complex if np.iscomplexobj(y) else float)
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    return LinearFit(coef, float(np.sqrt(np.mean(np.abs(resid) ** 2))))


def inverse_power_fit(x, y, degree: int) -> LinearFit:
    """Fit ``y ~ c0 + c1/x + ... + c_degree/x**degree``."""
    u = 1.0 / np.asarray(x, dtype=float)
    return fit_basis([u ** p for p in range(degree + 1)], y)


def loglog_slope(x, y) -> float:
    """Slope of ``log y`` against ``log x``; non-positive ``y`` are dropped."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (y > 0) & np.isfinite(y) & (x > 0)
    if keep.sum() < 2:
        raise NumericalError("Too few positive samples for a log-log slope.", fields={"samples": int(keep.sum())})
    slope, _ = np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)
    return float(slope)


def envelope_slope(x, y, n_bins: int = 12) -> float:
    """Log-log slope of the per-bin maximum of an oscillating positive signal."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    edges = np.geomspace(x.min(), x.max() * (1 + 1e-12), n_bins + 1)
    centers, peaks = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        inside = (x >= lo) & (x < hi)
        if inside.any():
            centers.append(np.sqrt(lo * hi))
            peaks.append(y[inside].max())
    return loglog_slope(centers, peaks)
