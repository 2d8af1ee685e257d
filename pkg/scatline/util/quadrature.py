"""Gauss-Legendre panel rules.

Integrals over a potential are split at its nodes so each panel sees a
smooth integrand; oscillatory integrands are further subdivided so that
no panel spans more than about one radian of phase.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_legendre

DEFAULT_ORDER = 20


@lru_cache(maxsize=8)
def _reference_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = roots_legendre(order)
    return nodes, weights


def panel_rule(
    breakpoints,
    max_freq: float = 0.0,
    order: int = DEFAULT_ORDER,
) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights over ``breakpoints``.

    Parameters
    ----------
    breakpoints: array_like
        Increasing panel edges; the integrand should be smooth between them.
    max_freq: float, default 0.0
        Largest angular frequency present in the integrand. Panels are
        subdivided so that ``max_freq * width`` stays below one.
    order: int, default 20
        Points per (sub)panel.
    """
    edges = np.asarray(breakpoints, dtype=float)
    ref_x, ref_w = _reference_rule(order)
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        pieces = max(1, int(np.ceil(abs(max_freq) * (b - a))))
        sub = np.linspace(a, b, pieces + 1)
        half = 0.5 * np.diff(sub)
        mid = 0.5 * (sub[:-1] + sub[1:])
        xs.append((mid[:, None] + half[:, None] * ref_x[None, :]).ravel())
        ws.append((half[:, None] * ref_w[None, :]).ravel())
    if not xs:
        return np.empty(0), np.empty(0)
    return np.concatenate(xs), np.concatenate(ws)


def potential_panels(q, include_origin: bool = True) -> np.ndarray:
    """Panel edges covering the support of ``q``, split at nodes and at 0."""
    edges = [q.nodes]
    if include_origin and q.nodes[0] < 0 < q.nodes[-1]:
        edges.append(np.array([0.0]))
    return np.unique(np.concatenate(edges))
