"""Euclidean projection onto budget sets."""

from __future__ import annotations

import numpy as np


def project_simplex(v: np.ndarray, total: float) -> np.ndarray:
    """Project ``v`` onto ``{x >= 0, sum(x) == total}`` by the sort-and-threshold rule."""
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        return v.copy()
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - total
    ind = np.arange(1, v.size + 1)
    keep = u - css / ind > 0
    # The largest entry always qualifies; cancellation can hide it for tiny totals.
    keep[0] = True
    rho = np.nonzero(keep)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def project_capped_simplex(v: np.ndarray, budget: float) -> np.ndarray:
    """Project ``v`` onto ``{x >= 0, sum(x) <= budget}``.

    Interior points are kept; only when clipping at zero still overspends is
    the point moved onto the face ``sum(x) == budget``.
    """
    clipped = np.maximum(np.asarray(v, dtype=float), 0.0)
    if clipped.sum() <= budget:
        return clipped
    if budget <= 0:
        return np.zeros_like(clipped)
    x = project_simplex(v, budget)
    # Rounding in the threshold can overshoot by an ulp or two.
    s = x.sum()
    if s > budget:
        x *= budget / s
    return x
