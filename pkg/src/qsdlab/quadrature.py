"""Composite Gauss-Legendre rules on piecewise panels."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

GL_ORDER = 16


@lru_cache(maxsize=None)
def _reference_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = leggauss(order)
    # map [-1, 1] -> [0, 1]
    return 0.5 * (nodes + 1.0), 0.5 * weights


def panel_rule(knots, order: int = GL_ORDER) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of a composite Gauss-Legendre rule.

    Parameters
    ----------
    knots : array_like
        Strictly increasing panel boundaries.
    order : int
        Number of Gauss points per panel.

    Returns
    -------
    nodes, weights : ndarray of shape (n_panels, order)
        Row ``i`` holds the rule on ``[knots[i], knots[i+1]]``.
    """
    knots = np.asarray(knots, dtype=float)
    if knots.ndim != 1 or knots.size < 2:
        raise ValueError("need at least two knots")
    widths = np.diff(knots)
    if np.any(widths <= 0):
        raise ValueError("knots must be strictly increasing")
    ref_x, ref_w = _reference_rule(order)
    nodes = knots[:-1, None] + widths[:, None] * ref_x[None, :]
    weights = widths[:, None] * ref_w[None, :]
    return nodes, weights


def uniform_knots(a: float, b: float, max_width: float) -> np.ndarray:
    n = max(1, int(np.ceil((b - a) / max_width)))
    return np.linspace(a, b, n + 1)


def halfline_rule(scale: float, upper: float, order: int = GL_ORDER,
                  fine_width: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Flattened rule on ``[0, upper]`` resolving features of size ``scale``.

    Panels have width ``fine_width`` (default ``scale / 4``) up to ``upper``.
    """
    width = fine_width if fine_width is not None else scale / 4.0
    knots = uniform_knots(0.0, upper, width)
    nodes, weights = panel_rule(knots, order)
    return nodes.ravel(), weights.ravel()


def integrate(f, knots, order: int = GL_ORDER) -> float:
    nodes, weights = panel_rule(knots, order)
    return float(np.sum(weights * f(nodes)))
