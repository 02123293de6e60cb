"""
Quadrature rules used by the curve solver and the 2D normalization check.
"""
from functools import lru_cache
from typing import List, Tuple

import numpy as np


@lru_cache(maxsize=64)
def _legendre(order: int):
    return np.polynomial.legendre.leggauss(order)


def gauss_legendre(order: int, lo: float, hi: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gauss-Legendre nodes and weights mapped to [lo, hi].

    Args:
        order: Number of nodes
        lo: Left end
        hi: Right end

    Returns:
        (nodes, weights)
    """
    x, w = _legendre(order)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def graded_panels(lo: float, hi: float, levels: int = 8, ratio: float = 0.2,
                  left: bool = True, right: bool = True) -> List[Tuple[float, float]]:
    """
    Split [lo, hi] into panels refined geometrically toward the chosen ends.

    Panel widths shrink by `ratio` at each level, so a logarithmic endpoint
    singularity is resolved to roughly ratio**levels of the interval length.
    """
    if not (left or right):
        return [(lo, hi)]
    if left and right:
        mid = 0.5 * (lo + hi)
        return (graded_panels(lo, mid, levels, ratio, left=True, right=False)
                + graded_panels(mid, hi, levels, ratio, left=False, right=True))
    length = hi - lo
    cuts = [length * ratio ** j for j in range(levels, 0, -1)]
    if left:
        edges = [lo] + [lo + c for c in cuts] + [hi]
    else:
        edges = [lo] + [hi - c for c in reversed(cuts)] + [hi]
    return list(zip(edges[:-1], edges[1:]))


def panel_rule(panels: List[Tuple[float, float]], order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule over a list of panels."""
    nodes, weights = zip(*(gauss_legendre(order, lo, hi) for lo, hi in panels))
    return np.concatenate(nodes), np.concatenate(weights)


def periodic_trapezoid(count: int) -> Tuple[np.ndarray, np.ndarray]:
    """Equispaced nodes on [0, 2*pi) with equal weights 2*pi/count."""
    t = 2.0 * np.pi * np.arange(count) / count
    return t, np.full(count, 2.0 * np.pi / count)


@lru_cache(maxsize=16)
def kress_log_weights(half_count: int) -> np.ndarray:
    """
    Weights R[i, j] for int_0^{2pi} ln(4 sin^2((t_i - s)/2)) f(s) ds ~ sum_j R[i, j] f(t_j).

    Nodes are t_j = pi j / half_count, j = 0 .. 2*half_count - 1. The rule is
    spectrally accurate for smooth periodic f.
    """
    n = half_count
    t = np.pi * np.arange(2 * n) / n
    diff = t[:, None] - t[None, :]
    m = np.arange(1, n)
    cos_sum = np.cos(diff[..., None] * m) @ (1.0 / m)
    return -(2.0 * np.pi / n) * cos_sum - (np.pi / n ** 2) * np.cos(n * diff)

