"""
Bracketed root search for secular functions with simple poles.

Between consecutive poles the secular function decreases from +inf to -inf,
so every gap between poles holds exactly one root. The search brackets each
gap from inside and polishes with Brent's method.
"""
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from utils.constants import BRANCH_POINT_PROBES, GROUND_STATE_MAX_DOUBLINGS
from utils.exceptions import PoleProximity, WindowTooNarrow
from utils.logger import get_logger

logger = get_logger(__name__)

_POLE_OFFSETS = (1e-2, 1e-4, 1e-6)


@dataclass(frozen=True)
class Root:
    """A polished root with the poles enclosing its interval (None for open ends)."""
    energy: float
    bracket: Tuple[float, float]
    lower_pole: Optional[float]
    upper_pole: Optional[float]


def _safe(phi: Callable[[float], float], energy: float) -> Optional[float]:
    try:
        return float(phi(energy))
    except PoleProximity:
        return None


def _left_end(phi, lo, hi, scale) -> Optional[float]:
    """Point just above lo (or far below hi when lo is -inf) where phi > 0."""
    if lo == -np.inf:
        step = scale
        start = hi if np.isfinite(hi) else 0.0
        for _ in range(GROUND_STATE_MAX_DOUBLINGS):
            energy = start - step
            value = _safe(phi, energy)
            if value is not None and value > 0:
                return energy
            step *= 2.0
        return None
    gap = (hi - lo) if np.isfinite(hi) else scale
    for offset in _POLE_OFFSETS:
        energy = lo + gap * offset
        value = _safe(phi, energy)
        if value is not None and value > 0:
            return energy
    return None


def _right_end(phi, left, hi, is_pole, scale) -> Optional[float]:
    """Point just below hi where phi < 0."""
    gap = hi - left
    offsets = [gap * d for d in _POLE_OFFSETS] if is_pole else [scale * d for d in BRANCH_POINT_PROBES]
    for offset in offsets:
        energy = hi - offset
        if energy <= left:
            continue
        value = _safe(phi, energy)
        if value is not None and value < 0:
            return energy
    return None


def find_roots(
    phi: Callable[[float], float],
    poles: Sequence[float],
    infimum: float,
    window: Tuple[float, float],
    energy_scale: float,
    tol: float,
    lower_sign: float = 1.0
) -> List[Root]:
    """
    Locate every root of a pole-separated decreasing function inside a window.

    Args:
        phi: Secular function, real for real energies
        poles: Sorted distinct pole energies; should include the first pole above the window
        infimum: Continuum bottom (inf for purely discrete problems)
        window: (Emin, Emax), Emax at most the infimum
        energy_scale: Natural energy unit used for probing
        tol: Absolute root tolerance relative to max(1, |E|)
        lower_sign: Sign of phi as E -> -inf

    Returns:
        Roots sorted by energy

    Raises:
        WindowTooNarrow: a root lies below Emin
    """
    emin, emax = window
    poles = sorted(float(p) for p in poles)
    edges = [-np.inf] + poles
    uppers = poles + ([infimum] if np.isfinite(infimum) and (not poles or infimum > poles[-1]) else [])
    roots: List[Root] = []

    for lo, hi in zip(edges, uppers):
        if lo >= emax:
            break
        if lo == -np.inf and lower_sign <= 0:
            continue
        is_pole = hi in poles
        left = _left_end(phi, lo, hi, energy_scale)
        if left is None:
            logger.debug("root_bracket_rejected", side="left", lower=lo, upper=hi)
            continue
        right = _right_end(phi, left, hi, is_pole, energy_scale)
        if right is None:
            logger.debug("root_bracket_rejected", side="right", lower=lo, upper=hi)
            continue
        scale = max(1.0, abs(left), abs(right))
        energy = float(brentq(phi, left, right, xtol=tol * scale, rtol=4 * np.finfo(float).eps, maxiter=500))
        if energy > emax:
            continue
        if energy < emin:
            raise WindowTooNarrow(
                "a root lies below the window",
                {"root": energy, "Emin": emin}
            )
        roots.append(Root(
            energy=energy,
            bracket=(float(left), float(right)),
            lower_pole=None if lo == -np.inf else lo,
            upper_pole=hi if is_pole else None,
        ))
        logger.debug("root_polished", energy=energy, lower=left, upper=right)
    return roots


def sample_monotone(phi: Callable[[float], float], bracket: Tuple[float, float], samples: int = 32) -> bool:
    """True when phi is strictly decreasing on sampled points of the bracket."""
    grid = np.linspace(bracket[0], bracket[1], samples)
    values = np.array([phi(e) for e in grid])
    return bool(np.all(np.diff(values) < 0))
