"""Unit tests for the bracketed secular-equation root search."""
import numpy as np
import pytest

from services.root_finder import find_roots, sample_monotone
from utils.exceptions import PoleProximity, WindowTooNarrow

POLES = [1.0, 2.0, 3.0]
WEIGHTS = [0.5, 0.3, 0.8]


def secular(alpha):
    """1/alpha - sum w_n / (E_n - E), decreasing between poles."""
    def value(energy):
        return 1.0 / alpha - sum(w / (p - energy) for p, w in zip(POLES, WEIGHTS))
    return value


def test_one_root_per_gap():
    phi = secular(2.0)
    roots = find_roots(phi, POLES, float("inf"), (-np.inf, 3.0), 1.0, 1e-12)
    assert len(roots) == 3
    assert roots[0].energy < 1.0 < roots[1].energy < 2.0 < roots[2].energy < 3.0
    for root in roots:
        assert abs(phi(root.energy)) < 1e-8
        lo, hi = root.bracket
        assert lo <= root.energy <= hi


def test_root_pole_bookkeeping():
    roots = find_roots(secular(2.0), POLES, float("inf"), (-np.inf, 3.0), 1.0, 1e-12)
    assert roots[0].lower_pole is None
    assert roots[0].upper_pole == 1.0
    assert (roots[1].lower_pole, roots[1].upper_pole) == (1.0, 2.0)


def test_window_top_drops_higher_roots():
    roots = find_roots(secular(2.0), POLES, float("inf"), (-np.inf, 1.0), 1.0, 1e-12)
    assert len(roots) == 1


def test_root_below_window_is_reported():
    phi = secular(2.0)
    lowest = find_roots(phi, POLES, float("inf"), (-np.inf, 3.0), 1.0, 1e-12)[0].energy
    with pytest.raises(WindowTooNarrow) as exc:
        find_roots(phi, POLES, float("inf"), (lowest + 0.1, 3.0), 1.0, 1e-12)
    assert exc.value.context["root"] == pytest.approx(lowest)


def test_repulsive_sign_skips_lowest_gap():
    phi = secular(-2.0)
    roots = find_roots(phi, POLES, float("inf"), (-np.inf, 3.0), 1.0, 1e-12, lower_sign=-1.0)
    assert all(r.energy > 1.0 for r in roots)
    assert len(roots) == 2


def test_continuum_edge_without_root():
    # 1/alpha - 1/(2 sqrt(-E)) on the free line has its only root at -alpha^2/4
    def phi(energy):
        return 1.0 / 2.0 - 1.0 / (2.0 * np.sqrt(-energy))

    roots = find_roots(phi, [], 0.0, (-np.inf, 0.0), 1.0, 1e-13)
    assert len(roots) == 1
    assert roots[0].energy == pytest.approx(-1.0, abs=1e-10)
    assert roots[0].upper_pole is None


def test_guard_band_errors_are_skipped():
    phi = secular(2.0)

    def guarded(energy):
        if any(abs(energy - p) < 1e-3 for p in POLES):
            raise PoleProximity("guard", {"E": energy})
        return phi(energy)

    roots = find_roots(guarded, POLES, float("inf"), (-np.inf, 3.0), 1.0, 1e-12)
    assert len(roots) == 3


def test_sample_monotone():
    phi = secular(2.0)
    assert sample_monotone(phi, (1.01, 1.99))
    assert not sample_monotone(lambda e: np.sin(5 * e), (0.0, 3.0))
