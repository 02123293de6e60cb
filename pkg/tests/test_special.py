"""Tests for the in-house modified Bessel functions against scipy."""
import cmath

import numpy as np
import pytest
from scipy import special as sp

from utils.exceptions import InvalidParameter
from utils.special import i0, k0, k1


def test_k0_at_one():
    assert k0(1.0) == pytest.approx(0.42102443824070834, rel=1e-12)
    assert isinstance(k0(1.0), float)


@pytest.mark.parametrize("order,func", [(0, k0), (1, k1)])
def test_real_arguments_match_scipy(order, func):
    z = np.logspace(-6, np.log10(60.0), 400)
    np.testing.assert_allclose(func(z), sp.kv(order, z), rtol=1e-12)


@pytest.mark.parametrize("phase", [0.7, -1.3, 1.5])
@pytest.mark.parametrize("order,func", [(0, k0), (1, k1)])
def test_complex_arguments_match_scipy(order, func, phase):
    # covers every range, including the middle one where |z| lies in [2, 25)
    z = np.logspace(-3, np.log10(60.0), 300) * np.exp(1j * phase)
    np.testing.assert_allclose(func(z), sp.kv(order, z), rtol=1e-12)


def test_middle_range_near_imaginary_axis():
    z = np.array([2.0 + 0j, 3j + 0.01, 5.0 - 12.0j, 0.1 + 24.9j])
    np.testing.assert_allclose(k0(z), sp.kv(0, z), rtol=1e-12)
    np.testing.assert_allclose(k1(z), sp.kv(1, z), rtol=1e-12)


def test_i0_matches_scipy():
    x = np.linspace(-40.0, 40.0, 161)
    np.testing.assert_allclose(i0(x), sp.i0(x), rtol=1e-12)


@pytest.mark.parametrize("z", [0.0, -1.0, -2.0 + 1.0j, 3j])
def test_nonpositive_real_part_rejected(z):
    with pytest.raises(InvalidParameter):
        k0(z)


def test_free_plane_kernel_at_complex_energy(free_plane):
    energy = -1.0 + 16.0j
    kappa = cmath.sqrt(-energy)
    r = np.hypot(0.7, -0.4)
    expected = sp.kv(0, kappa * r) / (2 * np.pi)
    value = free_plane.closed_form((0.7, 0.0), (0.0, 0.4), energy)
    assert value == pytest.approx(expected, rel=1e-12)
