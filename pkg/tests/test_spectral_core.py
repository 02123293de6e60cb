"""Unit tests for the spectral data model and the problem catalog."""
import numpy as np
import pytest
from scipy.integrate import trapezoid

from services.spectral_core import (
    Units,
    energy_density,
    eval_channel,
    eval_level,
    group_levels,
    make_problem,
    resynthesize,
)
from utils.exceptions import CutViolation, DimensionMismatch, IndexOutOfRange, InvalidParameter


def test_default_units_have_unit_kinetic_factor():
    assert Units().kinetic == pytest.approx(1.0)
    assert Units(hbar=1.0, mass=1.0).kinetic == pytest.approx(0.5)


def test_decay_rate_needs_side_on_cut():
    units = Units()
    with pytest.raises(CutViolation):
        units.decay_rate(1.0)
    assert units.decay_rate(4.0, side="+") == pytest.approx(-2j)
    assert units.decay_rate(4.0, side="-") == pytest.approx(2j)
    assert units.decay_rate(-4.0) == pytest.approx(2.0)


def test_make_problem_rejects_unknown_label():
    with pytest.raises(InvalidParameter):
        make_problem("double-well")


def test_make_problem_rejects_missing_and_extra_parameters():
    with pytest.raises(InvalidParameter):
        make_problem("reflectionless")
    with pytest.raises(InvalidParameter):
        make_problem("free-line", kappa=1.0)
    with pytest.raises(InvalidParameter):
        make_problem("reflectionless", kappa=-1.0)


def test_free_line_has_no_levels(free_line):
    assert free_line.level_count == 0
    assert free_line.infimum == 0.0
    assert free_line.nearest_level(-1.0) is None
    with pytest.raises(IndexOutOfRange):
        free_line.level(0)


def test_reflectionless_ground_state(reflectionless):
    level = reflectionless.level(0)
    assert level.energy == pytest.approx(-1.0)
    x = np.linspace(-30, 30, 6001)
    density = np.abs(reflectionless.discrete_values(x, 1)[:, 0]) ** 2
    assert trapezoid(density, x) == pytest.approx(1.0, abs=1e-8)
    assert eval_level(reflectionless, 0, 0.0) == pytest.approx(np.sqrt(0.5))
    with pytest.raises(IndexOutOfRange):
        eval_level(reflectionless, 1, 0.0)


def test_oscillator_levels_are_orthonormal(oscillator):
    energies = oscillator.discrete_energies(6)
    assert energies == pytest.approx([0.5, 1.5, 2.5, 3.5, 4.5, 5.5])
    x = np.linspace(-12, 12, 4801)
    phis = oscillator.discrete_values(x, 6)
    gram = trapezoid(np.conj(phis)[:, :, None] * phis[:, None, :], x, axis=0)
    assert np.abs(gram - np.eye(6)).max() < 1e-8


def test_oscillator_count_below(oscillator):
    assert oscillator.count_below(0.4) == 0
    assert oscillator.count_below(0.5) == 1
    assert oscillator.count_below(3.0) == 3


def test_torus_levels_and_degeneracy(torus):
    groups = torus.distinct_levels(1.0)
    assert [g.energy for g in groups] == pytest.approx([0.0, 1.0, 2.0])
    assert [g.multiplicity for g in groups] == [1, 4, 4]
    assert torus.infimum == float("inf")
    assert torus.area == pytest.approx(4 * np.pi ** 2)


def test_torus_point_needs_two_coordinates(torus):
    with pytest.raises(DimensionMismatch):
        torus.point(0.5)
    assert torus.point((0.5, 1.0)) == pytest.approx([0.5, 1.0])


def test_group_levels_merges_equal_energies():
    groups = group_levels(np.array([0.0, 1.0, 1.0, 1.0, 2.0]))
    assert [(g.energy, g.start, g.multiplicity) for g in groups] == [(0.0, 0, 1), (1.0, 1, 3), (2.0, 4, 1)]


def test_level_residue_sums_degenerate_modes(torus):
    group = torus.distinct_levels(1.0)[1]
    residue = torus.level_residue(group, (0.3, 0.4), (0.3, 0.4))
    assert residue.real == pytest.approx(4.0 / torus.area)


def test_free_line_closed_form(free_line):
    assert free_line.closed_form(0.0, 0.0, -1.0) == pytest.approx(0.5)
    assert free_line.closed_form(1.0, -0.5, -4.0) == pytest.approx(np.exp(-3.0) / 4.0)


def test_reflectionless_closed_form_on_diagonal(reflectionless):
    # G0(0, 0 | -s^2) = s / (2 (s^2 - 1)) for kappa = 1
    assert reflectionless.closed_form(0.0, 0.0, -4.0).real == pytest.approx(1.0 / 3.0)


def test_channel_eigenfunction_is_plane_wave_on_free_line(free_line):
    assert eval_channel(free_line, 0, 2.0, 0.25) == pytest.approx(np.exp(0.5j))
    with pytest.raises(IndexOutOfRange):
        eval_channel(free_line, 1, 2.0, 0.25)


def test_energy_density_free_line(free_line):
    # (e^{ir} + e^{-ir}) / (2 pi * 2)
    r = 0.8
    value = energy_density(free_line.channels[0], 1.0, r, 0.0)
    assert value == pytest.approx(np.cos(r) / (2 * np.pi))


def test_reflectionless_channel_is_orthogonal_to_ground_state(reflectionless):
    x = np.linspace(-30, 30, 6001)
    ground = reflectionless.discrete_values(x, 1)[:, 0]
    chi = reflectionless.channels[0].eigenfunction(1.3, x)
    assert abs(trapezoid(np.conj(ground) * chi, x)) < 1e-8


def test_resynthesis_reflectionless_gaussian(reflectionless):
    x = np.linspace(-15, 15, 1201)
    result = resynthesize(reflectionless, lambda t: np.exp(-t ** 2), x)
    assert result["l2_error"] < 1e-3
    assert len(result["discrete_coefficients"]) == 1


def test_reference_energy_lies_below_spectrum(oscillator, reflectionless):
    assert oscillator.reference_energy() < 0.5
    assert reflectionless.reference_energy() < -1.0
