"""Unit tests for order-by-order perturbative corrections."""
import numpy as np
import pytest
from scipy.integrate import trapezoid

from services.greens import subtracted_diagonal
from services.krein import PointPerturbation
from services.perturb import (
    energy_corrections,
    energy_corrections_renormalized,
    energy_residuals,
    exact_level_root,
    order_scaling,
    textbook_energy_corrections,
    wavefunction_corrections,
    wavefunction_corrections_renormalized,
)
from services.renorm import RenormalizedPerturbation
from utils.exceptions import NodeLevel, NonRenormalizedProblem, Unsupported

SCAN = [1e-3, 3e-3, 1e-2, 3e-2, 1e-1]


def test_first_order_oscillator_ground_state(oscillator):
    result = energy_corrections(oscillator, PointPerturbation(0.0, 0.2), 0)
    assert result.e1 == pytest.approx(-0.2 / np.sqrt(np.pi))
    assert result.level_energy == pytest.approx(0.5)
    assert result.converged
    assert result.reliable


def test_first_order_is_negative_for_attractive_coupling(reflectionless):
    result = energy_corrections(reflectionless, PointPerturbation(0.7, 0.1), 0)
    assert result.e1 < 0
    assert result.e2 < 0


def test_free_line_has_no_corrections(free_line):
    with pytest.raises(NodeLevel):
        energy_corrections(free_line, PointPerturbation(0.0, 0.1), 0)


def test_node_level_rejected(oscillator):
    with pytest.raises(NodeLevel):
        energy_corrections(oscillator, PointPerturbation(0.0, 0.1), 1)


def test_degenerate_level_rejected(torus):
    with pytest.raises(Unsupported):
        energy_corrections(torus, PointPerturbation((0.0, 0.0), 0.1), 1)


def test_krein_and_textbook_second_order_agree(reflectionless, oscillator):
    pert = PointPerturbation(0.5, 0.1)
    krein = energy_corrections(reflectionless, pert, 0)
    e1, e2 = textbook_energy_corrections(reflectionless, pert, 0, tol=1e-9)
    assert e1 == pytest.approx(krein.e1)
    assert e2 == pytest.approx(krein.e2, rel=1e-5)


def test_second_order_is_exact_to_third_order(reflectionless):
    residuals = energy_residuals(reflectionless, 0.5, 0, SCAN)
    assert 2.7 <= order_scaling(SCAN, residuals) <= 3.3


def test_exact_level_root_continues_the_level(oscillator):
    root = exact_level_root(oscillator, PointPerturbation(0.3, 0.05), 0)
    assert 0.5 - 0.05 < root < 0.5


def test_order_scaling_recovers_power():
    alphas = np.array(SCAN)
    assert order_scaling(alphas, 7.0 * alphas ** 3) == pytest.approx(3.0)


def test_zeroth_order_wavefunction_is_level_up_to_phase(oscillator):
    pert = PointPerturbation(0.3, 0.05)
    for x in (-1.2, 0.0, 0.8):
        psi0, _, _ = wavefunction_corrections(oscillator, pert, 0, x)
        assert abs(psi0) == pytest.approx(abs(oscillator.discrete_values(x, 1)[0]))


def test_first_order_wavefunction_is_orthogonal_to_level(oscillator):
    pert = PointPerturbation(0.3, 0.05)
    grid = np.linspace(-8, 8, 641)
    psi1 = np.array([wavefunction_corrections(oscillator, pert, 0, x)[1] for x in grid])
    phi0 = oscillator.discrete_values(grid, 1)[:, 0]
    assert abs(trapezoid(np.conj(phi0) * psi1, grid)) < 1e-6


def test_regular_wavefunction_series_diverges_in_two_dimensions(torus):
    with pytest.raises(NonRenormalizedProblem):
        wavefunction_corrections(torus, PointPerturbation((0.0, 0.0), 0.1), 0, (1.0, 1.0))


def test_renormalized_first_order_on_torus(torus):
    rpert = RenormalizedPerturbation((0.4, 1.1), 10.0, 1.0)
    result = energy_corrections_renormalized(torus, rpert, 0)
    assert result.renormalized
    assert result.e1 == pytest.approx(-0.1 / (4 * np.pi ** 2))


def test_renormalized_series_needs_finite_coupling(torus):
    with pytest.raises(NonRenormalizedProblem):
        energy_corrections_renormalized(torus, RenormalizedPerturbation((0.0, 0.0), 0.0, 1.0), 0)
    with pytest.raises(NonRenormalizedProblem):
        wavefunction_corrections_renormalized(torus, RenormalizedPerturbation((0.0, 0.0), 0.0, 1.0), 0, (1.0, 1.0))


def test_result_record_fields(oscillator):
    record = energy_corrections(oscillator, PointPerturbation(0.0, 0.2), 0).to_record()
    assert set(record) >= {"k", "E_k", "E1", "E2", "guard", "reliable", "converged", "renormalized"}


def test_renormalized_wavefunction_orders_scale_with_coupling(torus):
    x = (2.0, 0.5)
    weak = wavefunction_corrections_renormalized(torus, RenormalizedPerturbation((0.4, 1.1), 20.0, 1.0), 0, x)
    strong = wavefunction_corrections_renormalized(torus, RenormalizedPerturbation((0.4, 1.1), 10.0, 1.0), 0, x)
    # ground state of the torus is the constant 1 / (2 pi)
    assert abs(strong[0]) == pytest.approx(1 / (2 * np.pi))
    assert strong[0] == pytest.approx(weak[0])
    assert strong[1] == pytest.approx(2 * weak[1], rel=1e-10)
    assert strong[2] == pytest.approx(4 * weak[2], rel=1e-10)
    assert abs(strong[1]) > 0


def test_renormalized_second_order_tracks_reference_scale(torus):
    a, x, inv_alpha_r = (0.4, 1.1), (2.0, 0.5), 10.0
    psi0_a, psi1_a, psi2_a = wavefunction_corrections_renormalized(torus, RenormalizedPerturbation(a, inv_alpha_r, 1.0), 0, x)
    psi0_b, psi1_b, psi2_b = wavefunction_corrections_renormalized(torus, RenormalizedPerturbation(a, inv_alpha_r, 2.5), 0, x)
    assert psi0_a == pytest.approx(psi0_b)
    assert psi1_a == pytest.approx(psi1_b, rel=1e-10)
    # only the subtracted diagonal moves with mu^2
    expected = -(psi1_a / inv_alpha_r) * subtracted_diagonal(torus, a, -1.0, -2.5)
    assert psi2_a - psi2_b == pytest.approx(expected, rel=1e-6)
