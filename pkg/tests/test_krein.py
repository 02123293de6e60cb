"""Unit tests for the rank-one Krein solver in one dimension."""
import numpy as np
import pytest
from scipy.integrate import quad

from services.krein import (
    PointPerturbation,
    bound_wavefunction,
    find_bound_states,
    full_green,
    generalized_eigenfunction,
    interlacing_table,
    phi,
    resolve_window,
    verify_interlacing,
    verify_pole_cancellation,
)
from services.greens import green0
from utils.exceptions import InvalidParameter, NonRenormalizedProblem, NotARoot, Unsupported, ZeroOfPhi

REFLECTIONLESS_CENTER_ROOT = -((1 + np.sqrt(65)) / 8) ** 2


def test_zero_coupling_rejected():
    with pytest.raises(InvalidParameter):
        PointPerturbation(0.0, 0.0)


def test_principal_function_definition(reflectionless):
    pert = PointPerturbation(0.4, 0.5)
    expected = 1 / 0.5 - green0(reflectionless, 0.4, 0.4, -2.0).value
    assert phi(reflectionless, pert, -2.0) == pytest.approx(expected.real)


def test_free_line_single_bound_state(free_line):
    states = find_bound_states(free_line, PointPerturbation(0.0, 2.0), tol=1e-12)
    assert len(states) == 1
    assert states[0].energy == pytest.approx(-1.0, abs=1e-10)
    assert states[0].kind == "shifted"
    assert states[0].e_old is None


def test_free_line_repulsive_has_no_bound_state(free_line):
    assert find_bound_states(free_line, PointPerturbation(0.0, -2.0)) == []


def test_reflectionless_center_closed_form(reflectionless):
    states = find_bound_states(reflectionless, PointPerturbation(0.0, 0.5))
    assert len(states) == 1
    assert states[0].energy == pytest.approx(REFLECTIONLESS_CENTER_ROOT, abs=1e-6)
    assert states[0].residual < 1e-8


def test_reflectionless_offset_has_two_states(reflectionless):
    states = find_bound_states(reflectionless, PointPerturbation(1.0, 0.5))
    energies = sorted(s.energy for s in states)
    assert len(energies) == 2
    assert energies[0] < -1.0 < energies[1] < 0.0
    assert states[1].e_old is None
    assert states[0].e_old == pytest.approx(-1.0)


def test_bound_wavefunction_free_line(free_line):
    pert = PointPerturbation(0.0, 2.0)
    state = find_bound_states(free_line, pert, tol=1e-12)[0]
    # psi(x) = exp(-|x|) for the unit well
    assert abs(state.wavefunction(0.7)) == pytest.approx(np.exp(-0.7), rel=1e-8)
    assert state.normalization == pytest.approx(0.25, rel=1e-8)


def test_bound_wavefunction_is_normalized(reflectionless):
    pert = PointPerturbation(1.0, 0.5)
    for state in find_bound_states(reflectionless, pert):
        def density(t):
            return abs(state.wavefunction(t)) ** 2
        left, _ = quad(density, -np.inf, 1.0, epsabs=1e-11)
        right, _ = quad(density, 1.0, np.inf, epsabs=1e-11)
        assert left + right == pytest.approx(1.0, abs=1e-6)


def test_bound_wavefunction_checks_root(reflectionless):
    with pytest.raises(NotARoot):
        bound_wavefunction(reflectionless, PointPerturbation(0.0, 0.5), -2.0, 0.3)


def test_full_green_rejects_eigenvalue(free_line):
    pert = PointPerturbation(0.0, 2.0)
    with pytest.raises(ZeroOfPhi):
        full_green(free_line, pert, 0.3, -0.2, -1.0)


def test_full_green_is_symmetric(reflectionless):
    pert = PointPerturbation(0.5, 0.7)
    forward = full_green(reflectionless, pert, 0.1, 1.4, -2.2)
    backward = full_green(reflectionless, pert, 1.4, 0.1, -2.2)
    assert forward == pytest.approx(backward, rel=1e-10)


def test_two_dimensional_problem_needs_renormalization(torus):
    with pytest.raises(NonRenormalizedProblem):
        find_bound_states(torus, PointPerturbation((0.0, 0.0), 1.0), (-np.inf, 0.5))


def test_purely_discrete_problem_needs_window_top(oscillator):
    with pytest.raises(InvalidParameter):
        resolve_window(oscillator, None)
    assert resolve_window(oscillator, (-np.inf, 3.0)) == (-np.inf, 3.0)


def test_oscillator_odd_levels_unchanged(oscillator):
    states = find_bound_states(oscillator, PointPerturbation(0.0, 3.0), (-np.inf, 6.0))
    nodes = [s for s in states if s.kind == "unchanged-node"]
    assert [s.energy for s in nodes] == pytest.approx([1.5, 3.5, 5.5], abs=1e-9)
    shifted = [s for s in states if s.kind == "shifted"]
    assert shifted[0].energy < 0.5
    assert 1.5 < shifted[1].energy < 2.5


@pytest.mark.parametrize("alpha", [0.3, 3.0, 9.5])
def test_oscillator_interlacing(oscillator, alpha):
    rows = verify_interlacing(oscillator, PointPerturbation(0.0, alpha), depth=6)
    assert len(rows) == 6
    assert all(row["holds"] for row in rows)


def test_oscillator_repulsive_interlacing(oscillator):
    rows = verify_interlacing(oscillator, PointPerturbation(0.0, -2.0), depth=4)
    assert all(row["holds"] for row in rows)
    even = [row for row in rows if row["kind"] == "shifted"]
    assert all(row["E_star"] > row["E_old"] for row in even)


def test_interlacing_table_reports_missing_levels():
    rows = interlacing_table([], [0.5, 1.5], True, 2)
    assert [row["kind"] for row in rows] == ["missing", "missing"]
    assert not any(row["holds"] for row in rows)


def test_free_line_scattering_unitarity(free_line):
    pert = PointPerturbation(0.0, 2.0)
    for k in (0.5, 1.0, 3.0, -1.0):
        state = generalized_eigenfunction(free_line, pert, k)
        r2, t2 = abs(state.reflection) ** 2, abs(state.transmission) ** 2
        assert r2 + t2 == pytest.approx(1.0, abs=1e-10)
    # |R|^2 = (alpha / 2k)^2 / (1 + (alpha / 2k)^2) for the unit kinetic factor
    state = generalized_eigenfunction(free_line, pert, 1.0)
    assert abs(state.reflection) ** 2 == pytest.approx(0.5, abs=1e-10)


def test_reflectionless_scattering_unitarity(reflectionless):
    pert = PointPerturbation(0.4, 0.8)
    state = generalized_eigenfunction(reflectionless, pert, 1.7)
    assert abs(state.reflection) ** 2 + abs(state.transmission) ** 2 == pytest.approx(1.0, abs=1e-8)


def test_scattering_rejects_zero_momentum_and_discrete_problems(free_line, oscillator):
    with pytest.raises(InvalidParameter):
        generalized_eigenfunction(free_line, PointPerturbation(0.0, 1.0), 0.0)
    with pytest.raises(Unsupported):
        generalized_eigenfunction(oscillator, PointPerturbation(0.0, 1.0), 1.0)


def test_pole_cancellation_reflectionless(reflectionless):
    probe = verify_pole_cancellation(reflectionless, PointPerturbation(1.0, 0.5), 0.3, -0.7, -1.0)
    assert probe["variation"] < 10.0
    assert probe["bare_growth"] > 1e3
    assert len(probe["energies"]) == 10
