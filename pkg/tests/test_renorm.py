"""Unit tests for renormalized point interactions."""
import numpy as np
import pytest

from services.renorm import (
    RenormalizedPerturbation,
    coupling_flow,
    find_bound_states_renormalized,
    full_green_renormalized,
    phi_renormalized,
    spectra_match,
    verify_interlacing_renormalized,
    verify_pole_cancellation_renormalized,
)
from utils.exceptions import InvalidParameter, ZeroOfPhi

ORIGIN = (0.0, 0.0)


def test_scale_must_be_positive():
    with pytest.raises(InvalidParameter):
        RenormalizedPerturbation(ORIGIN, 0.0, 0.0)
    with pytest.raises(InvalidParameter):
        RenormalizedPerturbation(ORIGIN, float("nan"), 1.0)


def test_infinite_coupling_when_inverse_vanishes():
    assert RenormalizedPerturbation(ORIGIN, 0.0, 1.0).alpha_r == float("inf")
    assert RenormalizedPerturbation(ORIGIN, 4.0, 1.0).alpha_r == pytest.approx(0.25)


def test_principal_function_at_scale_energy(torus):
    rpert = RenormalizedPerturbation(ORIGIN, 0.7, 2.0)
    assert phi_renormalized(torus, rpert, -2.0) == pytest.approx(0.7, abs=1e-12)


def test_torus_ground_state_at_scale(torus):
    rpert = RenormalizedPerturbation(ORIGIN, 0.0, 1.0)
    states = find_bound_states_renormalized(torus, rpert, (-np.inf, 0.99), tol=1e-11)
    assert states[0].energy == pytest.approx(-1.0, abs=1e-9)
    assert states[0].kind == "shifted"


def test_free_plane_ground_state_at_scale(free_plane):
    rpert = RenormalizedPerturbation(ORIGIN, 0.0, 2.0)
    states = find_bound_states_renormalized(free_plane, rpert, tol=1e-12)
    assert len(states) == 1
    assert states[0].energy == pytest.approx(-2.0, abs=1e-9)


def test_free_plane_coupling_moves_bound_state(free_plane):
    # Phi_R(E) = 1/alpha_R + log(sqrt(E / -mu^2)) / (2 pi), so E* = -mu^2 exp(-4 pi / alpha_R)
    rpert = RenormalizedPerturbation(ORIGIN, 0.5, 1.0)
    states = find_bound_states_renormalized(free_plane, rpert, tol=1e-12)
    assert states[0].energy == pytest.approx(-np.exp(-2 * np.pi * 0.5 * 2), rel=1e-8)


def test_coupling_flow_preserves_spectrum(torus):
    inv = coupling_flow(torus, ORIGIN, 0.0, 1.0, 4.0)
    original = find_bound_states_renormalized(torus, RenormalizedPerturbation(ORIGIN, 0.0, 1.0), (-np.inf, 0.99))
    flowed = find_bound_states_renormalized(torus, RenormalizedPerturbation(ORIGIN, inv, 4.0), (-np.inf, 0.99))
    assert spectra_match(original, flowed, 1e-8)


def test_coupling_flow_identity_and_free_plane(free_plane):
    assert coupling_flow(free_plane, ORIGIN, 0.3, 2.0, 2.0) == 0.3
    # G0(-mu_from^2) - G0(-mu_to^2) = log(mu_to / mu_from) / (2 pi)
    assert coupling_flow(free_plane, ORIGIN, 0.3, 1.0, 4.0) == pytest.approx(0.3 + np.log(2.0) / (2 * np.pi))


def test_renormalized_interlacing_on_torus(torus):
    rows = verify_interlacing_renormalized(torus, RenormalizedPerturbation(ORIGIN, 0.0, 1.0), depth=3)
    assert all(row["holds"] for row in rows)


def test_degenerate_level_keeps_unchanged_copies(torus):
    states = find_bound_states_renormalized(torus, RenormalizedPerturbation(ORIGIN, 0.0, 1.0), (-np.inf, 1.5))
    copies = [s for s in states if s.kind == "unchanged-node" and s.energy == pytest.approx(1.0)]
    assert len(copies) == 1
    assert copies[0].multiplicity == 3


def test_full_green_rejects_bound_state(torus):
    rpert = RenormalizedPerturbation(ORIGIN, 0.0, 1.0)
    with pytest.raises(ZeroOfPhi):
        full_green_renormalized(torus, rpert, (1.0, 2.0), (2.0, 0.5), -1.0)


def test_torus_pole_cancellation(torus):
    rpert = RenormalizedPerturbation(ORIGIN, 0.0, 1.0)
    probe = verify_pole_cancellation_renormalized(torus, rpert, (np.pi, np.pi), (0.3, 0.2), 1.0)
    assert probe["variation"] < 10.0
    assert probe["bare_growth"] > 1e3


def test_spectra_match_ignores_unchanged_levels(torus):
    states = find_bound_states_renormalized(torus, RenormalizedPerturbation(ORIGIN, 0.0, 1.0), (-np.inf, 1.5))
    shifted_only = [s for s in states if s.kind == "shifted"]
    assert spectra_match(states, shifted_only, 0.0)
    assert not spectra_match(states, shifted_only[:1], 0.0)
