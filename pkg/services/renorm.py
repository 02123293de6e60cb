"""
Renormalized point interactions.

In two dimensions G0(a, a | E) diverges and the bare coupling has to be traded
for a renormalized pair (1/alpha_R, mu^2). The principal function becomes
    Phi_R(E) = 1/alpha_R - [G0(a, a | E) - G0(a, a | -mu^2)],
which is finite, and the Krein formula keeps its form with Phi_R in place of Phi.
"""
from dataclasses import dataclass
from functools import partial
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import Config
from services.greens import green0, green0_derivative, subtracted_diagonal
from services.krein import (
    BoundState,
    assemble_states,
    classify_levels,
    interlacing_table,
    pole_cancellation_probe,
    resolve_window,
)
from services.root_finder import find_roots
from services.spectral_core import BaseProblem, eval_level
from utils.exceptions import InvalidParameter, ZeroOfPhi
from utils.logger import get_logger
from utils.validators import validate_positive

logger = get_logger(__name__)


@dataclass(frozen=True)
class RenormalizedPerturbation:
    """
    Renormalized point interaction at support a.

    inv_alpha_r = 0 is allowed and places a bound state exactly at -mu2.
    """
    support: object
    inv_alpha_r: float
    mu2: float

    def __post_init__(self):
        validate_positive("mu2", self.mu2)
        if not np.isfinite(self.inv_alpha_r):
            raise InvalidParameter("inv_alpha_r must be finite", {"inv_alpha_r": self.inv_alpha_r})

    @property
    def scale_energy(self) -> float:
        return -self.mu2

    @property
    def alpha_r(self) -> float:
        return np.inf if self.inv_alpha_r == 0 else 1.0 / self.inv_alpha_r


def phi_renormalized(problem: BaseProblem, rpert: RenormalizedPerturbation, energy: float,
                     tol: Optional[float] = None) -> float:
    """
    Renormalized principal function 1/alpha_R - [G0(a, a | E) - G0(a, a | -mu^2)].

    Raises:
        DimensionMismatch: support dimension differs from the problem's
        PoleProximity: E inside a level guard band
    """
    a = problem.point(rpert.support)
    return rpert.inv_alpha_r - subtracted_diagonal(problem, a, energy, rpert.scale_energy, tol)


def _lower_sign(problem: BaseProblem, rpert: RenormalizedPerturbation, tol) -> float:
    if problem.dimension == 2:
        return 1.0
    a = problem.point(rpert.support)
    # G0(a, a | E) -> 0 as E -> -inf in one dimension
    return float(np.sign(rpert.inv_alpha_r + green0(problem, a, a, rpert.scale_energy, tol).value.real))


def find_bound_states_renormalized(
    problem: BaseProblem,
    rpert: RenormalizedPerturbation,
    window: Optional[Tuple[float, float]] = None,
    tol: Optional[float] = None
) -> List[BoundState]:
    """
    Roots of the renormalized principal function, labelled like the regular case.

    Args:
        problem: Base problem (two-dimensional or one-dimensional)
        rpert: Renormalized perturbation
        window: (Emin, Emax); purely discrete problems need a finite Emax
        tol: Root tolerance

    Returns:
        Bound states sorted by energy
    """
    tol = tol or Config.DEFAULT_TOL
    a = problem.point(rpert.support)
    emin, emax = resolve_window(problem, window)
    logger.info("renormalized_search_started", problem=problem.label, inv_alpha_r=rpert.inv_alpha_r,
                mu2=rpert.mu2, Emin=emin, Emax=emax)
    poles, nodes = classify_levels(problem, a, emax)
    lower_sign = _lower_sign(problem, rpert, tol)
    roots = find_roots(
        lambda e: phi_renormalized(problem, rpert, e, tol),
        [g.energy for g in poles],
        problem.infimum,
        (emin, emax),
        problem.energy_scale,
        tol,
        lower_sign=lower_sign,
    )
    states = assemble_states(
        roots, nodes, poles, (emin, emax),
        attractive=lower_sign > 0,
        normalization=lambda e: green0_derivative(problem, a, e, tol),
        wavefunction=lambda e: partial(renormalized_bound_wavefunction, problem, rpert, e, tol=tol),
        node_wavefunction=lambda g: partial(eval_level, problem, g.start),
        residual=lambda e: abs(phi_renormalized(problem, rpert, e, tol)),
    )
    for state in states:
        logger.info("bound_state_found", energy=state.energy, kind=state.kind,
                    E_old=state.e_old, multiplicity=state.multiplicity)
    return states


def full_green_renormalized(problem: BaseProblem, rpert: RenormalizedPerturbation, x, y, energy: float,
                            tol: Optional[float] = None) -> complex:
    """Perturbed Green's function with the renormalized principal function."""
    tol = tol or Config.DEFAULT_TOL
    a = problem.point(rpert.support)
    denominator = phi_renormalized(problem, rpert, energy, tol)
    if abs(denominator) < tol:
        raise ZeroOfPhi("energy is a perturbed eigenvalue", {"E": energy, "phi": denominator})
    base = green0(problem, x, y, energy, tol).value
    left = green0(problem, x, a, energy, tol).value
    right = green0(problem, a, y, energy, tol).value
    return complex(base + left * right / denominator)


def coupling_flow(problem: BaseProblem, support, inv_alpha_r: float, mu2_from: float, mu2_to: float,
                  tol: Optional[float] = None) -> float:
    """
    Inverse coupling at scale mu2_to that leaves Phi_R unchanged as a function of E.

    1/alpha_R' = 1/alpha_R + G0(a, a | -mu_from^2) - G0(a, a | -mu_to^2)
    """
    validate_positive("mu2_from", mu2_from)
    validate_positive("mu2_to", mu2_to)
    if mu2_from == mu2_to:
        return float(inv_alpha_r)
    a = problem.point(support)
    shifted = inv_alpha_r + subtracted_diagonal(problem, a, -mu2_from, -mu2_to, tol)
    logger.debug("coupling_flowed", mu2_from=mu2_from, mu2_to=mu2_to,
                 inv_alpha_r=inv_alpha_r, inv_alpha_r_new=shifted)
    return float(shifted)


def renormalized_bound_wavefunction(problem: BaseProblem, rpert: RenormalizedPerturbation, energy: float, x,
                                    tol: Optional[float] = None) -> complex:
    """Residue wavefunction G0(x, a | E*) / sqrt(sum |phi_n(a)|^2 / (E_n - E*)^2)."""
    a = problem.point(rpert.support)
    derivative = green0_derivative(problem, a, energy, tol)
    return complex(green0(problem, x, a, energy, tol).value / np.sqrt(derivative))


def verify_interlacing_renormalized(problem: BaseProblem, rpert: RenormalizedPerturbation, depth: int,
                                    tol: Optional[float] = None) -> List[Dict]:
    """Interlacing table E_{k-1} < E_k* < E_k for the first `depth` distinct levels."""
    if depth < 1:
        raise InvalidParameter("depth must be positive", {"depth": depth})
    groups = problem.distinct_levels(float(problem.discrete_energies(1)[0]))
    while len(groups) < depth + 1:
        groups = problem.distinct_levels(groups[-1].energy + problem.energy_scale)
    levels = [g.energy for g in groups]
    states = find_bound_states_renormalized(problem, rpert, (-np.inf, levels[depth - 1]), tol)
    rows = interlacing_table(states, levels, True, depth, problem.infimum)
    logger.info("interlacing_checked", problem=problem.label, depth=depth,
                holds=all(r["holds"] for r in rows))
    return rows


def verify_pole_cancellation_renormalized(problem: BaseProblem, rpert: RenormalizedPerturbation, x, y,
                                          level_energy: float, exponents: Sequence[int] = (2, 3, 4, 5, 6),
                                          tol: Optional[float] = None) -> Dict:
    """Bounded-sequence probe of the renormalized kernel at an unperturbed level."""
    return pole_cancellation_probe(
        lambda e: full_green_renormalized(problem, rpert, x, y, e, tol),
        lambda e: green0(problem, x, y, e, tol).value,
        level_energy, problem.energy_scale, exponents,
    )


def spectra_match(first: Sequence[BoundState], second: Sequence[BoundState], tol: float) -> bool:
    """True when two spectra have the same shifted energies within tol."""
    a = [s.energy for s in first if s.kind == "shifted"]
    b = [s.energy for s in second if s.kind == "shifted"]
    return len(a) == len(b) and all(abs(x - y) <= tol for x, y in zip(a, b))
