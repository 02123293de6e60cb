"""
Perturbative energies and wavefunctions to second order in the coupling.

Expanding the secular equation around an unperturbed level E_k with
c = |phi_k(a)|^2 and S1 = R(a, a | E_k), the reduced Green's function at the
support with level k removed:
    E1 = -alpha c
    E2 = -alpha^2 c S1
The renormalized series replaces S1 by S1_R - c / (E_k + mu^2), where S1_R is
the subtracted reduced diagonal.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import trapezoid

from config import Config
from services.greens import channel_integral, expansion_count, reduced_green, subtracted_diagonal
from services.krein import PointPerturbation, bound_wavefunction, find_bound_states
from services.renorm import (
    RenormalizedPerturbation,
    find_bound_states_renormalized,
)
from services.spectral_core import BaseProblem, LevelGroup
from utils.exceptions import NodeLevel, NonRenormalizedProblem, Unsupported
from utils.logger import get_logger

logger = get_logger(__name__)


@dataclass
class PerturbationResult:
    k: int
    level_energy: float
    e1: float
    e2: float
    weight: float
    phase: float
    guard: float
    converged: bool = True
    renormalized: bool = False
    details: Dict = field(default_factory=dict)

    @property
    def reliable(self) -> bool:
        """Expansion premise |E1| < nearest gap holds and every sum converged."""
        return self.guard < 1.0 and self.converged

    @property
    def energies(self) -> Tuple[float, float]:
        return self.e1, self.e2

    def to_record(self) -> Dict:
        return {
            "k": self.k, "E_k": self.level_energy, "E1": self.e1, "E2": self.e2,
            "guard": self.guard, "reliable": self.reliable, "converged": self.converged,
            "renormalized": self.renormalized,
        }


def _level_group(problem: BaseProblem, k: int) -> LevelGroup:
    if problem.level_count == 0:
        raise NodeLevel("problem has no discrete levels, corrections vanish", {"problem": problem.label})
    level = problem.level(k)
    for group in problem.distinct_levels(level.energy):
        if group.start <= k < group.start + group.multiplicity:
            if group.multiplicity > 1:
                raise Unsupported("perturbation series needs a simple level",
                                  {"k": k, "multiplicity": group.multiplicity})
            return group
    raise NodeLevel("level not found", {"k": k})


def _level_weight(problem: BaseProblem, group: LevelGroup, a) -> Tuple[float, float]:
    value = complex(problem.discrete_values(a, group.start + 1)[..., group.start])
    weight = abs(value) ** 2
    if weight < Config.NODE_THRESHOLD * problem.eigenfunction_scale(group):
        raise NodeLevel("support lies on a node of the level, all corrections vanish",
                        {"k": group.start, "E_k": group.energy})
    return weight, float(np.angle(value))


def _guard(problem: BaseProblem, group: LevelGroup, e1: float) -> float:
    _, spacing = problem.nearest_level(group.energy)
    return abs(e1) / spacing


def _truncated_shell_sum(problem: BaseProblem, group: LevelGroup, a) -> Tuple[float, int]:
    """Regular second-order sum cut at TRUNCATION_CAP modes (divergent in two dimensions)."""
    count = Config.TRUNCATION_CAP
    energies = problem.discrete_energies(count)
    weights = np.abs(problem.discrete_values(a, count)) ** 2
    keep = np.ones(count, dtype=bool)
    keep[group.start:group.start + group.multiplicity] = False
    total = float(np.sum(weights[keep] / (energies[keep] - group.energy)))
    return total, count


def energy_corrections(problem: BaseProblem, pert: PointPerturbation, k: int,
                       tol: Optional[float] = None) -> PerturbationResult:
    """
    First and second order energy shifts of level k.

    Two-dimensional problems get a truncated second-order sum flagged
    converged=False, since the regular series diverges there.

    Raises:
        NodeLevel: phi_k(a) vanishes or the problem has no levels
    """
    tol = tol or Config.DEFAULT_TOL
    group = _level_group(problem, k)
    a = problem.point(pert.support)
    weight, phase = _level_weight(problem, group, a)
    e1 = -pert.alpha * weight
    details = {}
    if problem.dimension == 2:
        s1, count = _truncated_shell_sum(problem, group, a)
        converged = False
        details["truncated_modes"] = count
        logger.warning("second_order_sum_divergent", problem=problem.label, modes=count)
    else:
        s1 = float(reduced_green(problem, a, a, group, tol)[0].real)
        converged = True
    e2 = -pert.alpha ** 2 * weight * s1
    details["reduced_diagonal"] = s1
    result = PerturbationResult(
        k=k, level_energy=group.energy, e1=e1, e2=e2, weight=weight, phase=phase,
        guard=_guard(problem, group, e1), converged=converged, details=details,
    )
    logger.info("energy_corrections_computed", k=k, E1=e1, E2=e2, guard=result.guard)
    return result


def _reduced_s1_renormalized(problem: BaseProblem, group: LevelGroup, a, mu2: float, tol) -> float:
    """Sum over n outside k of |phi_n(a)|^2 (E_k + mu^2) / ((E_n - E_k)(E_n + mu^2)), continuum included."""
    return subtracted_diagonal(problem, a, group.energy, -mu2, tol, skip=group)


def energy_corrections_renormalized(problem: BaseProblem, rpert: RenormalizedPerturbation, k: int,
                                    tol: Optional[float] = None) -> PerturbationResult:
    """
    Renormalized first and second order shifts of level k.

    E1 = -alpha_R c and E2 = alpha_R^2 c (c / (E_k + mu^2) - S1_R).

    Raises:
        NodeLevel: phi_k(a) vanishes
        NonRenormalizedProblem: inv_alpha_r = 0 has no small-coupling series
    """
    tol = tol or Config.DEFAULT_TOL
    if rpert.inv_alpha_r == 0:
        raise NonRenormalizedProblem("the series needs a finite renormalized coupling",
                                     {"inv_alpha_r": rpert.inv_alpha_r})
    group = _level_group(problem, k)
    a = problem.point(rpert.support)
    weight, phase = _level_weight(problem, group, a)
    alpha_r = rpert.alpha_r
    s1_r = _reduced_s1_renormalized(problem, group, a, rpert.mu2, tol)
    e1 = -alpha_r * weight
    e2 = alpha_r ** 2 * weight * (weight / (group.energy + rpert.mu2) - s1_r)
    result = PerturbationResult(
        k=k, level_energy=group.energy, e1=e1, e2=e2, weight=weight, phase=phase,
        guard=_guard(problem, group, e1), renormalized=True,
        details={"subtracted_reduced_diagonal": s1_r},
    )
    logger.info("energy_corrections_computed", k=k, E1=e1, E2=e2, renormalized=True)
    return result


def _wavefunction_orders(problem, group, a, alpha, weight, phase, s1_eff, x, tol):
    phi_x = complex(problem.discrete_values(problem.point(x), group.start + 1)[..., group.start])
    r_xa, dr_xa = reduced_green(problem, x, a, group, tol)
    _, dr_aa = reduced_green(problem, a, a, group, tol)
    unit = -np.exp(-1j * phase)
    p = -np.sqrt(weight)
    psi0 = unit * phi_x
    psi1 = alpha * p * r_xa
    psi2 = (-(alpha ** 2) / 2) * psi0 * weight * dr_aa.real + alpha ** 2 * p * (s1_eff * r_xa - weight * dr_xa)
    return complex(psi0), complex(psi1), complex(psi2)


def wavefunction_corrections(problem: BaseProblem, pert: PointPerturbation, k: int, x,
                             tol: Optional[float] = None) -> Tuple[complex, complex, complex]:
    """
    Zeroth, first and second order bound-state wavefunction at x.

    psi0 = -exp(-i theta_k) phi_k(x)
    psi1 = alpha P R(x, a)
    psi2 = -(alpha^2 / 2) psi0 c R'(a, a) + alpha^2 P [S1 R(x, a) - c R'(x, a)]
    with P = -sqrt(c) and R' the energy derivative of the reduced Green's function.
    """
    tol = tol or Config.DEFAULT_TOL
    if problem.dimension == 2:
        raise NonRenormalizedProblem("regular wavefunction corrections diverge in two dimensions",
                                     {"problem": problem.label})
    group = _level_group(problem, k)
    a = problem.point(pert.support)
    weight, phase = _level_weight(problem, group, a)
    s1 = float(reduced_green(problem, a, a, group, tol)[0].real)
    return _wavefunction_orders(problem, group, a, pert.alpha, weight, phase, s1, x, tol)


def wavefunction_corrections_renormalized(problem: BaseProblem, rpert: RenormalizedPerturbation, k: int, x,
                                          tol: Optional[float] = None) -> Tuple[complex, complex, complex]:
    """Renormalized orders: S1 becomes S1_R - c / (E_k + mu^2) in the second order."""
    tol = tol or Config.DEFAULT_TOL
    if rpert.inv_alpha_r == 0:
        raise NonRenormalizedProblem("the series needs a finite renormalized coupling",
                                     {"inv_alpha_r": rpert.inv_alpha_r})
    group = _level_group(problem, k)
    a = problem.point(rpert.support)
    weight, phase = _level_weight(problem, group, a)
    s1_eff = _reduced_s1_renormalized(problem, group, a, rpert.mu2, tol) - weight / (group.energy + rpert.mu2)
    return _wavefunction_orders(problem, group, a, rpert.alpha_r, weight, phase, s1_eff, x, tol)


def textbook_energy_corrections(problem: BaseProblem, pert: PointPerturbation, k: int,
                                tol: Optional[float] = None) -> Tuple[float, float]:
    """
    E1 and E2 from explicit matrix elements V_nk = -alpha conj(phi_n(a)) phi_k(a).

    E1 = V_kk, E2 = sum over n outside k of |V_nk|^2 / (E_k - E_n) plus the
    continuum integral of |V_lambda k|^2 / (E_k - lambda).
    """
    tol = tol or Config.DEFAULT_TOL
    if problem.dimension == 2:
        raise NonRenormalizedProblem("second order matrix-element sum diverges in two dimensions",
                                     {"problem": problem.label})
    group = _level_group(problem, k)
    a = problem.point(pert.support)
    e_k = group.energy
    count, _ = expansion_count(problem, e_k, tol)
    count = max(count, group.start + 1)
    energies = problem.discrete_energies(count)
    amplitudes = problem.discrete_values(a, count)
    phi_k = amplitudes[group.start]
    elements = -pert.alpha * np.conj(amplitudes) * phi_k
    e1 = float(elements[group.start].real)
    others = np.ones(count, dtype=bool)
    others[group.start] = False
    e2 = float(np.sum(np.abs(elements[others]) ** 2 / (e_k - energies[others])))
    for channel in problem.channels:
        # |V_lambda k|^2 = alpha^2 |phi_k(a)|^2 |chi_lambda(a)|^2
        integral, _ = channel_integral(channel, a, a, e_k, 1, tol)
        e2 -= pert.alpha ** 2 * abs(phi_k) ** 2 * integral.real
    return e1, e2


def order_scaling(alphas: Sequence[float], residuals: Sequence[float]) -> float:
    """Least-squares slope of log(residual) against log(alpha)."""
    slope, _ = np.polyfit(np.log(np.asarray(alphas, dtype=float)),
                          np.log(np.asarray(residuals, dtype=float)), 1)
    return float(slope)


def exact_level_root(problem: BaseProblem, pert: PointPerturbation, k: int, tol: Optional[float] = None) -> float:
    """Exact perturbed energy that continues level k."""
    level = problem.level(k).energy
    upper = level if pert.alpha > 0 else level + problem.nearest_level(level)[1]
    states = find_bound_states(problem, pert, (-np.inf, min(upper, problem.infimum)), tol)
    for state in states:
        if state.kind == "shifted" and state.e_old is not None and abs(state.e_old - level) <= 1e-12 * max(1, abs(level)):
            return state.energy
    raise NodeLevel("no shifted state continues the level", {"k": k})


def energy_residuals(problem: BaseProblem, support, k: int, alphas: Sequence[float],
                     tol: Optional[float] = None) -> List[float]:
    """|E*(alpha) - E_k - E1 - E2| for each coupling."""
    residuals = []
    for alpha in alphas:
        pert = PointPerturbation(support, alpha)
        corrections = energy_corrections(problem, pert, k, tol)
        exact = exact_level_root(problem, pert, k, tol)
        residuals.append(abs(exact - corrections.level_energy - corrections.e1 - corrections.e2))
    return residuals


def wavefunction_residual(problem: BaseProblem, pert: PointPerturbation, k: int, grid: np.ndarray,
                          tol: Optional[float] = None) -> float:
    """L2 distance between |psi0 + psi1 + psi2| and |psi| at the exact root over a grid."""
    exact_energy = exact_level_root(problem, pert, k, tol)
    exact = np.array([abs(bound_wavefunction(problem, pert, exact_energy, x, tol)) for x in grid])
    series = np.array([abs(sum(wavefunction_corrections(problem, pert, k, x, tol))) for x in grid])
    return float(np.sqrt(trapezoid((exact - series) ** 2, grid)))


def renormalized_energy_residual(problem: BaseProblem, rpert: RenormalizedPerturbation, k: int,
                                 window: Tuple[float, float], tol: Optional[float] = None) -> float:
    """|E* - E_k - E1 - E2| for the renormalized series at one coupling."""
    corrections = energy_corrections_renormalized(problem, rpert, k, tol)
    states = find_bound_states_renormalized(problem, rpert, window, tol)
    level = corrections.level_energy
    for state in states:
        if state.kind == "shifted" and state.e_old is not None and abs(state.e_old - level) <= 1e-12 * max(1, abs(level)):
            return abs(state.energy - level - corrections.e1 - corrections.e2)
    raise NodeLevel("no shifted state continues the level", {"k": k})

