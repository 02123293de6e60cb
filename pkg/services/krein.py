"""
Single point interaction H = H0 - alpha * delta(x - a).

The perturbed resolvent follows from the rank-one Krein formula
    G(x, y | E) = G0(x, y | E) + G0(x, a | E) G0(a, y | E) / Phi(E),
    Phi(E) = 1/alpha - G0(a, a | E),
and the bound states are the zeros of Phi.
"""
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import Config
from services.greens import green0, green0_boundary, green0_derivative
from services.root_finder import find_roots
from services.spectral_core import BaseProblem, LevelGroup, eval_level
from utils.constants import SCATTERING_DISTANCE
from utils.exceptions import (
    InvalidParameter,
    NonRenormalizedProblem,
    NotARoot,
    Unsupported,
    ZeroOfPhi,
)
from utils.logger import get_logger
from utils.validators import validate_nonzero

logger = get_logger(__name__)


@dataclass(frozen=True)
class PointPerturbation:
    """delta interaction of strength alpha at support a (alpha > 0 attractive)."""
    support: object
    alpha: float

    def __post_init__(self):
        validate_nonzero("alpha", self.alpha)


@dataclass
class BoundState:
    energy: float
    bracket: Tuple[float, float]
    kind: str
    normalization: Optional[float]
    wavefunction: Callable
    multiplicity: int = 1
    e_old: Optional[float] = None
    residual: float = 0.0
    index: int = 0

    def to_record(self) -> Dict:
        """Row of the states table in result documents."""
        return {
            "k": self.index,
            "E_old": self.e_old,
            "E_star": self.energy,
            "kind": self.kind,
            "bracket": list(self.bracket),
            "multiplicity": self.multiplicity,
            "residual": self.residual,
        }


@dataclass
class ScatteringState:
    energy: float
    k: float
    values: Callable
    reflection: complex
    transmission: complex
    coefficients: Dict[str, complex] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Level classification shared with the renormalized and multicenter solvers
# ---------------------------------------------------------------------------

def classify_levels(problem: BaseProblem, support, upper: float) -> Tuple[List[LevelGroup], List[LevelGroup]]:
    """
    Split the distinct levels up to upper (plus the next one) into poles and nodes.

    A level is a node when the summed |phi_n(a)|^2 over its modes is below
    NODE_THRESHOLD times the level's own scale.

    Returns:
        (pole levels, node levels)
    """
    if problem.level_count == 0:
        return [], []
    poles, nodes = [], []
    for group in problem.distinct_levels(upper):
        residue = problem.level_residue(group, support, support).real
        if residue < Config.NODE_THRESHOLD * problem.eigenfunction_scale(group):
            nodes.append(group)
        else:
            poles.append(group)
    return poles, nodes


def resolve_window(problem: BaseProblem, window: Optional[Tuple[float, float]]) -> Tuple[float, float]:
    """Fill in a default window and clip its top to the continuum."""
    emin, emax = window if window is not None else (-np.inf, problem.infimum)
    if emax is None or not np.isfinite(emax):
        if not np.isfinite(problem.infimum):
            raise InvalidParameter("a finite window top is needed for purely discrete problems",
                                   {"problem": problem.label})
        emax = problem.infimum
    emin = -np.inf if emin is None else emin
    if emin >= emax:
        raise InvalidParameter("window lower end must lie below its upper end", {"Emin": emin, "Emax": emax})
    return float(emin), float(min(emax, problem.infimum))


def assemble_states(
    roots,
    nodes: Sequence[LevelGroup],
    poles: Sequence[LevelGroup],
    window: Tuple[float, float],
    attractive: bool,
    normalization: Callable[[float], float],
    wavefunction: Callable[[float], Callable],
    node_wavefunction: Callable[[LevelGroup], Callable],
    residual: Callable[[float], float]
) -> List[BoundState]:
    """
    Turn polished roots and node levels into labelled bound states.

    Attractive roots take the pole just above them as their old level (the top
    new state has none); repulsive roots take the pole just below.
    A degenerate pole level keeps multiplicity - 1 unchanged copies.
    """
    emin, emax = window
    states: List[BoundState] = []
    for root in roots:
        e_old = root.upper_pole if attractive else root.lower_pole
        states.append(BoundState(
            energy=root.energy,
            bracket=root.bracket,
            kind="shifted",
            normalization=normalization(root.energy),
            wavefunction=wavefunction(root.energy),
            e_old=e_old,
            residual=residual(root.energy),
        ))
    for group in nodes:
        if emin <= group.energy <= emax:
            states.append(BoundState(
                energy=group.energy, bracket=(group.energy, group.energy), kind="unchanged-node",
                normalization=None, wavefunction=node_wavefunction(group),
                multiplicity=group.multiplicity, e_old=group.energy,
            ))
    for group in poles:
        if group.multiplicity > 1 and emin <= group.energy <= emax:
            states.append(BoundState(
                energy=group.energy, bracket=(group.energy, group.energy), kind="unchanged-node",
                normalization=None, wavefunction=node_wavefunction(group),
                multiplicity=group.multiplicity - 1, e_old=group.energy,
            ))
    states.sort(key=lambda s: (s.energy, s.kind))
    for index, state in enumerate(states):
        state.index = index
    return states


def _node_wavefunction(problem: BaseProblem, group: LevelGroup) -> Callable:
    return partial(eval_level, problem, group.start)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def phi(problem: BaseProblem, pert: PointPerturbation, energy, tol: Optional[float] = None,
        side: Optional[str] = None):
    """
    Principal function Phi(E) = 1/alpha - G0(a, a | E).

    Real energies below the spectrum give a real value; side="+" or "-"
    evaluates the boundary value on the continuum.

    Raises:
        NonRenormalizedProblem: two-dimensional problems (the diagonal diverges)
    """
    if problem.dimension == 2:
        raise NonRenormalizedProblem("the regular principal function diverges in two dimensions; "
                                     "use the renormalized perturbation", {"problem": problem.label})
    a = problem.point(pert.support)
    if side is not None:
        return 1.0 / pert.alpha - green0_boundary(problem, a, a, energy, side)
    value = 1.0 / pert.alpha - green0(problem, a, a, energy, tol).value
    if complex(energy).imag == 0.0:
        return float(value.real)
    return value


def full_green(problem: BaseProblem, pert: PointPerturbation, x, y, energy, tol: Optional[float] = None) -> complex:
    """Perturbed Green's function G(x, y | E) from the Krein formula."""
    tol = tol or Config.DEFAULT_TOL
    a = problem.point(pert.support)
    denominator = phi(problem, pert, energy, tol)
    if abs(denominator) < tol:
        raise ZeroOfPhi("energy is a perturbed eigenvalue", {"E": complex(energy), "phi": denominator})
    base = green0(problem, x, y, energy, tol).value
    left = green0(problem, x, a, energy, tol).value
    right = green0(problem, a, y, energy, tol).value
    return complex(base + left * right / denominator)


def root_residual(problem: BaseProblem, pert: PointPerturbation, energy: float, tol: Optional[float] = None) -> float:
    return abs(phi(problem, pert, energy, tol))


def find_bound_states(
    problem: BaseProblem,
    pert: PointPerturbation,
    window: Optional[Tuple[float, float]] = None,
    tol: Optional[float] = None
) -> List[BoundState]:
    """
    Locate the bound states of H0 - alpha delta_a inside a window.

    Args:
        problem: One-dimensional base problem
        pert: Point perturbation
        window: (Emin, Emax); defaults to (-inf, infimum)
        tol: Root tolerance

    Returns:
        Bound states sorted by energy, node levels included as unchanged-node

    Raises:
        WindowTooNarrow: a root lies below Emin
    """
    tol = tol or Config.DEFAULT_TOL
    if problem.dimension == 2:
        raise NonRenormalizedProblem("point interactions in two dimensions need renormalization",
                                     {"problem": problem.label})
    a = problem.point(pert.support)
    emin, emax = resolve_window(problem, window)
    logger.info("bound_state_search_started", problem=problem.label, alpha=pert.alpha,
                support=float(a), Emin=emin, Emax=emax)

    poles, nodes = classify_levels(problem, a, emax)
    roots = find_roots(
        lambda e: phi(problem, pert, e, tol),
        [g.energy for g in poles],
        problem.infimum,
        (emin, emax),
        problem.energy_scale,
        tol,
        lower_sign=np.sign(pert.alpha),
    )
    states = assemble_states(
        roots, nodes, poles, (emin, emax),
        attractive=pert.alpha > 0,
        normalization=lambda e: green0_derivative(problem, a, e, tol),
        wavefunction=lambda e: partial(bound_wavefunction, problem, pert, e, tol=tol, check=False),
        node_wavefunction=partial(_node_wavefunction, problem),
        residual=lambda e: root_residual(problem, pert, e, tol),
    )
    for state in states:
        logger.info("bound_state_found", energy=state.energy, kind=state.kind, E_old=state.e_old)
    return states


def bound_wavefunction(problem: BaseProblem, pert: PointPerturbation, energy: float, x,
                       tol: Optional[float] = None, check: bool = True) -> complex:
    """
    Normalized bound state psi(x) = G0(x, a | E*) / sqrt(dG0(a, a | E)/dE at E*).

    Raises:
        NotARoot: Phi(E*) is not zero within tolerance
    """
    tol = tol or Config.DEFAULT_TOL
    a = problem.point(pert.support)
    derivative = green0_derivative(problem, a, energy, tol)
    if check:
        limit = max(tol, 1e-8) * max(1.0, abs(energy)) * max(1.0, derivative)
        residual = root_residual(problem, pert, energy, tol)
        if residual > limit:
            raise NotARoot("energy is not a zero of the principal function",
                           {"E": energy, "residual": residual, "limit": limit})
    return complex(green0(problem, x, a, energy, tol).value / np.sqrt(derivative))


def _plane_wave_fit(values: np.ndarray, points: np.ndarray, q: float) -> Tuple[complex, complex]:
    """Coefficients (A, B) of A exp(iqx) + B exp(-iqx) through two samples."""
    matrix = np.array([[np.exp(1j * q * p), np.exp(-1j * q * p)] for p in points])
    return tuple(np.linalg.solve(matrix, values))


def generalized_eigenfunction(problem: BaseProblem, pert: PointPerturbation, k: float,
                              x=None, tol: Optional[float] = None):
    """
    Perturbed generalized eigenfunction eta_E for incident channel parameter k.

    eta_E(x) = chi_k(x) + G0(x, a | E + i0) chi_k(a) / Phi(E + i0). The sign of
    k fixes the incidence direction (k > 0 from the left). Reflection and
    transmission are read off by fitting plane waves far from the support.

    Returns:
        ScatteringState, or eta_E(x) when x is given
    """
    if not problem.side_selection or problem.dimension != 1 or not problem.channels:
        raise Unsupported("scattering states need a one-dimensional side-selecting closed form",
                          {"problem": problem.label})
    if k == 0:
        raise InvalidParameter("channel parameter must be nonzero", {"k": k})
    channel = problem.channels[0]
    a = problem.point(pert.support)
    energy = float(channel.dispersion(k))
    chi_a = complex(channel.eigenfunction(k, a))
    denominator = phi(problem, pert, energy, tol, side="+")

    def eta(point):
        point = problem.point(point)
        scattered = green0_boundary(problem, point, a, energy, "+") * chi_a / denominator
        return complex(channel.eigenfunction(k, point)) + scattered

    if x is not None:
        return eta(x)
    distance = abs(a) + SCATTERING_DISTANCE * max(1.0 / abs(k), problem.asymptotic_length)
    return scattering_state(eta, energy, k, distance)


def scattering_state(eta: Callable, energy: float, k: float, distance: float) -> ScatteringState:
    """
    Read reflection and transmission off eta by fitting plane waves at +-distance.

    k > 0 means incidence from the left, k < 0 from the right.
    """
    q = abs(k)
    offsets = np.array([0.0, np.pi / (2 * q)])
    left_points, right_points = -distance - offsets, distance + offsets
    a_left, b_left = _plane_wave_fit(np.array([eta(p) for p in left_points]), left_points, q)
    a_right, b_right = _plane_wave_fit(np.array([eta(p) for p in right_points]), right_points, q)
    if k > 0:
        reflection, transmission = b_left / a_left, a_right / a_left
    else:
        reflection, transmission = a_right / b_right, b_left / b_right
    logger.debug("scattering_coefficients", k=k, R=abs(reflection) ** 2, T=abs(transmission) ** 2)
    return ScatteringState(
        energy=energy, k=k, values=eta,
        reflection=complex(reflection), transmission=complex(transmission),
        coefficients={"left_in": a_left, "left_out": b_left, "right_out": a_right, "right_in": b_right},
    )


def interlacing_table(states: Sequence[BoundState], levels: Sequence[float], attractive: bool,
                      depth: int, upper_bound: float = np.inf) -> List[Dict]:
    """
    Rows checking E_{k-1} < E_k* < E_k (attractive) or E_k < E_k* < E_{k+1} (repulsive).

    Node levels hold when they are reported unchanged.
    """
    rows = []
    for k, level in enumerate(levels[:depth]):
        match = [s for s in states if s.e_old is not None and abs(s.e_old - level) <= 1e-12 * max(1.0, abs(level))]
        node = [s for s in match if s.kind == "unchanged-node"]
        shifted = [s for s in match if s.kind == "shifted"]
        if attractive:
            lower = levels[k - 1] if k > 0 else -np.inf
            upper = level
        else:
            lower = level
            upper = levels[k + 1] if k + 1 < len(levels) else upper_bound
        if shifted:
            star = shifted[0].energy
            holds = bool(lower < star < upper)
            kind = "shifted"
        elif node:
            star = node[0].energy
            holds = abs(star - level) <= 1e-9 * max(1.0, abs(level))
            kind = "unchanged-node"
        else:
            star, holds, kind = None, False, "missing"
        rows.append({"k": k, "E_old": level, "E_star": star, "lower": lower, "upper": upper,
                     "kind": kind, "holds": holds})
    return rows


def verify_interlacing(problem: BaseProblem, pert: PointPerturbation, depth: int,
                       tol: Optional[float] = None) -> List[Dict]:
    """Interlacing table for the first `depth` distinct levels."""
    if depth < 1:
        raise InvalidParameter("depth must be positive", {"depth": depth})
    count = problem.level_count
    needed = depth + 1
    if count is not None and count < depth:
        raise InvalidParameter("not enough discrete levels", {"depth": depth, "levels": count})
    probe = problem.discrete_energies(max(needed, 1) if count is None else count)
    groups = problem.distinct_levels(float(probe[-1]))
    while count is None and len(groups) < needed:
        groups = problem.distinct_levels(groups[-1].energy + problem.energy_scale)
    levels = [g.energy for g in groups]
    if pert.alpha > 0:
        top = levels[depth - 1]
    else:
        top = levels[depth] if depth < len(levels) else problem.infimum
    top = min(top, problem.infimum)
    states = find_bound_states(problem, pert, (-np.inf, top), tol)
    rows = interlacing_table(states, levels, pert.alpha > 0, depth, problem.infimum)
    logger.info("interlacing_checked", problem=problem.label, depth=depth,
                holds=all(r["holds"] for r in rows))
    return rows


def pole_cancellation_probe(kernel: Callable[[float], complex], bare: Callable[[float], complex],
                            level_energy: float, scale: float,
                            exponents: Sequence[int] = (2, 3, 4, 5, 6)) -> Dict:
    """
    Sample |G| and |G0| along E = E_k (1 +- 10^-j).

    Returns:
        Dictionary with energies, magnitudes, the max/min variation of |G|
        and the growth of |G0| across the sequence
    """
    unit = abs(level_energy) if level_energy != 0 else scale
    energies, full, free = [], [], []
    for j in exponents:
        for sign in (1.0, -1.0):
            energy = level_energy + sign * unit * 10.0 ** (-j)
            energies.append(energy)
            full.append(abs(kernel(energy)))
            free.append(abs(bare(energy)))
    full, free = np.array(full), np.array(free)
    return {
        "energies": energies,
        "full": full.tolist(),
        "bare": free.tolist(),
        "variation": float(full.max() / full.min()),
        "bare_growth": float(free.max() / free.min()),
    }


def verify_pole_cancellation(problem: BaseProblem, pert: PointPerturbation, x, y, level_energy: float,
                             exponents: Sequence[int] = (2, 3, 4, 5, 6), tol: Optional[float] = None) -> Dict:
    """Bounded-sequence probe of the perturbed kernel at an unperturbed level."""
    return pole_cancellation_probe(
        lambda e: full_green(problem, pert, x, y, e, tol),
        lambda e: green0(problem, x, y, e, tol).value,
        level_energy, problem.energy_scale, exponents,
    )
