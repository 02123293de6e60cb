"""
Finitely many point centers.

The Krein formula becomes a matrix relation
    G(x, y | E) = G0(x, y | E) + sum_ij G0(x, a_i | E) [Phi(E)^-1]_ij G0(a_j, y | E),
    Phi_ij(E) = delta_ij / alpha_i - G0(a_i, a_j | E).

Bound states are the energies where Phi(E) is singular. They are counted with
    N*(E) = N0(E) + nu(Phi(E)) - n_neg(alpha),
nu being the number of negative eigenvalues, and polished on the crossing
eigenvalue. The one-center-at-a-time recursion is kept as an independent oracle.
"""
from dataclasses import dataclass
from functools import partial
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from config import Config
from services.greens import check_pole_guard, green0, green0_boundary, green0_energy_derivative
from services.krein import BoundState, resolve_window, scattering_state
from services.root_finder import find_roots
from services.spectral_core import BaseProblem, eval_level
from utils.constants import (
    BISECTION_FRACTION,
    CONDITION_LIMIT,
    DET_GRID_MAX,
    DET_GRID_PER_UNIT,
    GROUND_STATE_MAX_DOUBLINGS,
    MIN_CENTER_SEPARATION,
    SCATTERING_DISTANCE,
)
from utils.exceptions import (
    IllConditioned,
    InvalidParameter,
    NonRenormalizedProblem,
    PoleProximity,
    Unsupported,
    WindowTooNarrow,
    ZeroOfPhi,
)
from utils.logger import get_logger
from utils.validators import validate_nonzero

logger = get_logger(__name__)


@dataclass(frozen=True)
class CenterSet:
    """Distinct support points a_i with nonzero couplings alpha_i."""
    points: Tuple
    alphas: Tuple[float, ...]

    def __post_init__(self):
        points = tuple(np.asarray(p, dtype=float).tolist() for p in self.points)
        alphas = tuple(float(validate_nonzero("alpha", a)) for a in self.alphas)
        if len(points) != len(alphas) or not points:
            raise InvalidParameter("need one coupling per center", {"points": len(points), "alphas": len(alphas)})
        coords = np.array([np.atleast_1d(p) for p in points])
        for i in range(len(coords)):
            for j in range(i + 1, len(coords)):
                separation = float(np.linalg.norm(coords[i] - coords[j]))
                if separation < MIN_CENTER_SEPARATION:
                    raise InvalidParameter("centers coincide", {"i": i, "j": j, "separation": separation})
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "alphas", alphas)

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def negative_count(self) -> int:
        return sum(1 for a in self.alphas if a < 0)

    def head(self, count: int) -> "CenterSet":
        return CenterSet(self.points[:count], self.alphas[:count])


@dataclass(frozen=True)
class PrincipalMatrix:
    matrix: np.ndarray
    energy: complex
    condition: float


def _check_dimension(problem: BaseProblem):
    if problem.dimension == 2:
        raise NonRenormalizedProblem("point centers in two dimensions need renormalization",
                                     {"problem": problem.label})


def _kernel_matrix(problem: BaseProblem, rows: Sequence, cols: Sequence, energy, tol, side=None) -> np.ndarray:
    out = np.empty((len(rows), len(cols)), dtype=complex)
    for i, x in enumerate(rows):
        for j, y in enumerate(cols):
            if side is None:
                out[i, j] = green0(problem, x, y, energy, tol).value
            else:
                out[i, j] = green0_boundary(problem, x, y, energy, side)
    return out


def phi_matrix(problem: BaseProblem, centers: CenterSet, energy, tol: Optional[float] = None,
               side: Optional[str] = None) -> PrincipalMatrix:
    """
    Principal matrix Phi_ij(E) = delta_ij / alpha_i - G0(a_i, a_j | E).

    Real below the spectrum (and symmetric), complex on boundary values.
    """
    _check_dimension(problem)
    points = [problem.point(p) for p in centers.points]
    matrix = np.diag(1.0 / np.array(centers.alphas)).astype(complex) - _kernel_matrix(problem, points, points,
                                                                                      energy, tol, side)
    if side is None and complex(energy).imag == 0.0:
        matrix = 0.5 * (matrix + matrix.T).real
    return PrincipalMatrix(matrix=matrix, energy=energy, condition=float(np.linalg.cond(matrix)))


def _negative_count(problem, centers, energy, tol) -> int:
    values = np.linalg.eigvalsh(phi_matrix(problem, centers, energy, tol).matrix)
    return int(np.sum(values < 0))


def _state_count(problem, centers, energy, tol) -> int:
    """N*(E): perturbed eigenvalues strictly below E (E off both spectra)."""
    return problem.count_below(energy) + _negative_count(problem, centers, energy, tol) - centers.negative_count


def _crossing_eigenvalue(problem, centers, index, tol) -> Callable[[float], float]:
    def value(energy):
        return float(np.linalg.eigvalsh(phi_matrix(problem, centers, energy, tol).matrix)[index])
    return value


def _breakpoints(problem: BaseProblem, emax: float) -> List[Tuple[float, int]]:
    """Distinct unperturbed levels up to emax with multiplicities."""
    if problem.level_count == 0:
        return []
    return [(g.energy, g.multiplicity) for g in problem.distinct_levels(emax) if g.energy <= emax]


def _offset(lo: float, hi: float) -> float:
    gap = hi - lo
    return max(gap * 1e-6, 2.0 * Config.POLE_GUARD * max(1.0, gap))


def _isolate(problem, centers, lo, hi, target, tol) -> Tuple[float, float]:
    """Shrink (lo, hi) until N* changes from target - 1 to target inside it."""
    width = BISECTION_FRACTION * (hi - lo)
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if _state_count(problem, centers, mid, tol) >= target:
            hi = mid
        else:
            lo = mid
    return lo, hi


def _ground_floor(problem, centers, top, tol) -> float:
    """An energy below every perturbed eigenvalue."""
    step = problem.energy_scale
    for _ in range(GROUND_STATE_MAX_DOUBLINGS):
        energy = top - step
        if _state_count(problem, centers, energy, tol) == 0:
            return energy
        step *= 2.0
    raise IllConditioned("could not get below the perturbed ground state", {"last": top - step})


def _condition_at(problem, centers, energy, tol) -> float:
    """max |lambda| over the smallest |lambda| among the non-crossing eigenvalues."""
    values = np.sort(np.abs(np.linalg.eigvalsh(phi_matrix(problem, centers, energy, tol).matrix)))
    if len(values) == 1:
        return 1.0
    return float(values[-1] / max(values[1], np.finfo(float).tiny))


def find_bound_states_multicenter(
    problem: BaseProblem,
    centers: CenterSet,
    window: Optional[Tuple[float, float]] = None,
    tol: Optional[float] = None
) -> List[BoundState]:
    """
    Energies where Phi(E) is singular, plus unperturbed levels that survive.

    Args:
        problem: One-dimensional base problem
        centers: Center set
        window: (Emin, Emax)
        tol: Root tolerance

    Returns:
        Bound states sorted by energy

    Raises:
        IllConditioned: a second eigenvalue of Phi is nearly zero at a root
    """
    tol = tol or Config.DEFAULT_TOL
    _check_dimension(problem)
    emin, emax = resolve_window(problem, window)
    logger.info("multicenter_search_started", problem=problem.label, centers=centers.size, Emin=emin, Emax=emax)

    breaks = _breakpoints(problem, emax)
    top = breaks[0][0] if breaks else emax
    floor = _ground_floor(problem, centers, top, tol)
    if floor < emin and _state_count(problem, centers, emin, tol) > 0:
        raise WindowTooNarrow("a perturbed eigenvalue lies below the window", {"Emin": emin})
    floor = max(floor, emin) if np.isfinite(emin) else floor

    edges = [floor] + [b[0] for b in breaks] + ([emax] if not breaks or breaks[-1][0] < emax else [])
    states: List[BoundState] = []
    all_attractive = all(a > 0 for a in centers.alphas)
    all_repulsive = all(a < 0 for a in centers.alphas)

    for lo, hi in zip(edges[:-1], edges[1:]):
        left = lo if lo == floor else lo + _offset(lo, hi)
        right = hi - _offset(lo, hi) if any(hi == b[0] for b in breaks) else hi - 1e-12 * max(1.0, abs(hi))
        if right <= left:
            continue
        n_left = _state_count(problem, centers, left, tol)
        n_right = _state_count(problem, centers, right, tol)
        nu_left = _negative_count(problem, centers, left, tol)
        for step, target in enumerate(range(n_left + 1, n_right + 1)):
            a, b = _isolate(problem, centers, left, right, target, tol)
            crossing = _crossing_eigenvalue(problem, centers, nu_left + step, tol)
            energy = float(brentq(crossing, a, b, xtol=tol * max(1.0, abs(a)), maxiter=500))
            condition = _condition_at(problem, centers, energy, tol)
            if condition > CONDITION_LIMIT:
                raise IllConditioned("principal matrix nearly rank-deficient beyond one direction",
                                     {"E": energy, "condition": condition})
            e_old = hi if all_attractive and hi != emax else (lo if all_repulsive and lo != floor else None)
            states.append(BoundState(
                energy=energy, bracket=(a, b), kind="shifted",
                normalization=_null_norm(problem, centers, energy, tol),
                wavefunction=partial(multicenter_bound_wavefunction, problem, centers, energy, tol=tol),
                e_old=e_old, residual=float(np.min(np.abs(np.linalg.eigvalsh(
                    phi_matrix(problem, centers, energy, tol).matrix)))),
            ))
            logger.info("bound_state_found", energy=energy, condition=condition)

    for energy, multiplicity in breaks:
        if not emin <= energy <= emax:
            continue
        below_e = energy - _offset(energy, energy + problem.energy_scale)
        above_e = energy + _offset(energy, energy + problem.energy_scale)
        try:
            jump = _state_count(problem, centers, above_e, tol) - _state_count(problem, centers, below_e, tol)
        except PoleProximity:
            continue
        if jump > 0:
            index = problem.count_below(energy) - multiplicity
            states.append(BoundState(
                energy=energy, bracket=(energy, energy), kind="unchanged-node", normalization=None,
                wavefunction=partial(eval_level, problem, index), multiplicity=jump, e_old=energy,
            ))
    states = [s for s in states if s.energy <= emax]
    states.sort(key=lambda s: (s.energy, s.kind))
    for index, state in enumerate(states):
        state.index = index
    return states


def _null_vector(problem, centers, energy, tol) -> np.ndarray:
    values, vectors = np.linalg.eigh(phi_matrix(problem, centers, energy, tol).matrix)
    return vectors[:, int(np.argmin(np.abs(values)))]


def _derivative_matrix(problem, centers, energy, tol) -> np.ndarray:
    points = [problem.point(p) for p in centers.points]
    out = np.empty((len(points), len(points)), dtype=complex)
    for i, x in enumerate(points):
        for j, y in enumerate(points):
            out[i, j] = green0_energy_derivative(problem, x, y, energy, tol)
    return out


def _null_norm(problem, centers, energy, tol) -> float:
    v = _null_vector(problem, centers, energy, tol)
    return float(np.real(np.conj(v) @ _derivative_matrix(problem, centers, energy, tol) @ v))


def multicenter_bound_wavefunction(problem: BaseProblem, centers: CenterSet, energy: float, x,
                                   tol: Optional[float] = None) -> complex:
    """psi(x) = sum_i G0(x, a_i | E*) v_i / sqrt(v^T G0'(E*) v) with v the null vector of Phi(E*)."""
    v = _null_vector(problem, centers, energy, tol)
    norm = np.real(np.conj(v) @ _derivative_matrix(problem, centers, energy, tol) @ v)
    points = [problem.point(p) for p in centers.points]
    kernel = np.array([green0(problem, x, p, energy, tol).value for p in points])
    return complex(kernel @ v / np.sqrt(norm))


# ---------------------------------------------------------------------------
# Recursive construction
# ---------------------------------------------------------------------------

def _recursive_kernel(problem, centers: CenterSet, rows: Sequence, cols: Sequence, energy, tol) -> np.ndarray:
    """
    G_N restricted to rows x cols by successive rank-one updates.

    G_j(x, y) = G_{j-1}(x, y) + G_{j-1}(x, a_j) G_{j-1}(a_j, y) / (1/alpha_j - G_{j-1}(a_j, a_j)).
    """
    points = [problem.point(p) for p in centers.points]
    nodes = list(points) + list(rows) + list(cols)
    matrix = _kernel_matrix(problem, nodes, nodes, energy, tol)
    for j, alpha in enumerate(centers.alphas):
        denominator = 1.0 / alpha - matrix[j, j]
        matrix = matrix + np.outer(matrix[:, j], matrix[j, :]) / denominator
    n, r = len(points), len(rows)
    return matrix[n:n + r, n + r:]


def _recursive_phi(problem, centers: CenterSet, index: int, tol) -> Callable[[float], float]:
    previous = centers.head(index)
    support = problem.point(centers.points[index])
    alpha = centers.alphas[index]

    def value(energy):
        if index == 0:
            g = green0(problem, support, support, energy, tol).value
        else:
            g = _recursive_kernel(problem, previous, [support], [support], energy, tol)[0, 0]
        return float((1.0 / alpha - g).real)
    return value


def recursive_spectrum(problem: BaseProblem, centers: CenterSet, window: Optional[Tuple[float, float]] = None,
                       tol: Optional[float] = None) -> List[float]:
    """
    Shifted eigenvalues built one center at a time.

    Each step solves 1/alpha_j = G_{j-1}(a_j, a_j | E) between the poles of
    G_{j-1}, which are the eigenvalues of the previous step with non-vanishing
    weight at a_j.
    """
    tol = tol or Config.DEFAULT_TOL
    _check_dimension(problem)
    emin, emax = resolve_window(problem, window)
    breaks = _breakpoints(problem, emax)
    top = problem.infimum
    if problem.level_count != 0:
        groups = problem.distinct_levels(emax)
        top = min(top, groups[-1].energy) if not np.isfinite(top) else top

    # (energy, eigenfunction) pairs of the current operator
    spectrum: List[Tuple[float, Callable]] = [
        (g.energy, partial(eval_level, problem, g.start))
        for g in (problem.distinct_levels(emax) if problem.level_count != 0 else [])
    ]
    for index, alpha in enumerate(centers.alphas):
        support = problem.point(centers.points[index])
        weights = [abs(fn(support)) ** 2 for _, fn in spectrum]
        scale = max(weights + [1.0 / max(problem.extent, 1.0)])
        poles = [e for (e, _), w in zip(spectrum, weights) if w > Config.NODE_THRESHOLD * scale]
        kept = [(e, fn) for (e, fn), w in zip(spectrum, weights) if w <= Config.NODE_THRESHOLD * scale]
        roots = find_roots(_recursive_phi(problem, centers, index, tol), poles, problem.infimum,
                           (-np.inf, top), problem.energy_scale, tol, lower_sign=np.sign(alpha))
        head = centers.head(index + 1)
        shifted = [(r.energy, partial(multicenter_bound_wavefunction, problem, head, r.energy, tol=tol))
                   for r in roots]
        spectrum = sorted(kept + shifted, key=lambda item: item[0])
        logger.debug("recursive_step", centers=index + 1, states=len(spectrum))
    result = [e for e, _ in spectrum if emin <= e <= emax and not any(abs(e - b[0]) <= 1e-14 * max(1, abs(b[0]))
                                                                       for b in breaks)]
    return result


def determinant_sign_changes(problem: BaseProblem, centers: CenterSet, window: Tuple[float, float],
                             tol: Optional[float] = None) -> List[Tuple[float, float]]:
    """
    Brackets where det Phi changes sign on a uniform grid, poles and guard bands excluded.

    A sign change across an unperturbed level is a pole, not a root, and is skipped.
    """
    emin, emax = window
    count = int(min(DET_GRID_MAX, max(2, np.ceil((emax - emin) * DET_GRID_PER_UNIT))))
    grid = np.linspace(emin, emax, count + 1)[1:-1]
    levels = [b[0] for b in _breakpoints(problem, emax)]
    brackets, previous = [], None
    for energy in grid:
        try:
            check_pole_guard(problem, energy)
            sign = np.sign(np.linalg.det(phi_matrix(problem, centers, energy, tol).matrix))
        except PoleProximity:
            previous = None
            continue
        if previous is not None and sign != previous[1]:
            if not any(previous[0] < e < energy for e in levels):
                brackets.append((float(previous[0]), float(energy)))
        previous = (energy, sign)
    return brackets


def full_green_multicenter(problem: BaseProblem, centers: CenterSet, x, y, energy,
                           tol: Optional[float] = None) -> complex:
    """G0(x, y) + g(x)^T Phi^-1 g(y) with g_i(x) = G0(x, a_i)."""
    tol = tol or Config.DEFAULT_TOL
    principal = phi_matrix(problem, centers, energy, tol)
    if principal.condition > CONDITION_LIMIT:
        raise ZeroOfPhi("energy is a perturbed eigenvalue", {"E": complex(energy), "condition": principal.condition})
    points = [problem.point(p) for p in centers.points]
    left = _kernel_matrix(problem, [problem.point(x)], points, energy, tol)[0]
    right = _kernel_matrix(problem, points, [problem.point(y)], energy, tol)[:, 0]
    base = green0(problem, x, y, energy, tol).value
    return complex(base + left @ np.linalg.solve(principal.matrix, right))


def generalized_eigenfunction_multicenter(problem: BaseProblem, centers: CenterSet, k: float, x=None,
                                          tol: Optional[float] = None):
    """
    eta_E(x) = chi_k(x) + sum_ij G0(x, a_i | E + i0) [Phi(E + i0)^-1]_ij chi_k(a_j).

    Returns:
        ScatteringState, or eta_E(x) when x is given
    """
    if not problem.side_selection or problem.dimension != 1 or not problem.channels:
        raise Unsupported("scattering states need a one-dimensional side-selecting closed form",
                          {"problem": problem.label})
    if k == 0:
        raise InvalidParameter("channel parameter must be nonzero", {"k": k})
    channel = problem.channels[0]
    energy = float(channel.dispersion(k))
    points = [problem.point(p) for p in centers.points]
    chi = np.array([complex(channel.eigenfunction(k, p)) for p in points])
    coefficients = np.linalg.solve(phi_matrix(problem, centers, energy, tol, side="+").matrix, chi)

    def eta(point):
        point = problem.point(point)
        kernel = np.array([green0_boundary(problem, point, p, energy, "+") for p in points])
        return complex(channel.eigenfunction(k, point)) + complex(kernel @ coefficients)

    if x is not None:
        return eta(x)
    reach = max(abs(p) for p in points)
    distance = reach + SCATTERING_DISTANCE * max(1.0 / abs(k), problem.asymptotic_length)
    return scattering_state(eta, energy, k, distance)


def spectrum_report(states: Sequence[BoundState], oracle: Sequence[float], tol: float) -> Dict:
    """Compare determinant roots with the recursive oracle."""
    direct = [s.energy for s in states if s.kind == "shifted"]
    matched = len(direct) == len(oracle) and all(abs(a - b) <= tol for a, b in zip(direct, oracle))
    return {"direct": direct, "recursive": list(oracle), "match": matched}
