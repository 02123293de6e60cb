"""
Unperturbed Green's function evaluation.

Three evaluation paths are available:
  closed-form  the problem's exact kernel
  expansion    bilinear sum over discrete levels plus channel integrals
  anchored     closed form at an anchor energy below the spectrum plus an
               absolutely convergent subtracted lattice sum (flat torus)
"""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import quad

from config import Config
from services.spectral_core import (
    BaseProblem,
    LevelGroup,
    energy_density,
    richardson_derivative,
    richardson_symmetric_limit,
)
from utils.constants import GREEN_METHODS
from utils.exceptions import CutViolation, InvalidParameter, PoleProximity, Unsupported
from utils.logger import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class GreenEvaluation:
    value: complex
    truncation_index: int
    quadrature_error: float
    method: str


def _same_point(x, y) -> bool:
    return bool(np.all(np.asarray(x) == np.asarray(y)))


def check_pole_guard(problem: BaseProblem, energy: complex):
    """Reject energies inside the guard band of an unperturbed level."""
    near = problem.nearest_level(complex(energy).real)
    if near is None:
        return
    level_energy, spacing = near
    if abs(complex(energy) - level_energy) < Config.POLE_GUARD * max(1.0, spacing):
        raise PoleProximity(
            "energy inside the guard band of an unperturbed level",
            {"E": complex(energy), "E_n": level_energy, "spacing": spacing}
        )


def _on_cut(problem: BaseProblem, energy: complex) -> bool:
    e = complex(energy)
    return e.imag == 0.0 and e.real >= problem.infimum


def _select_method(problem: BaseProblem, energy: complex, method: Optional[str]) -> str:
    if method is not None:
        if method not in GREEN_METHODS:
            raise InvalidParameter(f"unknown method '{method}'", {"known": GREEN_METHODS})
        if method == "closed-form" and not (problem.has_closed_form and problem.closed_form_valid(energy)):
            context = {"E": complex(energy), "problem": problem.label}
            if _on_cut(problem, energy):
                raise CutViolation("closed form needs a side on the cut; use green0_boundary", context)
            raise Unsupported("closed form is not valid at this energy", context)
        return method
    if problem.has_closed_form and problem.closed_form_valid(energy):
        return "closed-form"
    if _on_cut(problem, energy):
        raise CutViolation("real energy inside the continuum needs a side-selecting closed form",
                           {"E": complex(energy), "problem": problem.label})
    if problem.anchor_energy is not None:
        return "anchored"
    return "expansion"


# ---------------------------------------------------------------------------
# Expansion path
# ---------------------------------------------------------------------------

def expansion_count(problem: BaseProblem, energy: complex, tol: float) -> Tuple[int, float]:
    n = problem.level_count
    if n is not None:
        return n, 0.0
    count = max(64, problem.count_below(complex(energy).real) + 8)
    while problem.expansion_tail(energy, count) > tol / 2 and count < Config.TRUNCATION_CAP:
        count = min(2 * count, Config.TRUNCATION_CAP)
    tail = problem.expansion_tail(energy, count)
    if tail > tol / 2:
        logger.warning("expansion_truncated", problem=problem.label, count=count, tail=tail, tol=tol)
    return count, tail


def _discrete_sum(problem, x, y, energy, count, power=1, skip: Optional[LevelGroup] = None):
    if count == 0:
        return 0j
    energies = problem.discrete_energies(count)
    terms = problem.discrete_values(x, count) * np.conj(problem.discrete_values(y, count))
    gap = (energies - energy).astype(complex)
    if skip is not None:
        terms[skip.start:skip.start + skip.multiplicity] = 0.0
        gap[skip.start:skip.start + skip.multiplicity] = 1.0
    terms = terms / gap ** power
    return complex(np.sum(terms))


def channel_integral(channel, x, y, energy, power, tol) -> Tuple[complex, float]:
    """int chi_k(x) conj(chi_k(y)) w(k) / (lambda(k) - E)^power dk over the real line."""
    if channel.dimension != 1:
        raise Unsupported("channel integrals are implemented for one-dimensional channels")
    x, y = float(x), float(y)
    r = x - y

    def h(k):
        return (channel.envelope(k, x) * np.conj(channel.envelope(k, y)) * channel.measure_weight(k)
                / (channel.dispersion(k) - energy) ** power)

    def even(k):
        return complex(h(k) + h(-k))

    def odd(k):
        return complex(h(k) - h(-k))

    eps = tol / 8
    limit = Config.QUAD_LIMIT
    total, error = 0j, 0.0
    if abs(r) < 1e-12:
        for part, unit in ((lambda k: even(k).real, 1.0), (lambda k: even(k).imag, 1j)):
            val, err = quad(part, 0.0, np.inf, epsabs=eps, epsrel=0.0, limit=limit)
            total += unit * val
            error += err
        return total, error

    sign = 1.0 if r > 0 else -1.0
    pieces = (
        ("cos", lambda k: even(k).real, 1.0),
        ("cos", lambda k: even(k).imag, 1j),
        ("sin", lambda k: odd(k).real, 1j * sign),
        ("sin", lambda k: odd(k).imag, -1.0 * sign),
    )
    for weight, part, unit in pieces:
        val, err = quad(part, 0.0, np.inf, weight=weight, wvar=abs(r), epsabs=eps, limlst=200)
        total += unit * val
        error += err
    return total, error


def _continuum_sum(problem, x, y, energy, power, tol) -> Tuple[complex, float]:
    total, error = 0j, 0.0
    for channel in problem.channels:
        val, err = channel_integral(channel, x, y, energy, power, tol)
        total += val
        error += err
    return total, error


def _expansion(problem, x, y, energy, tol, power=1, skip=None) -> GreenEvaluation:
    count, tail = expansion_count(problem, energy, tol)
    value = _discrete_sum(problem, x, y, energy, count, power, skip)
    cont, err = _continuum_sum(problem, x, y, energy, power, tol)
    return GreenEvaluation(value + cont, count, tail + err, "expansion")


# ---------------------------------------------------------------------------
# Anchored path
# ---------------------------------------------------------------------------

def _anchored(problem, x, y, energy, tol, skip: Optional[LevelGroup] = None):
    """
    Anchored representation around E_r = problem.anchor_energy.

    G(E) = G(E_r) + (E - E_r) G'(E_r) + (E - E_r)^2 sum q_n / ((E_n - E_r)^2 (E_n - E)),
    q_n = phi_n(x) conj(phi_n(y)). On the two-dimensional diagonal G(E_r) is
    dropped, so the value is G(E) - G(E_r). With skip set, the level's pole
    p / (E_k - E) is removed exactly.

    Returns:
        (value, derivative, error estimate, modes used)
    """
    e_r = problem.anchor_energy
    spread = abs(complex(energy) - e_r)
    e_cut = problem.anchored_cutoff(spread, tol)
    count = problem.count_below(e_cut)
    energies = problem.discrete_energies(count)
    q = problem.discrete_values(x, count) * np.conj(problem.discrete_values(y, count))
    if skip is not None:
        q = q.copy()
        q[skip.start:skip.start + skip.multiplicity] = 0.0

    diagonal = problem.dimension == 2 and _same_point(x, y)
    base0 = 0j if diagonal else problem.closed_form(x, y, e_r)
    base1 = problem.closed_form_derivative(x, y, e_r)
    if skip is not None:
        p = problem.level_residue(skip, x, y)
        if not diagonal:
            base0 -= p / (skip.energy - e_r)
        base1 -= p / (skip.energy - e_r) ** 2

    shifted = energies - e_r
    dr = complex(energy) - e_r
    gap = (energies - energy).astype(complex)
    if skip is not None:
        gap[skip.start:skip.start + skip.multiplicity] = 1.0
    s1 = np.sum(q / (shifted ** 2 * gap))
    s2 = np.sum(q / (shifted ** 2 * gap ** 2))
    value = base0 + dr * base1 + dr ** 2 * s1
    derivative = base1 + 2 * dr * s1 + dr ** 2 * s2
    error = problem.anchored_tail(spread, e_cut)
    logger.debug("anchored_evaluated", problem=problem.label, modes=count, error=error)
    return complex(value), complex(derivative), error, count


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def green0(problem: BaseProblem, x, y, energy: complex, tol: Optional[float] = None,
           method: Optional[str] = None) -> GreenEvaluation:
    """
    Evaluate the unperturbed Green's function G0(x, y | E).

    Args:
        problem: Base problem
        x: Field point
        y: Source point
        energy: Complex energy, or real energy below the continuum
        tol: Target absolute error (defaults to Config.DEFAULT_TOL)
        method: Force "closed-form", "expansion" or "anchored"

    Returns:
        GreenEvaluation
    """
    tol = tol or Config.DEFAULT_TOL
    x, y = problem.point(x), problem.point(y)
    check_pole_guard(problem, energy)
    chosen = _select_method(problem, energy, method)
    if problem.dimension == 2 and _same_point(x, y):
        raise Unsupported("diagonal kernel diverges in two dimensions; use subtracted_diagonal",
                          {"problem": problem.label})

    if chosen == "closed-form":
        value = problem.closed_form(x, y, energy)
        return GreenEvaluation(value, 0, 1e-15 * max(1.0, abs(value)), chosen)
    if _on_cut(problem, energy):
        raise CutViolation("expansion is undefined on the cut", {"E": complex(energy)})
    if chosen == "anchored":
        if problem.anchor_energy is None:
            raise Unsupported("problem has no anchor energy", {"problem": problem.label})
        value, _, error, count = _anchored(problem, x, y, energy, tol)
        return GreenEvaluation(value, count, error, chosen)
    return _expansion(problem, x, y, energy, tol)


def green0_boundary(problem: BaseProblem, x, y, energy: float, side: str) -> complex:
    """Boundary value G0(x, y | E +- i0) for E on the continuum."""
    if side not in ("+", "-"):
        raise InvalidParameter("side must be '+' or '-'", {"side": side})
    if not problem.side_selection:
        raise Unsupported("boundary values need a side-selecting closed form", {"problem": problem.label})
    x, y = problem.point(x), problem.point(y)
    return problem.closed_form(x, y, float(energy), side=side)


def green0_energy_derivative(problem: BaseProblem, x, y, energy: float,
                             tol: Optional[float] = None) -> complex:
    """dG0(x, y | E)/dE at a real energy off the spectrum."""
    tol = tol or Config.DEFAULT_TOL
    x, y = problem.point(x), problem.point(y)
    check_pole_guard(problem, energy)
    chosen = _select_method(problem, energy, None)
    if chosen == "closed-form":
        return problem.closed_form_derivative(x, y, energy)
    if chosen == "anchored":
        return _anchored(problem, x, y, energy, tol)[1]
    return _expansion(problem, x, y, energy, tol, power=2).value


def green0_derivative(problem: BaseProblem, a, energy: float, tol: Optional[float] = None) -> float:
    """
    dG0(a, a | E)/dE, a sum of squared amplitudes over (E_n - E)^2, hence positive.

    Finite on the two-dimensional diagonal even though G0(a, a | E) is not.
    """
    if complex(energy).imag != 0.0 or float(energy) >= problem.infimum:
        raise CutViolation("derivative needs a real energy below the continuum", {"E": energy})
    return float(green0_energy_derivative(problem, a, a, float(energy), tol).real)


def reduced_green(problem: BaseProblem, x, y, level: LevelGroup,
                  tol: Optional[float] = None) -> Tuple[complex, complex]:
    """
    Green's function with one level removed, and its energy derivative, at E_k.

    R(x, y | E_k) = sum over n outside the level of phi_n(x) conj(phi_n(y)) / (E_n - E_k)
    plus the continuum. Closed-form problems remove the pole by symmetric
    Richardson extrapolation; anchored problems subtract it exactly.

    Returns:
        (R, dR/dE) at E_k
    """
    tol = tol or Config.DEFAULT_TOL
    x, y = problem.point(x), problem.point(y)
    e_k = level.energy
    near = problem.nearest_level(e_k)
    others = [g.energy for g in problem.distinct_levels(e_k + near[1]) if g.start != level.start]
    gap = min([abs(e - e_k) for e in others] + [abs(problem.infimum - e_k)])
    step = 0.02 * gap

    if problem.has_closed_form and problem.closed_form_valid(e_k - step) and problem.closed_form_valid(e_k + step):
        residue = problem.level_residue(level, x, y)

        def regular(e):
            return problem.closed_form(x, y, e) - residue / (e_k - e)

        return (complex(richardson_symmetric_limit(regular, e_k, step)),
                complex(richardson_derivative(regular, e_k, step)))

    if problem.anchor_energy is not None:
        value, derivative, _, _ = _anchored(problem, x, y, e_k, tol, skip=level)
        return value, derivative

    value = _expansion(problem, x, y, e_k, tol, power=1, skip=level).value
    derivative = _expansion(problem, x, y, e_k, tol, power=2, skip=level).value
    return value, derivative


def subtracted_diagonal(problem: BaseProblem, a, energy: float, e_ref: float,
                        tol: Optional[float] = None, skip: Optional[LevelGroup] = None) -> float:
    """
    G0(a, a | E) - G0(a, a | E_ref), finite in two dimensions.

    Equals sum |phi_n(a)|^2 (E - E_ref) / ((E_n - E)(E_n - E_ref)) plus the
    continuum analog. With skip set, the terms of that level are left out.
    """
    tol = tol or Config.DEFAULT_TOL
    a = problem.point(a)
    if skip is None:
        check_pole_guard(problem, energy)
        check_pole_guard(problem, e_ref)

    if problem.dimension == 1:
        if skip is None:
            return float((green0(problem, a, a, energy, tol).value - green0(problem, a, a, e_ref, tol).value).real)
        if energy != skip.energy:
            raise InvalidParameter("skip requires the energy of the skipped level", {"E": energy})
        r_k = reduced_green(problem, a, a, skip, tol)[0]
        full_ref = green0(problem, a, a, e_ref, tol).value
        residue = problem.level_residue(skip, a, a)
        return float((r_k - (full_ref - residue / (skip.energy - e_ref))).real)

    if problem.anchor_energy is not None:
        upper = _anchored(problem, a, a, energy, tol, skip=skip)[0]
        lower = _anchored(problem, a, a, e_ref, tol, skip=skip)[0]
        return float((upper - lower).real)

    if problem.level_count == 0 and problem.has_closed_form:
        # Two-dimensional free kernel: only the logarithm survives the subtraction
        c = problem.units.kinetic
        if energy >= 0 or e_ref >= 0:
            raise CutViolation("subtraction needs energies below zero", {"E": energy, "E_ref": e_ref})
        return float(-np.log(np.sqrt(energy / e_ref)) / (2 * np.pi * c))

    raise Unsupported("no subtracted diagonal for this problem", {"problem": problem.label})


def spectral_jump(problem: BaseProblem, x, y, energy: float) -> complex:
    """2 pi i times the energy-normalized channel density at E (the right side of the jump relation)."""
    x, y = problem.point(x), problem.point(y)
    total = 0j
    for channel in problem.channels:
        if energy > channel.infimum:
            total += energy_density(channel, energy, x, y)
    return 2j * np.pi * total
