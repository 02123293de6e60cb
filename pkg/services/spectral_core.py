"""
Spectral data model for unperturbed Hamiltonians.

A base problem is described by its discrete levels, its continuum channels and,
where one is known, a closed-form Green's function. The catalog at the bottom
of this module holds the exactly solvable problems used by every solver.
"""
import cmath
from dataclasses import dataclass, field
from functools import lru_cache, partial
from typing import Callable, Dict, List, NamedTuple, Optional, Tuple

import numpy as np
from scipy import special as sp
from scipy.integrate import trapezoid

from config import Config
from utils.constants import CATALOG_LABELS, CATALOG_PARAMETERS
from utils.exceptions import CutViolation, IndexOutOfRange, InvalidParameter, Unsupported
from utils.logger import get_logger
from utils.special import k0, k1
from utils.validators import validate_point, validate_positive

logger = get_logger(__name__)


@dataclass(frozen=True)
class Units:
    """Unit system: hbar and particle mass. The default is hbar = 2m = 1."""

    hbar: float = 1.0
    mass: float = 0.5

    @classmethod
    def default(cls) -> "Units":
        return cls(hbar=Config.HBAR, mass=Config.MASS)

    @property
    def kinetic(self) -> float:
        """hbar^2 / 2m, so that a plane wave of momentum k has energy kinetic * k^2."""
        return self.hbar ** 2 / (2.0 * self.mass)

    def decay_rate(self, energy: complex, side: Optional[str] = None) -> complex:
        """
        Decay rate s = sqrt(-2mE)/hbar on the principal branch.

        For real E >= 0 a side must be given: "+" returns -ik (outgoing waves
        for E + i0), "-" returns +ik.
        """
        e = complex(energy)
        if e.imag == 0.0 and e.real >= 0.0:
            if side not in ("+", "-"):
                raise CutViolation("energy lies on the cut", {"E": e.real})
            k = np.sqrt(e.real / self.kinetic)
            return -1j * k if side == "+" else 1j * k
        return cmath.sqrt(-e / self.kinetic)


@dataclass(frozen=True)
class DiscreteLevel:
    index: int
    energy: float
    eigenfunction: Callable


class LevelGroup(NamedTuple):
    """A distinct eigenvalue with its block of mode indices."""
    energy: float
    start: int
    multiplicity: int


@dataclass(frozen=True)
class ContinuumChannel:
    """
    One branch of the continuous spectrum.

    One-dimensional channels use chi_k(x) = exp(ikx) * envelope(k, x) with
    dispersion infimum + kinetic * k^2 and measure weight(k) dk over the real line.
    """

    name: str
    infimum: float
    kinetic: float
    weight: Callable
    envelope: Optional[Callable] = None
    dimension: int = 1

    def dispersion(self, k):
        k = np.asarray(k, dtype=float)
        if self.dimension == 2:
            return self.infimum + self.kinetic * np.sum(k ** 2, axis=-1)
        return self.infimum + self.kinetic * k ** 2

    def dispersion_derivative(self, k):
        return 2.0 * self.kinetic * np.asarray(k, dtype=float)

    def measure_weight(self, k):
        return self.weight(np.asarray(k, dtype=float))

    def eigenfunction(self, k, x):
        if self.dimension == 2:
            k = np.asarray(k, dtype=float)
            x = np.asarray(x, dtype=float)
            return np.exp(1j * np.sum(k * x, axis=-1))
        k = np.asarray(k, dtype=float)
        x = np.asarray(x, dtype=float)
        return np.exp(1j * k * x) * self.envelope(k, x)

    def momenta(self, energy: float) -> Tuple[float, float]:
        """The two channel parameters with dispersion equal to energy."""
        if energy <= self.infimum:
            raise InvalidParameter("energy below channel infimum", {"E": energy})
        k = float(np.sqrt((energy - self.infimum) / self.kinetic))
        return k, -k


# ---------------------------------------------------------------------------
# Numerical helpers shared with the greens module
# ---------------------------------------------------------------------------

def richardson_derivative(func: Callable, energy: float, step: float):
    """Central difference derivative extrapolated to O(step^6)."""
    def central(h):
        return (func(energy + h) - func(energy - h)) / (2.0 * h)

    d1, d2, d3 = central(step), central(step / 2), central(step / 4)
    r1 = (4.0 * d2 - d1) / 3.0
    r2 = (4.0 * d3 - d2) / 3.0
    return (16.0 * r2 - r1) / 15.0


def richardson_symmetric_limit(func: Callable, energy: float, step: float):
    """Limit of func at energy from symmetric averages, extrapolated to O(step^6)."""
    def average(h):
        return 0.5 * (func(energy + h) + func(energy - h))

    a1, a2, a3 = average(step), average(step / 2), average(step / 4)
    r1 = (4.0 * a2 - a1) / 3.0
    r2 = (4.0 * a3 - a2) / 3.0
    return (16.0 * r2 - r1) / 15.0


def _inclusive(energy: float) -> float:
    return energy + 1e-12 * max(1.0, abs(energy))


def group_levels(energies: np.ndarray, rtol: float = 1e-12) -> List[LevelGroup]:
    """Group sorted mode energies into distinct levels."""
    groups: List[LevelGroup] = []
    start = 0
    for i in range(1, len(energies) + 1):
        if i == len(energies) or abs(energies[i] - energies[start]) > rtol * max(1.0, abs(energies[start])):
            groups.append(LevelGroup(float(energies[start]), start, i - start))
            start = i
    return groups


# ---------------------------------------------------------------------------
# Base problem
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BaseProblem:
    """
    Spectral description of an unperturbed Hamiltonian.

    Subclasses provide the discrete data, the channels and the optional
    closed-form kernel. Instances are immutable and all evaluators are pure.
    """

    label: str
    dimension: int
    units: Units
    parameters: Tuple[Tuple[str, float], ...] = ()
    channels: Tuple[ContinuumChannel, ...] = field(default=())

    # --- discrete spectrum -------------------------------------------------

    @property
    def level_count(self) -> Optional[int]:
        """Number of discrete modes, None for an infinite sequence."""
        return 0

    def discrete_energies(self, count: int) -> np.ndarray:
        return np.empty(0)

    def discrete_values(self, x, count: int) -> np.ndarray:
        shape = np.shape(x)[:-1] if self.dimension == 2 else np.shape(x)
        return np.zeros(shape + (0,), dtype=complex)

    def count_below(self, energy: float) -> int:
        """Number of discrete modes with E_n <= energy."""
        n = self.level_count
        if not n:
            return 0
        energies = self.discrete_energies(n)
        return int(np.searchsorted(energies, _inclusive(energy), side="right"))

    def level(self, k: int) -> DiscreteLevel:
        self._check_level_index(k)
        energy = float(self.discrete_energies(k + 1)[k])
        return DiscreteLevel(index=k, energy=energy, eigenfunction=partial(eval_level, self, k))

    def modes_through(self, energy: float) -> int:
        """Mode count covering every level up to energy plus the next full level."""
        below = self.count_below(energy)
        n = self.level_count
        if n is not None and below >= n:
            return n
        next_energy = float(self.discrete_energies(below + 1)[below])
        return self.count_below(next_energy)

    def distinct_levels(self, energy: float) -> List[LevelGroup]:
        """Distinct levels up to energy, plus the first level above it."""
        count = self.modes_through(energy)
        return group_levels(self.discrete_energies(count))

    def nearest_level(self, energy: float) -> Optional[Tuple[float, float]]:
        """(energy of nearest level, local level spacing) or None without levels."""
        n = self.level_count
        if n == 0:
            return None
        if n is None:
            count = self.modes_through(energy)
            count = self.modes_through(float(self.discrete_energies(count)[-1]))
        else:
            count = n
        values = np.array([g.energy for g in group_levels(self.discrete_energies(count))])
        idx = int(np.argmin(np.abs(values - energy)))
        gaps = np.diff(values)
        if len(gaps) == 0:
            spacing = abs(self.infimum - values[0]) if np.isfinite(self.infimum) else self.energy_scale
        else:
            neighbors = [gaps[i] for i in (idx - 1, idx) if 0 <= i < len(gaps)]
            spacing = min(neighbors)
        return float(values[idx]), float(spacing)

    def level_residue(self, group: LevelGroup, x, y) -> complex:
        """Sum over the modes of a level of phi_n(x) conj(phi_n(y))."""
        count = group.start + group.multiplicity
        vx = self.discrete_values(x, count)[..., group.start:count]
        vy = self.discrete_values(y, count)[..., group.start:count]
        return complex(np.sum(vx * np.conj(vy)))

    def eigenfunction_scale(self, group: LevelGroup) -> float:
        """Max over sampled points of the summed |phi_n|^2 of a level."""
        count = group.start + group.multiplicity
        grid = self.sample_points()
        vals = self.discrete_values(grid, count)[..., group.start:count]
        return float(np.max(np.sum(np.abs(vals) ** 2, axis=-1)))

    def sample_points(self):
        return np.linspace(-self.extent, self.extent, 2001)

    def expansion_tail(self, energy: complex, count: int) -> float:
        """Bound on the discrete-sum tail after count modes (zero for finite spectra)."""
        return 0.0

    # --- continuum ---------------------------------------------------------

    @property
    def infimum(self) -> float:
        if not self.channels:
            return float("inf")
        return min(ch.infimum for ch in self.channels)

    # --- scales ------------------------------------------------------------

    @property
    def energy_scale(self) -> float:
        return self.units.kinetic

    @property
    def extent(self) -> float:
        return 20.0

    @property
    def asymptotic_length(self) -> float:
        return 0.0

    def reference_energy(self) -> float:
        """An energy safely below the whole spectrum."""
        bottom = self.infimum
        if self.level_count != 0:
            bottom = min(bottom, float(self.discrete_energies(1)[0]))
        return bottom - self.energy_scale

    # --- closed-form kernel ------------------------------------------------

    @property
    def has_closed_form(self) -> bool:
        return False

    @property
    def side_selection(self) -> bool:
        """True when the closed form also gives boundary values on the cut."""
        return False

    @property
    def anchor_energy(self) -> Optional[float]:
        """Energy where the closed form anchors the subtracted expansion."""
        return None

    def anchored_cutoff(self, spread: float, tol: float) -> float:
        """Mode energy cut for the anchored sum at distance spread from the anchor."""
        raise Unsupported("no anchored representation", {"problem": self.label})

    def anchored_tail(self, spread: float, e_cut: float) -> float:
        raise Unsupported("no anchored representation", {"problem": self.label})

    def closed_form_valid(self, energy: complex) -> bool:
        return False

    def closed_form(self, x, y, energy: complex, side: Optional[str] = None) -> complex:
        raise Unsupported("no closed-form Green's function", {"problem": self.label})

    def closed_form_derivative(self, x, y, energy: float) -> complex:
        """dG/dE from the closed form; numerical unless a subclass knows it analytically."""
        near = self.nearest_level(energy)
        dist = abs(energy - near[0]) if near else self.energy_scale
        if np.isfinite(self.infimum):
            dist = min(dist, abs(self.infimum - energy))
        step = 0.02 * dist
        return richardson_derivative(lambda e: self.closed_form(x, y, e), energy, step)

    # --- helpers -----------------------------------------------------------

    def point(self, x):
        return validate_point(x, self.dimension)

    def _check_level_index(self, k: int):
        n = self.level_count
        if k < 0 or (n is not None and k >= n):
            raise IndexOutOfRange("level index out of range", {"k": k, "level_count": n})

    def parameter(self, name: str) -> float:
        return dict(self.parameters)[name]


# ---------------------------------------------------------------------------
# Catalog problems
# ---------------------------------------------------------------------------

def _line_decay(units: Units, energy, side):
    s = units.decay_rate(energy, side)
    if s.real < 0 or (s.real == 0 and side is None):
        raise CutViolation("energy lies on the cut", {"E": complex(energy)})
    return s


@dataclass(frozen=True)
class FreeLine(BaseProblem):
    """Free particle on the line: continuum only, chi_k = exp(ikx) with weight 1/(2 pi)."""

    @property
    def has_closed_form(self) -> bool:
        return True

    @property
    def side_selection(self) -> bool:
        return True

    def closed_form_valid(self, energy) -> bool:
        e = complex(energy)
        return e.imag != 0.0 or e.real < 0.0

    def closed_form(self, x, y, energy, side=None):
        c = self.units.kinetic
        s = _line_decay(self.units, energy, side)
        r = abs(float(x) - float(y))
        return complex(np.exp(-s * r) / (2.0 * c * s))

    def closed_form_derivative(self, x, y, energy):
        c = self.units.kinetic
        s = _line_decay(self.units, energy, None)
        r = abs(float(x) - float(y))
        return complex(np.exp(-s * r) * (r * s + 1.0) / (4.0 * c ** 2 * s ** 3))


@dataclass(frozen=True)
class Reflectionless(BaseProblem):
    """Reflectionless sech^2 well with one bound state at -kinetic * kappa^2."""

    @property
    def kappa(self) -> float:
        return self.parameter("kappa")

    @property
    def level_count(self) -> Optional[int]:
        return 1

    def discrete_energies(self, count):
        return np.full(min(count, 1), -self.units.kinetic * self.kappa ** 2)

    def discrete_values(self, x, count):
        x = np.asarray(x, dtype=float)
        ground = np.sqrt(self.kappa / 2.0) / np.cosh(self.kappa * x)
        return ground.astype(complex)[..., None][..., :min(count, 1)]

    @property
    def energy_scale(self) -> float:
        return self.units.kinetic * self.kappa ** 2

    @property
    def extent(self) -> float:
        return 20.0 / self.kappa

    @property
    def asymptotic_length(self) -> float:
        return 1.0 / self.kappa

    @property
    def has_closed_form(self) -> bool:
        return True

    @property
    def side_selection(self) -> bool:
        return True

    def closed_form_valid(self, energy) -> bool:
        e = complex(energy)
        return e.imag != 0.0 or e.real < 0.0

    def _jost_terms(self, x, y, s):
        kap = self.kappa
        lo, hi = sorted((float(x), float(y)))
        t_lo, t_hi = np.tanh(kap * lo), np.tanh(kap * hi)
        phase = np.exp(s * (lo - hi))
        numerator = phase * (s - kap * t_lo) * (s + kap * t_hi)
        dnum = (lo - hi) * numerator + phase * ((s + kap * t_hi) + (s - kap * t_lo))
        return numerator, dnum

    def closed_form(self, x, y, energy, side=None):
        c, kap = self.units.kinetic, self.kappa
        s = _line_decay(self.units, energy, side)
        numerator, _ = self._jost_terms(x, y, s)
        return complex(numerator / (2.0 * c * s * (s ** 2 - kap ** 2)))

    def closed_form_derivative(self, x, y, energy):
        c, kap = self.units.kinetic, self.kappa
        s = _line_decay(self.units, energy, None)
        numerator, dnum = self._jost_terms(x, y, s)
        denom = 2.0 * c * (s ** 3 - kap ** 2 * s)
        ddenom = 2.0 * c * (3.0 * s ** 2 - kap ** 2)
        dg_ds = (dnum * denom - numerator * ddenom) / denom ** 2
        return complex(dg_ds * (-1.0 / (2.0 * c * s)))


@dataclass(frozen=True)
class HarmonicOscillator(BaseProblem):
    """Harmonic oscillator: purely discrete, Hermite-function eigenfunctions."""

    @property
    def omega(self) -> float:
        return self.parameter("omega")

    @property
    def quantum(self) -> float:
        return self.units.hbar * self.omega

    @property
    def length(self) -> float:
        return float(np.sqrt(self.units.hbar / (self.units.mass * self.omega)))

    @property
    def level_count(self) -> Optional[int]:
        return None

    def discrete_energies(self, count):
        return self.quantum * (np.arange(count) + 0.5)

    def discrete_values(self, x, count):
        xi = np.asarray(x, dtype=float) / self.length
        out = np.zeros(xi.shape + (count,))
        if count == 0:
            return out.astype(complex)
        prev = np.zeros_like(xi)
        cur = np.pi ** -0.25 * np.exp(-0.5 * xi ** 2)
        out[..., 0] = cur
        for n in range(count - 1):
            nxt = np.sqrt(2.0 / (n + 1)) * xi * cur - np.sqrt(n / (n + 1.0)) * prev
            prev, cur = cur, nxt
            out[..., n + 1] = cur
        return (out / np.sqrt(self.length)).astype(complex)

    def count_below(self, energy):
        level = np.floor(_inclusive(energy) / self.quantum - 0.5)
        return max(0, int(level) + 1)

    def expansion_tail(self, energy, count):
        # Envelope |phi_n|^2 <= (2/pi) / (length * sqrt(2n+1)); sum replaced by its integral
        a = 0.5 * self.quantum
        b = -complex(energy).real
        u0 = np.sqrt(2.0 * count + 1.0)
        if a * u0 ** 2 + b <= 0:
            return float("inf")
        if b > 0:
            integral = (np.pi / 2 - np.arctan(u0 * np.sqrt(a / b))) / np.sqrt(a * b)
        elif b < 0:
            root = np.sqrt(-b)
            integral = np.log((u0 * np.sqrt(a) + root) / (u0 * np.sqrt(a) - root)) / (2 * np.sqrt(-a * b))
        else:
            integral = 1.0 / (a * u0)
        return float((2.0 / np.pi) / self.length * integral)

    @property
    def energy_scale(self) -> float:
        return self.quantum

    @property
    def extent(self) -> float:
        return 12.0 * self.length

    def eigenfunction_scale(self, group):
        k = group.start
        grid = np.linspace(-1, 1, 2001) * self.length * (np.sqrt(2 * k + 1) + 4)
        vals = self.discrete_values(grid, k + 1)[..., k]
        return float(np.max(np.abs(vals) ** 2))

    @property
    def has_closed_form(self) -> bool:
        return True

    def closed_form_valid(self, energy) -> bool:
        return complex(energy).imag == 0.0

    def closed_form(self, x, y, energy, side=None):
        eps = complex(energy).real / self.quantum
        nu = eps - 0.5
        lo, hi = sorted((float(x) / self.length, float(y) / self.length))
        right, _ = sp.pbdv(nu, np.sqrt(2.0) * hi)
        left, _ = sp.pbdv(nu, -np.sqrt(2.0) * lo)
        prefactor = sp.gamma(0.5 - eps) / (self.quantum * self.length * np.sqrt(np.pi))
        return complex(prefactor * right * left)


@lru_cache(maxsize=32)
def _torus_lattice(l1: float, l2: float, kinetic: float, radius: int):
    """
    Lattice modes of the flat torus with energy up to kinetic*(2 pi radius)^2/(l1 l2).

    Returns read-only arrays (energies, n1, n2) sorted by energy, ties broken
    lexicographically by (n1, n2).
    """
    e_cut = kinetic * (2 * np.pi * radius) ** 2 / (l1 * l2)
    m1 = int(np.floor(l1 * np.sqrt(e_cut / kinetic) / (2 * np.pi))) + 1
    m2 = int(np.floor(l2 * np.sqrt(e_cut / kinetic) / (2 * np.pi))) + 1
    n1, n2 = np.meshgrid(np.arange(-m1, m1 + 1), np.arange(-m2, m2 + 1), indexing="ij")
    n1, n2 = n1.ravel(), n2.ravel()
    energies = kinetic * (2 * np.pi) ** 2 * ((n1 / l1) ** 2 + (n2 / l2) ** 2)
    keep = energies <= e_cut * (1 + 1e-12)
    energies, n1, n2 = energies[keep], n1[keep], n2[keep]
    order = np.lexsort((n2, n1, energies))
    arrays = (energies[order], n1[order].astype(float), n2[order].astype(float))
    for arr in arrays:
        arr.setflags(write=False)
    logger.debug("torus_lattice_built", radius=radius, modes=len(arrays[0]))
    return arrays


@dataclass(frozen=True)
class FlatTorus(BaseProblem):
    """Flat two-torus with sides L1, L2: plane waves, purely discrete."""

    @property
    def sides(self) -> Tuple[float, float]:
        return self.parameter("L1"), self.parameter("L2")

    @property
    def area(self) -> float:
        l1, l2 = self.sides
        return l1 * l2

    @property
    def level_count(self) -> Optional[int]:
        return None

    def lattice(self, radius: int):
        l1, l2 = self.sides
        return _torus_lattice(l1, l2, self.units.kinetic, int(radius))

    def radius_for_energy(self, energy: float) -> int:
        """Smallest lattice radius whose cut includes every mode up to energy."""
        energy = max(float(energy), 0.0)
        return int(np.ceil(np.sqrt(energy * self.area / self.units.kinetic) / (2 * np.pi))) + 1

    def _lattice_with(self, count: int):
        radius = max(2, int(np.ceil(np.sqrt(1.3 * count / np.pi))) + 2)
        while True:
            energies, n1, n2 = self.lattice(radius)
            if len(energies) >= count:
                return energies, n1, n2
            radius *= 2

    def discrete_energies(self, count):
        return np.array(self._lattice_with(count)[0][:count])

    def mode_values(self, x, n1, n2):
        l1, l2 = self.sides
        x = np.asarray(x, dtype=float)
        phase = 2 * np.pi * (x[..., 0, None] * n1 / l1 + x[..., 1, None] * n2 / l2)
        return np.exp(1j * phase) / np.sqrt(self.area)

    def discrete_values(self, x, count):
        _, n1, n2 = self._lattice_with(count)
        return self.mode_values(x, n1[:count], n2[:count])

    def count_below(self, energy):
        energies, _, _ = self.lattice(self.radius_for_energy(energy))
        return int(np.searchsorted(energies, _inclusive(energy), side="right"))

    def eigenfunction_scale(self, group):
        return group.multiplicity / self.area

    def sample_points(self):
        l1, l2 = self.sides
        g1, g2 = np.meshgrid(np.linspace(0, l1, 9), np.linspace(0, l2, 9))
        return np.stack([g1.ravel(), g2.ravel()], axis=-1)

    def expansion_tail(self, energy, count):
        return float("inf")

    @property
    def energy_scale(self) -> float:
        return self.units.kinetic * (2 * np.pi / max(self.sides)) ** 2

    @property
    def extent(self) -> float:
        return max(self.sides)

    @property
    def has_closed_form(self) -> bool:
        return True

    @property
    def anchor_energy(self) -> float:
        kappa = 4.0 / min(self.sides)
        return -self.units.kinetic * kappa ** 2

    def anchored_tail(self, spread, e_cut):
        # Weyl density area/(4 pi c) against |phi_n|^2 = 1/area
        return float(spread * max(spread, 2.0) / (8 * np.pi * self.units.kinetic * e_cut ** 2))

    def anchored_cutoff(self, spread, tol):
        c = self.units.kinetic
        needed = np.sqrt(spread * max(spread, 2.0) / (4 * np.pi * c * tol))
        cap = c * (2 * np.pi * Config.SHELL_CAP) ** 2 / self.area
        e_cut = max(needed, 4.0 * (spread + abs(self.anchor_energy)))
        if e_cut > cap:
            logger.warning("anchored_sum_capped", needed=float(e_cut), cap=float(cap))
        return float(min(e_cut, cap))

    def closed_form_valid(self, energy) -> bool:
        e = complex(energy)
        if e.imag != 0.0 or e.real >= 0.0:
            return False
        return np.sqrt(-e.real / self.units.kinetic) * min(self.sides) >= 0.5

    def _images(self, x, y, kappa):
        l1, l2 = self.sides
        d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        d = d - np.array([l1, l2]) * np.round(d / np.array([l1, l2]))
        m1 = int(np.ceil(40.0 / (kappa * l1))) + 1
        m2 = int(np.ceil(40.0 / (kappa * l2))) + 1
        g1, g2 = np.meshgrid(np.arange(-m1, m1 + 1), np.arange(-m2, m2 + 1), indexing="ij")
        rho = np.hypot(d[0] + g1.ravel() * l1, d[1] + g2.ravel() * l2)
        return rho

    def _kappa(self, energy):
        e = complex(energy)
        if not self.closed_form_valid(e):
            raise CutViolation("image sum needs a real energy well below zero", {"E": e})
        return float(np.sqrt(-e.real / self.units.kinetic))

    def closed_form(self, x, y, energy, side=None):
        kappa = self._kappa(energy)
        rho = self._images(x, y, kappa)
        if np.min(rho) == 0.0:
            raise Unsupported("diagonal kernel diverges in two dimensions", {"problem": self.label})
        return complex(np.sum(k0(kappa * rho)) / (2 * np.pi * self.units.kinetic))

    def closed_form_derivative(self, x, y, energy):
        c = self.units.kinetic
        kappa = self._kappa(energy)
        rho = self._images(x, y, kappa)
        zero = rho == 0.0
        total = np.sum(rho[~zero] * k1(kappa * rho[~zero])) + np.count_nonzero(zero) / kappa
        return complex(total / (4 * np.pi * c ** 2 * kappa))


@dataclass(frozen=True)
class FreePlane(BaseProblem):
    """Free particle in the plane: continuum only, kernel K0(kappa r) / (2 pi kinetic)."""

    @property
    def has_closed_form(self) -> bool:
        return True

    def closed_form_valid(self, energy) -> bool:
        return complex(energy).real < 0.0

    def _kappa(self, energy):
        e = complex(energy)
        if e.real >= 0.0:
            raise CutViolation("free-plane kernel requires Re E < 0", {"E": e})
        return cmath.sqrt(-e / self.units.kinetic)

    def closed_form(self, x, y, energy, side=None):
        kappa = self._kappa(energy)
        r = float(np.hypot(*(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))))
        if r == 0.0:
            raise Unsupported("diagonal kernel diverges in two dimensions", {"problem": self.label})
        z = kappa * r
        value = k0(z if complex(energy).imag else z.real)
        return complex(value / (2 * np.pi * self.units.kinetic))

    def closed_form_derivative(self, x, y, energy):
        c = self.units.kinetic
        kappa = self._kappa(energy)
        r = float(np.hypot(*(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))))
        if complex(energy).imag == 0.0:
            kappa = kappa.real
        value = r * k1(kappa * r) if r > 0 else 1.0 / kappa
        return complex(value / (4 * np.pi * c ** 2 * kappa))


# ---------------------------------------------------------------------------
# Constructors and catalog
# ---------------------------------------------------------------------------

def _line_channel(units: Units, weight, envelope) -> ContinuumChannel:
    return ContinuumChannel(name="line", infimum=0.0, kinetic=units.kinetic,
                            weight=weight, envelope=envelope)


def make_free_line(units: Optional[Units] = None) -> BaseProblem:
    units = units or Units.default()
    channel = _line_channel(
        units,
        weight=lambda k: np.full(np.shape(k), 1.0 / (2 * np.pi)),
        envelope=lambda k, x: np.ones(np.broadcast(k, x).shape, dtype=complex),
    )
    return FreeLine(label="free-line", dimension=1, units=units, channels=(channel,))


def make_reflectionless(kappa: float, units: Optional[Units] = None) -> BaseProblem:
    kappa = validate_positive("kappa", kappa)
    units = units or Units.default()

    def envelope(k, x):
        return (1j * k - kappa * np.tanh(kappa * x)) / ((kappa + 1j * k) * np.sqrt(2 * np.pi))

    channel = _line_channel(units, weight=lambda k: np.ones(np.shape(k)), envelope=envelope)
    return Reflectionless(label="reflectionless", dimension=1, units=units,
                          parameters=(("kappa", kappa),), channels=(channel,))


def make_harmonic_oscillator(omega: float, units: Optional[Units] = None) -> BaseProblem:
    omega = validate_positive("omega", omega)
    return HarmonicOscillator(label="harmonic", dimension=1, units=units or Units.default(),
                              parameters=(("omega", omega),))


def make_flat_torus(l1: float, l2: float, units: Optional[Units] = None) -> BaseProblem:
    l1 = validate_positive("L1", l1)
    l2 = validate_positive("L2", l2)
    return FlatTorus(label="torus", dimension=2, units=units or Units.default(),
                     parameters=(("L1", l1), ("L2", l2)))


def make_free_plane(units: Optional[Units] = None) -> BaseProblem:
    units = units or Units.default()
    channel = ContinuumChannel(name="plane", infimum=0.0, kinetic=units.kinetic,
                               weight=lambda k: np.full(np.shape(k)[:-1], 1.0 / (2 * np.pi) ** 2),
                               dimension=2)
    return FreePlane(label="free-plane", dimension=2, units=units, channels=(channel,))


CATALOG: Dict[str, Callable[..., BaseProblem]] = {
    "free-line": make_free_line,
    "reflectionless": make_reflectionless,
    "harmonic": make_harmonic_oscillator,
    "torus": make_flat_torus,
    "free-plane": make_free_plane,
}


def make_problem(label: str, units: Optional[Units] = None, **params) -> BaseProblem:
    """
    Build a catalog problem from its label and parameter table.

    Args:
        label: One of CATALOG_LABELS
        units: Unit system (defaults to Config)
        **params: Parameters named in CATALOG_PARAMETERS[label]

    Returns:
        BaseProblem
    """
    if label not in CATALOG:
        raise InvalidParameter(f"unknown problem '{label}'", {"known": CATALOG_LABELS})
    expected = set(CATALOG_PARAMETERS[label]["parameters"])
    given = {k for k, v in params.items() if v is not None}
    if given - expected:
        raise InvalidParameter("unexpected parameters", {"problem": label, "extra": sorted(given - expected)})
    if expected - given:
        raise InvalidParameter("missing parameters", {"problem": label, "missing": sorted(expected - given)})
    if label == "torus":
        return make_flat_torus(params["L1"], params["L2"], units=units)
    args = [params[name] for name in CATALOG_PARAMETERS[label]["parameters"]]
    return CATALOG[label](*args, units=units)


# ---------------------------------------------------------------------------
# Pointwise evaluation and spectral utilities
# ---------------------------------------------------------------------------

def eval_level(problem: BaseProblem, k: int, x) -> complex:
    """Value of the k-th discrete eigenfunction at x."""
    problem._check_level_index(k)
    x = problem.point(x)
    return complex(problem.discrete_values(x, k + 1)[..., k])


def eval_channel(problem: BaseProblem, channel_id: int, k, x) -> complex:
    """Value of the generalized eigenfunction of a channel at parameter k and point x."""
    if not 0 <= channel_id < len(problem.channels):
        raise IndexOutOfRange("channel index out of range",
                              {"channel": channel_id, "channels": len(problem.channels)})
    x = problem.point(x)
    return complex(problem.channels[channel_id].eigenfunction(k, x))


def energy_density(channel: ContinuumChannel, energy: float, x, y) -> complex:
    """
    Energy-normalized product chi_E(x) conj(chi_E(y)) of a channel.

    Sums chi_k(x) conj(chi_k(y)) w(k) / |dlambda/dk| over both momenta with
    dispersion equal to energy.
    """
    if channel.dimension != 1:
        raise Unsupported("energy density is implemented for one-dimensional channels")
    total = 0j
    for k in channel.momenta(energy):
        total += (channel.eigenfunction(k, x) * np.conj(channel.eigenfunction(k, y))
                  * channel.measure_weight(k) / abs(channel.dispersion_derivative(k)))
    return complex(total)


def resynthesize(problem: BaseProblem, f: Callable, x_grid: np.ndarray,
                 k_max: float = 20.0, k_points: int = 2001, count: int = 60) -> Dict:
    """
    Expand f on the discrete and continuum eigenfunctions and rebuild it.

    Args:
        problem: One-dimensional base problem
        f: Test function, vectorized over x
        x_grid: Uniform grid carrying f (should cover its support)
        k_max: Channel parameter cutoff
        k_points: Number of channel parameter nodes
        count: Discrete modes kept for infinite spectra

    Returns:
        Dictionary with relative L2 error and the rebuilt samples
    """
    if problem.dimension != 1:
        raise Unsupported("resynthesis is implemented for one-dimensional problems")
    x = np.asarray(x_grid, dtype=float)
    fx = np.asarray(f(x), dtype=complex)
    rebuilt = np.zeros_like(fx)

    n = problem.level_count if problem.level_count is not None else count
    coefficients = np.zeros(0, dtype=complex)
    if n:
        phis = problem.discrete_values(x, n)
        coefficients = trapezoid(np.conj(phis) * fx[:, None], x, axis=0)
        rebuilt += phis @ coefficients

    k = np.linspace(-k_max, k_max, k_points)
    for channel in problem.channels:
        chis = channel.eigenfunction(k[None, :], x[:, None])
        amplitudes = trapezoid(np.conj(chis) * fx[:, None], x, axis=0)
        rebuilt += trapezoid(chis * (amplitudes * channel.measure_weight(k))[None, :], k, axis=1)

    error = np.sqrt(trapezoid(np.abs(fx - rebuilt) ** 2, x) / trapezoid(np.abs(fx) ** 2, x))
    logger.info("resynthesis_completed", problem=problem.label, l2_error=float(error))
    return {"l2_error": float(error), "discrete_coefficients": coefficients, "rebuilt": rebuilt}
