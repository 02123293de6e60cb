"""
delta interactions supported on a curve in the plane.

The interaction -alpha |Gamma><Gamma| pairs with the arclength average
<Gamma|psi> = (1/L) int_Gamma psi ds, so the Krein formula stays rank one with
    Phi(E) = 1/alpha - G0(Gamma, Gamma | E),
    G0(Gamma, Gamma | E) = (1/L^2) int int G0(gamma(s), gamma(s') | E) ds ds'.
Only the free plane is supported. Its kernel K0(kappa r) / (2 pi c) has a
logarithmic diagonal singularity, which is split off and integrated with
product weights (closed analytic curves) or in closed form (polyline segments).
"""
from dataclasses import dataclass, replace
from functools import partial
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy import special
from scipy.integrate import quad

from config import Config
from services.greens import green0
from services.krein import BoundState
from services.root_finder import find_roots
from services.spectral_core import BaseProblem, FreePlane, richardson_derivative
from utils.constants import CURVE_NEAR_FACTOR, CURVE_SHAPES, CURVE_TOL, MIN_CENTER_SEPARATION
from utils.exceptions import (
    CutViolation,
    InvalidParameter,
    NoRootInWindow,
    QuadratureFailure,
    Unsupported,
    ZeroOfPhi,
)
from utils.logger import get_logger
from utils.quadrature import gauss_legendre, graded_panels, kress_log_weights, panel_rule, periodic_trapezoid
from utils.special import i0, k0
from utils.validators import validate_positive

logger = get_logger(__name__)


@dataclass(frozen=True)
class CurveSupport:
    """
    A closed analytic curve (circle, ellipse) or a polyline in the plane.

    Analytic curves are parametrized on t in [0, 2 pi) as
    center + (a cos(direction t + phase), b sin(direction t + phase));
    phase and direction only change the parametrization, never the curve.
    """
    shape: str
    center: Tuple[float, float] = (0.0, 0.0)
    radii: Tuple[float, float] = (1.0, 1.0)
    vertices: Tuple[Tuple[float, float], ...] = ()
    closed: bool = True
    order: int = 16
    phase: float = 0.0
    direction: int = 1

    def __post_init__(self):
        if self.shape not in CURVE_SHAPES:
            raise InvalidParameter("unknown curve shape", {"shape": self.shape, "allowed": list(CURVE_SHAPES)})
        if self.order < 2:
            raise InvalidParameter("curve quadrature order must be at least 2", {"order": self.order})
        if self.direction not in (1, -1):
            raise InvalidParameter("direction must be +1 or -1", {"direction": self.direction})
        if self.shape == "polyline":
            self._check_vertices()
        else:
            for radius in self.radii:
                validate_positive("radius", radius)

    def _check_vertices(self):
        count = len(self.vertices)
        if count < 2 or (self.closed and count < 3):
            raise InvalidParameter("too few polyline vertices", {"count": count, "closed": self.closed})
        for start, _, length, _ in self.segments():
            if length < MIN_CENTER_SEPARATION:
                raise InvalidParameter("degenerate polyline segment", {"vertex": list(start)})

    @property
    def analytic(self) -> bool:
        return self.shape != "polyline"

    def with_order(self, order: int) -> "CurveSupport":
        return replace(self, order=int(order))

    # --- geometry ----------------------------------------------------------

    def gamma(self, t) -> np.ndarray:
        """Points of an analytic curve at parameters t, shape (..., 2)."""
        angle = self.direction * np.asarray(t, dtype=float) + self.phase
        a, b = self.radii
        return np.stack([self.center[0] + a * np.cos(angle), self.center[1] + b * np.sin(angle)], axis=-1)

    def velocity(self, t) -> np.ndarray:
        """Speed |gamma'(t)| of an analytic curve."""
        angle = self.direction * np.asarray(t, dtype=float) + self.phase
        a, b = self.radii
        return np.hypot(a * np.sin(angle), b * np.cos(angle))

    def segments(self) -> List[Tuple[np.ndarray, np.ndarray, float, np.ndarray]]:
        """Polyline segments as (start, end, length, unit tangent)."""
        points = [np.asarray(v, dtype=float) for v in self.vertices]
        if self.closed:
            points.append(points[0])
        result = []
        for start, end in zip(points[:-1], points[1:]):
            length = float(np.hypot(*(end - start)))
            result.append((start, end, length, (end - start) / length if length > 0 else end - start))
        return result

    @property
    def length(self) -> float:
        """Exact arclength (complete elliptic integral for ellipses)."""
        if self.shape == "polyline":
            return float(sum(seg[2] for seg in self.segments()))
        a, b = self.radii
        if a == b:
            return 2.0 * np.pi * a
        major, minor = max(a, b), min(a, b)
        return float(4.0 * major * special.ellipe(1.0 - (minor / major) ** 2))

    @property
    def half_count(self) -> int:
        return 4 * self.order

    def parameter_nodes(self) -> np.ndarray:
        n = self.half_count
        return np.pi * np.arange(2 * n) / n

    def segment_rule(self, length: float) -> Tuple[np.ndarray, np.ndarray]:
        """Gauss rule on a segment, graded toward both corners."""
        panels = graded_panels(0.0, length, levels=12, ratio=0.2)
        return panel_rule(panels, self.order)

    def nodes(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        Quadrature nodes on the curve and their arclength weights.

        Returns:
            (points of shape (N, 2), weights of shape (N,)) with sum(weights) ~ L
        """
        if self.analytic:
            t = self.parameter_nodes()
            return self.gamma(t), (np.pi / self.half_count) * self.velocity(t)
        points, weights = [], []
        for start, _, length, tangent in self.segments():
            u, w = self.segment_rule(length)
            points.append(start + u[:, None] * tangent)
            weights.append(w)
        return np.concatenate(points), np.concatenate(weights)

    def arclength_defect(self) -> float:
        """|quadrature arclength - L|."""
        return float(abs(self.nodes()[1].sum() - self.length))

    def pairing(self, func: Callable[[np.ndarray], np.ndarray]) -> float:
        """<Gamma|f> = (1/L) int_Gamma f ds for f taking (N, 2) points."""
        points, weights = self.nodes()
        return float(np.dot(weights, func(points)) / self.length)

    def radial_boundary(self, theta) -> np.ndarray:
        """Distance from the center to the curve along direction theta (circles and ellipses)."""
        if not self.analytic:
            raise Unsupported("radial boundary needs a star-shaped analytic curve", {"shape": self.shape})
        a, b = self.radii
        theta = np.asarray(theta, dtype=float)
        return a * b / np.hypot(b * np.cos(theta), a * np.sin(theta))

    def to_record(self) -> dict:
        record = {"shape": self.shape, "order": self.order, "length": self.length}
        if self.analytic:
            record.update(center=list(self.center), radii=list(self.radii))
        else:
            record.update(vertices=[list(v) for v in self.vertices], closed=self.closed)
        return record


def circle(center, radius: float, order: Optional[int] = None) -> CurveSupport:
    radius = validate_positive("radius", radius)
    return CurveSupport(shape="circle", center=tuple(map(float, center)), radii=(radius, radius),
                        order=order or Config.CURVE_ORDER)


def ellipse(center, a: float, b: float, order: Optional[int] = None) -> CurveSupport:
    return CurveSupport(shape="ellipse", center=tuple(map(float, center)),
                        radii=(validate_positive("a", a), validate_positive("b", b)),
                        order=order or Config.CURVE_ORDER)


def polyline(points, closed: bool = False, order: Optional[int] = None) -> CurveSupport:
    vertices = tuple(tuple(float(c) for c in p) for p in points)
    if any(len(v) != 2 for v in vertices):
        raise InvalidParameter("polyline vertices must be planar points", {"vertices": [list(v) for v in vertices]})
    return CurveSupport(shape="polyline", vertices=vertices, closed=closed, order=order or Config.CURVE_ORDER)


@dataclass(frozen=True)
class CurveEvaluation:
    value: float
    error: float
    order: int


# ---------------------------------------------------------------------------
# Kernel helpers
# ---------------------------------------------------------------------------

def _check_plane(problem: BaseProblem):
    if not isinstance(problem, FreePlane):
        raise Unsupported("curve interactions are implemented for the free plane only",
                          {"problem": problem.label})


def _decay(problem: BaseProblem, energy) -> float:
    e = complex(energy)
    if e.imag != 0.0 or e.real >= 0.0:
        raise CutViolation("curve kernels need a real energy below the continuum", {"E": e})
    return float(np.sqrt(-e.real / problem.units.kinetic))


def _prefactor(problem: BaseProblem) -> float:
    return 1.0 / (2.0 * np.pi * problem.units.kinetic)


def _kress_diagonal(curve: CurveSupport, kappa: float) -> float:
    """(1/beta) L^2 G0(Gamma, Gamma) for a closed analytic curve."""
    n = curve.half_count
    t = curve.parameter_nodes()
    points = curve.gamma(t)
    speed = curve.velocity(t)
    r = np.hypot(*(points[:, None, :] - points[None, :, :]).transpose(2, 0, 1))
    diagonal = np.eye(2 * n, dtype=bool)
    z = kappa * np.where(diagonal, 1.0, r)
    log_sin = np.log(np.where(diagonal, 1.0, 4.0 * np.sin(0.5 * (t[:, None] - t[None, :])) ** 2))
    bessel_i = i0(z)
    smooth = k0(z) + 0.5 * log_sin * bessel_i
    smooth[diagonal] = -np.log(0.5 * kappa * speed) - np.euler_gamma
    bessel_i[diagonal] = 1.0
    matrix = -0.5 * kress_log_weights(n) * bessel_i + (np.pi / n) * smooth
    return float((np.pi / n) * speed @ (matrix @ speed))


def _polyline_diagonal(curve: CurveSupport, kappa: float) -> float:
    """(1/beta) L^2 G0(Gamma, Gamma) for a polyline."""
    points, weights, labels, same = [], [], [], 0.0
    for index, (start, _, length, tangent) in enumerate(curve.segments()):
        u, w = curve.segment_rule(length)
        points.append(start + u[:, None] * tangent)
        weights.append(w)
        labels.append(np.full(u.size, index))
        # int_0^length K0(kappa |u - v|) dv in closed form
        inner = (special.iti0k0(kappa * u)[1] + special.iti0k0(kappa * (length - u))[1]) / kappa
        same += float(np.dot(w, inner))
    points, weights, labels = np.concatenate(points), np.concatenate(weights), np.concatenate(labels)
    r = np.hypot(*(points[:, None, :] - points[None, :, :]).transpose(2, 0, 1))
    cross = labels[:, None] != labels[None, :]
    kernel = np.where(cross, k0(kappa * np.where(cross, r, 1.0)), 0.0)
    return float(weights @ kernel @ weights + same)


def _diagonal_value(curve: CurveSupport, kappa: float) -> float:
    if curve.analytic:
        return _kress_diagonal(curve, kappa)
    return _polyline_diagonal(curve, kappa)


def _near_integral(curve: CurveSupport, kappa: float, point: np.ndarray, anchor: float) -> Tuple[float, float]:
    """Adaptive int_Gamma K0(kappa |x - gamma|) ds for x close to the curve."""
    options = dict(limit=Config.QUAD_LIMIT, epsabs=1e-3 * CURVE_TOL, epsrel=1e-12)
    if curve.analytic:
        def integrand(t):
            r = max(float(np.hypot(*(point - curve.gamma(t)))), 1e-300)
            return float(k0(kappa * r) * curve.velocity(t))

        return quad(integrand, anchor - np.pi, anchor + np.pi, points=[anchor], **options)

    total, error = 0.0, 0.0
    for start, _, length, tangent in curve.segments():
        foot = float(np.clip(np.dot(point - start, tangent), 0.0, length))

        def integrand(u, start=start, tangent=tangent):
            r = max(float(np.hypot(*(point - start - u * tangent))), 1e-300)
            return float(k0(kappa * r))

        interior = [foot] if 0.0 < foot < length else None
        value, err = quad(integrand, 0.0, length, points=interior, **options)
        total += value
        error += err
    return total, error


def _kernel_sums(curve: CurveSupport, kappa: float, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """int_Gamma K0(kappa |x - gamma|) ds for each row of points, with error estimates."""
    nodes, weights = curve.nodes()
    coarse_nodes, coarse_weights = curve.with_order(max(2, curve.order // 2)).nodes()
    distance = np.hypot(*(points[:, None, :] - nodes[None, :, :]).transpose(2, 0, 1))
    near = distance.min(axis=1) < CURVE_NEAR_FACTOR * coarse_weights.max()

    values = np.empty(len(points))
    errors = np.empty(len(points))
    far = ~near
    if far.any():
        fine = k0(kappa * distance[far]) @ weights
        coarse_distance = np.hypot(*(points[far][:, None, :] - coarse_nodes[None, :, :]).transpose(2, 0, 1))
        values[far] = fine
        errors[far] = np.abs(fine - k0(kappa * coarse_distance) @ coarse_weights)
    if near.any():
        anchors = curve.parameter_nodes()[distance[near].argmin(axis=1)] if curve.analytic else np.zeros(near.sum())
        for slot, point, anchor in zip(np.flatnonzero(near), points[near], anchors):
            values[slot], errors[slot] = _near_integral(curve, kappa, point, float(anchor))
    return values, errors


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def curve_kernel_values(problem: BaseProblem, curve: CurveSupport, points, energy: float,
                        tol: Optional[float] = None) -> np.ndarray:
    """
    G0(x, Gamma | E) for an array of points x of shape (M, 2).

    Raises:
        Unsupported: base problem is not the free plane
        CutViolation: E is not real and negative
        QuadratureFailure: estimated error above tolerance
    """
    _check_plane(problem)
    kappa = _decay(problem, energy)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[-1] != 2:
        raise InvalidParameter("curve kernel points must be planar", {"shape": list(points.shape)})
    sums, errors = _kernel_sums(curve, kappa, points)
    scale = _prefactor(problem) / curve.length
    limit = max(tol or CURVE_TOL, CURVE_TOL)
    worst = int(np.argmax(errors / np.maximum(1.0, np.abs(sums))))
    if errors[worst] > limit * max(1.0, abs(sums[worst])):
        raise QuadratureFailure("curve kernel quadrature did not converge",
                                {"E": energy, "error": float(errors[worst] * scale), "order": curve.order})
    return scale * sums


def curve_kernel(problem: BaseProblem, curve: CurveSupport, x, energy: float,
                 tol: Optional[float] = None) -> complex:
    """G0(x, Gamma | E) = (1/L) int_Gamma G0(x, gamma(s) | E) ds at a single point."""
    point = problem.point(x)
    return complex(curve_kernel_values(problem, curve, point[None, :], energy, tol)[0])


def diagonal_evaluation(problem: BaseProblem, curve: CurveSupport, energy: float,
                        tol: Optional[float] = None) -> CurveEvaluation:
    """
    G0(Gamma, Gamma | E) with an order-halving error estimate.

    Raises:
        QuadratureFailure: the estimate exceeds max(tol, CURVE_TOL) relative to the value
    """
    _check_plane(problem)
    kappa = _decay(problem, energy)
    scale = _prefactor(problem) / curve.length ** 2
    value = scale * _diagonal_value(curve, kappa)
    coarse = scale * _diagonal_value(curve.with_order(max(2, curve.order // 2)), kappa)
    error = abs(value - coarse)
    limit = max(tol or CURVE_TOL, CURVE_TOL)
    if error > limit * max(1.0, abs(value)):
        raise QuadratureFailure("curve diagonal quadrature did not converge",
                                {"E": energy, "value": value, "error": error, "order": curve.order})
    return CurveEvaluation(value=float(value), error=float(error), order=curve.order)


def curve_diagonal(problem: BaseProblem, curve: CurveSupport, energy: float, tol: Optional[float] = None) -> float:
    """G0(Gamma, Gamma | E) for real E < 0."""
    return diagonal_evaluation(problem, curve, energy, tol).value


def curve_phi(problem: BaseProblem, curve: CurveSupport, alpha: float, energy: float,
              tol: Optional[float] = None) -> float:
    """Principal function 1/alpha - G0(Gamma, Gamma | E)."""
    return 1.0 / alpha - curve_diagonal(problem, curve, energy, tol)


def curve_diagonal_derivative(problem: BaseProblem, curve: CurveSupport, energy: float,
                              tol: Optional[float] = None) -> float:
    """dG0(Gamma, Gamma | E)/dE, which equals int |G0(x, Gamma | E)|^2 dx."""
    return float(richardson_derivative(lambda e: curve_diagonal(problem, curve, e, tol), energy, 0.02 * abs(energy)))


def curve_full_green(problem: BaseProblem, curve: CurveSupport, alpha: float, x, y, energy: float,
                     tol: Optional[float] = None) -> complex:
    """Perturbed Green's function G0(x, y) + G0(x, Gamma) G0(Gamma, y) / Phi(E)."""
    tol = tol or Config.DEFAULT_TOL
    denominator = curve_phi(problem, curve, alpha, energy, tol)
    if abs(denominator) < tol:
        raise ZeroOfPhi("energy is a perturbed eigenvalue", {"E": energy, "phi": denominator})
    left = curve_kernel(problem, curve, x, energy, tol)
    right = curve_kernel(problem, curve, y, energy, tol)
    return complex(green0(problem, x, y, energy, tol).value + left * right / denominator)


def curve_bound_wavefunction(problem: BaseProblem, curve: CurveSupport, energy: float, x,
                             tol: Optional[float] = None, derivative: Optional[float] = None):
    """
    Normalized bound state psi(x) = G0(x, Gamma | E*) / sqrt(dG0(Gamma, Gamma)/dE).

    x may be one point or an (M, 2) array; arrays give an array back.
    """
    derivative = derivative or curve_diagonal_derivative(problem, curve, energy, tol)
    points = np.asarray(x, dtype=float)
    values = curve_kernel_values(problem, curve, np.atleast_2d(points), energy, tol) / np.sqrt(derivative)
    return complex(values[0]) if points.ndim == 1 else values


def find_bound_states_curve(
    problem: BaseProblem,
    curve: CurveSupport,
    alpha: float,
    window: Optional[Tuple[float, float]] = None,
    tol: Optional[float] = None
) -> List[BoundState]:
    """
    Bound states of the free plane with an attractive delta on a curve.

    G0(Gamma, Gamma | E) increases from 0 to +inf on (-inf, 0), so there is
    exactly one root for alpha > 0 and none otherwise.

    Args:
        problem: Free-plane base problem
        curve: Curve support
        alpha: Coupling (1/L pairing convention)
        window: (Emin, Emax) with Emax <= 0
        tol: Root tolerance

    Returns:
        One shifted bound state

    Raises:
        NoRootInWindow: alpha <= 0, or the root lies above Emax
        WindowTooNarrow: the root lies below Emin
    """
    tol = tol or Config.DEFAULT_TOL
    _check_plane(problem)
    emin, emax = window if window is not None else (-np.inf, 0.0)
    emin = -np.inf if emin is None else float(emin)
    emax = 0.0 if emax is None else min(float(emax), 0.0)
    logger.info("curve_search_started", shape=curve.shape, alpha=alpha, order=curve.order,
                length=curve.length, Emin=emin, Emax=emax)
    if alpha <= 0:
        raise NoRootInWindow("a non-attractive curve interaction binds no state", {"alpha": alpha})

    phi = partial(curve_phi, problem, curve, alpha, tol=tol)
    scale = problem.units.kinetic / curve.length ** 2
    roots = find_roots(phi, [], 0.0, (emin, emax), scale, tol, lower_sign=1.0)
    if not roots:
        raise NoRootInWindow("no bound state inside the window", {"Emin": emin, "Emax": emax, "alpha": alpha})

    root = roots[0]
    derivative = curve_diagonal_derivative(problem, curve, root.energy, tol)
    state = BoundState(
        energy=root.energy,
        bracket=root.bracket,
        kind="shifted",
        normalization=derivative,
        wavefunction=partial(curve_bound_wavefunction, problem, curve, root.energy, tol=tol, derivative=derivative),
        residual=abs(phi(root.energy)),
    )
    logger.info("bound_state_found", energy=state.energy, kind=state.kind, residual=state.residual)
    return [state]


def wavefunction_norm_2d(func: Callable[[np.ndarray], np.ndarray], curve: CurveSupport, kappa: float,
                         angles: Optional[int] = None, order: int = 16, reach: float = 40.0) -> float:
    """
    int |psi|^2 over the plane in polar coordinates about the curve center.

    The radial integral is split at the curve, the outer part runs in log r out
    to R = max radius + reach/kappa, and the remaining tail is taken as
    R |psi(R)|^2 / (2 kappa) per unit angle.

    Args:
        func: Wavefunction taking (M, 2) points
        curve: Circle or ellipse
        kappa: Decay rate of the bound state
        angles: Number of trapezoid angles (default 4 * curve order)
        order: Gauss order per radial panel
        reach: Truncation radius in units of 1/kappa
    """
    validate_positive("kappa", kappa)
    count = angles or 4 * curve.order
    theta, angle_weights = periodic_trapezoid(count)
    boundary = curve.radial_boundary(theta)
    r_max = max(curve.radii) + reach / kappa
    center = np.asarray(curve.center, dtype=float)
    direction = np.stack([np.cos(theta), np.sin(theta)], axis=-1)

    unit_nodes, unit_weights = gauss_legendre(order, 0.0, 1.0)
    radii, weights = [], []
    for edge in boundary:
        inner = unit_nodes * edge
        log_panels = np.linspace(np.log(edge), np.log(r_max), int(np.ceil(np.log(r_max / edge))) + 2)
        log_nodes, log_weights = panel_rule(list(zip(log_panels[:-1], log_panels[1:])), order)
        outer = np.exp(log_nodes)
        radii.append(np.concatenate([inner, outer]))
        # r dr on the inner disk, r^2 d(log r) outside
        weights.append(np.concatenate([unit_weights * edge * inner, log_weights * outer ** 2]))
    radii, weights = np.array(radii), np.array(weights)

    points = center + radii[..., None] * direction[:, None, :]
    density = np.abs(np.asarray(func(points.reshape(-1, 2)))) ** 2
    body = float(np.sum((angle_weights[:, None] * weights).ravel() * density))

    rim = center + r_max * direction
    tail = 2.0 * np.pi * r_max * float(np.mean(np.abs(np.asarray(func(rim))) ** 2)) / (2.0 * kappa)
    logger.debug("norm_integrated", body=body, tail=tail, R=r_max, angles=count)
    return body + tail
