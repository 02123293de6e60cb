"""
Modified Bessel functions K0, K1 and I0.

K0 and K1 accept real or complex arguments with Re z > 0. The domain is
divided into three ranges:
  |z| < 2          ascending power series
  2 <= |z| < 25    trapezoid rule on the Laplace-type integral
                   K_n(z) ~ sqrt(pi / 2z) exp(-z) int_0^inf exp(-t) t^(n-1/2) (1 + t / 2z)^(n-1/2) dt
  |z| >= 25        Hankel asymptotic expansion

The middle range exists because the asymptotic series cannot reach full
double precision near |z| = 2. Relative accuracy is about 1e-14 on all ranges.
"""
from functools import lru_cache

import numpy as np

from utils.exceptions import InvalidParameter

EULER_GAMMA = 0.57721566490153286061

SERIES_LIMIT = 2.0
ASYMPTOTIC_LIMIT = 25.0
_SERIES_TERMS = 30
_I0_SERIES_TERMS = 90
_ASYMPTOTIC_TERMS = 20
_TRAPEZOID_STEP = 0.125
# exp(-s^2) < 1e-18 beyond s = 6.5
_TRAPEZOID_CUTOFF = 6.5
_CHUNK = 4096


@lru_cache(maxsize=None)
def _series_coefficients():
    """Coefficients 1/(k!)^2, harmonic numbers H_k and 1/(k!(k+1)!)."""
    k = np.arange(_SERIES_TERMS)
    fact = np.cumprod(np.concatenate(([1.0], np.arange(1, _SERIES_TERMS, dtype=float))))
    inv_fact2 = 1.0 / fact ** 2
    harmonic = np.concatenate(([0.0], np.cumsum(1.0 / np.arange(1, _SERIES_TERMS))))
    inv_fact_fact1 = 1.0 / (fact * fact * (k + 1))
    return inv_fact2, harmonic, inv_fact_fact1


def _prepare(z, name):
    arr = np.asarray(z)
    is_complex = np.iscomplexobj(arr)
    arr = arr.astype(complex)
    if np.any(arr.real <= 0):
        raise InvalidParameter(f"{name} requires an argument with positive real part")
    return arr, is_complex


def _finish(values, is_complex, scalar):
    out = values if is_complex else values.real
    if scalar:
        return out.item() if hasattr(out, "item") else out
    return out


def _powers(t, terms):
    return t[..., None] ** np.arange(terms)


def _chunked(func, values, *args):
    """Apply func block by block; the series and quadrature branches build (size, terms) tables."""
    return np.concatenate([func(values[i:i + _CHUNK], *args) for i in range(0, values.size, _CHUNK)])


def _k_series(z, order):
    inv_fact2, harmonic, inv_fact_fact1 = _series_coefficients()
    half = z / 2
    t = half ** 2
    tp = _powers(t, _SERIES_TERMS)
    log_half = np.log(half)
    if order == 0:
        i0 = tp @ inv_fact2
        return -(log_half + EULER_GAMMA) * i0 + tp @ (harmonic * inv_fact2)
    i1 = half * (tp @ inv_fact_fact1)
    # psi(k+1) + psi(k+2) = -2 gamma + 2 H_k + 1/(k+1)
    k = np.arange(_SERIES_TERMS)
    digamma_sum = -2 * EULER_GAMMA + 2 * harmonic + 1.0 / (k + 1)
    return 1.0 / z + i1 * log_half - (z / 4) * (tp @ (digamma_sum * inv_fact_fact1))


def _k_integral(z, order):
    """
    K0 and K1 from the Laplace-type representation with t = s^2,

        K0(z) = sqrt(pi / 2z) exp(-z) (2 / sqrt(pi)) int_0^inf exp(-s^2) (1 + s^2 / 2z)^(-1/2) ds
        K1(z) = sqrt(pi / 2z) exp(-z) (4 / sqrt(pi)) int_0^inf s^2 exp(-s^2) (1 + s^2 / 2z)^(1/2) ds

    The integrand does not oscillate for any Re z > 0, and its nearest
    singularity s = i sqrt(2z) stays at least |2z|^(1/2) cos(pi / 4) from the
    real axis, so the trapezoid rule converges geometrically.
    """
    s = np.arange(0.0, _TRAPEZOID_CUTOFF + _TRAPEZOID_STEP, _TRAPEZOID_STEP)
    weights = np.full(s.shape, _TRAPEZOID_STEP)
    weights[0] *= 0.5
    ratio = 1.0 + (s ** 2)[None, :] / (2.0 * z[..., None])
    gauss = np.exp(-s ** 2)
    if order == 0:
        integral = (gauss / np.sqrt(ratio)) @ weights
        scale = 2.0
    else:
        integral = (s ** 2 * gauss * np.sqrt(ratio)) @ weights
        scale = 4.0
    return np.sqrt(np.pi / (2.0 * z)) * np.exp(-z) * (scale / np.sqrt(np.pi)) * integral


def _asymptotic(z, order, kind):
    mu = 4.0 * order ** 2
    total = np.ones_like(z)
    term = np.ones_like(z)
    sign = -1.0 if kind == "i" else 1.0
    for k in range(1, _ASYMPTOTIC_TERMS):
        term = term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * z) * sign
        total = total + term
    if kind == "k":
        return np.sqrt(np.pi / (2 * z)) * np.exp(-z) * total
    return np.exp(z) / np.sqrt(2 * np.pi * z) * total


def _evaluate_k(z, order, name):
    scalar = np.ndim(z) == 0
    arr, is_complex = _prepare(z, name)
    flat = arr.reshape(-1)
    out = np.empty_like(flat)
    size = np.abs(flat)
    small = size < SERIES_LIMIT
    large = size >= ASYMPTOTIC_LIMIT
    middle = ~(small | large)
    if small.any():
        out[small] = _chunked(_k_series, flat[small], order)
    if middle.any():
        out[middle] = _chunked(_k_integral, flat[middle], order)
    if large.any():
        out[large] = _asymptotic(flat[large], order, "k")
    return _finish(out.reshape(arr.shape), is_complex, scalar)


def k0(z):
    """
    Modified Bessel function of the second kind, order zero.

    Args:
        z: Scalar or array, real positive or complex with Re z > 0

    Returns:
        K0(z), real for real input
    """
    return _evaluate_k(z, 0, "k0")


def k1(z):
    """Modified Bessel function of the second kind, order one."""
    return _evaluate_k(z, 1, "k1")


@lru_cache(maxsize=None)
def _i0_coefficients():
    fact = np.cumprod(np.concatenate(([1.0], np.arange(1, _I0_SERIES_TERMS, dtype=float))))
    return 1.0 / fact ** 2


def i0(z):
    """Modified Bessel function of the first kind, order zero (any real argument)."""
    scalar = np.ndim(z) == 0
    arr = np.asarray(z)
    is_complex = np.iscomplexobj(arr)
    flat = arr.astype(complex).reshape(-1)
    out = np.empty_like(flat)
    # I0 is even; the asymptotic branch is written for Re z > 0
    flat = np.where(flat.real < 0, -flat, flat)
    large = np.abs(flat) >= ASYMPTOTIC_LIMIT
    if (~large).any():
        t = (flat[~large] / 2) ** 2
        out[~large] = _chunked(lambda block: _powers(block, _I0_SERIES_TERMS) @ _i0_coefficients(), t)
    if large.any():
        out[large] = _asymptotic(flat[large], 0, "i")
    return _finish(out.reshape(arr.shape), is_complex, scalar)
