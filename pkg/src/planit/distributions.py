"""Parametric kernels behind the activity costs: a 2D von-Mises over unit
vectors, a Beta over [0,1], and a 1D Gaussian, plus the weighted estimators
the learning step uses.

Conventions that matter downstream:
  * the Gaussian ``variance`` field really is a variance, not a std-dev;
  * the von-Mises mean is stored canonically as an angle so serialized
    models round-trip bit-exactly;
  * Beta densities are clamped at PDF_MAX where an endpoint diverges, which
    keeps likelihoods finite for boundary samples.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DegenerateFitWarning, DomainError, MomentMismatch, ZeroVariance

LOG_2PI = math.log(2.0 * math.pi)
UNIFORM_CIRCLE = 1.0 / (2.0 * math.pi)

PDF_MAX = 1e6       # cap for divergent Beta endpoints
KAPPA_MAX = 1e4     # concentration cap as the resultant length approaches 1
SIGMA_MIN = 1e-6    # variance floor (m^2) against one-point collapse

_I0_SERIES_CUTOFF = 15.0


def _i0_asymptotic_coefficients(count=16):
    # ((2k-1)!!)^2 / (k! 8^k); enough terms to match the series branch to
    # ~1e-10 at the cutoff
    coeffs = []
    double_fact = 1
    factorial = 1
    power8 = 1
    for k in range(1, count + 1):
        double_fact *= 2 * k - 1
        factorial *= k
        power8 *= 8
        coeffs.append(double_fact**2 / (factorial * power8))
    return tuple(coeffs)


_I0_ASYMPTOTIC = _i0_asymptotic_coefficients()


class WeightedSample(NamedTuple):
    """One observation with its posterior weight in [0, 1]."""

    value: object
    weight: float


def split_samples(samples):
    """Unzip WeightedSample records into (values, weights) arrays."""
    values = np.asarray([s.value for s in samples], dtype=float)
    weights = np.asarray([s.weight for s in samples], dtype=float)
    return values, weights


def log_bessel_i0(kappa):
    """log I_0(kappa), by power series below 15 and asymptotic expansion above.

    The two branches agree to ~1e-10 around the cutoff; the asymptotic branch
    avoids overflow for large concentrations.
    """
    k = np.asarray(kappa, dtype=float)
    out = np.empty_like(k)
    small = k < _I0_SERIES_CUTOFF
    if np.any(small):
        x = k[small]
        q = 0.25 * x * x
        term = np.ones_like(x)
        total = np.ones_like(x)
        for m in range(1, 40):
            term = term * q / (m * m)
            total += term
        out[small] = np.log(total)
    if np.any(~small):
        x = k[~small]
        series = np.zeros_like(x)
        for j, coeff in enumerate(_I0_ASYMPTOTIC, start=1):
            series += coeff / x**j
        out[~small] = x - 0.5 * np.log(2.0 * math.pi * x) + np.log1p(series)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class VonMisesParams:
    """Angular preference: mean direction (radians) and concentration."""

    mean_angle: float
    concentration: float

    def __post_init__(self):
        if not math.isfinite(self.mean_angle):
            raise ValueError("mean_angle must be finite")
        if not (math.isfinite(self.concentration) and self.concentration >= 0):
            raise ValueError("concentration must be finite and >= 0")

    @property
    def mean_vector(self) -> np.ndarray:
        return np.array([math.cos(self.mean_angle), math.sin(self.mean_angle)])

    @classmethod
    def from_vector(cls, mu, concentration: float) -> "VonMisesParams":
        v = np.asarray(mu, dtype=float)
        norm = np.linalg.norm(v)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"mean direction must be unit length, |mu|={norm}")
        return cls(math.atan2(v[1], v[0]), concentration)


@dataclass(frozen=True)
class BetaParams:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise ValueError("alpha must be finite and > 0")
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise ValueError("beta must be finite and > 0")


@dataclass(frozen=True)
class GaussianParams:
    mean: float
    variance: float

    def __post_init__(self):
        if not math.isfinite(self.mean):
            raise ValueError("mean must be finite")
        if not (math.isfinite(self.variance) and self.variance > 0):
            raise ValueError("variance must be finite and > 0")


def vonmises_logpdf(x, p: VonMisesParams):
    """Log density of unit vector(s) x under the circular kernel."""
    xs = np.asarray(x, dtype=float)
    dots = xs @ p.mean_vector
    out = p.concentration * dots - LOG_2PI - log_bessel_i0(p.concentration)
    return out if np.ndim(out) else float(out)


def vonmises_pdf(x, p: VonMisesParams):
    return np.exp(vonmises_logpdf(x, p))


def _power_log(v: np.ndarray, edge: np.ndarray, exponent: float) -> np.ndarray:
    """exponent * log(distance-from-edge) with the 0^0 == 1 limit convention."""
    safe = np.where(edge > 0.0, edge, 1.0)
    out = exponent * np.log(safe)
    if exponent > 0.0:
        return np.where(edge > 0.0, out, -np.inf)
    if exponent < 0.0:
        return np.where(edge > 0.0, out, np.inf)
    return np.zeros_like(v)


def beta_logpdf(value, p: BetaParams):
    """Log density on [0, 1], clamped at log(PDF_MAX) where endpoints diverge."""
    v = np.asarray(value, dtype=float)
    if np.any((v < 0.0) | (v > 1.0)):
        raise DomainError("beta_pdf input must lie in [0, 1]")
    log_b = math.lgamma(p.alpha) + math.lgamma(p.beta) - math.lgamma(p.alpha + p.beta)
    out = _power_log(v, v, p.alpha - 1.0) + _power_log(v, 1.0 - v, p.beta - 1.0) - log_b
    out = np.minimum(out, math.log(PDF_MAX))
    return out if out.ndim else float(out)


def beta_pdf(value, p: BetaParams):
    return np.exp(beta_logpdf(value, p))


def gaussian_logpdf(value, p: GaussianParams):
    v = np.asarray(value, dtype=float)
    out = -0.5 * (LOG_2PI + math.log(p.variance)) - (v - p.mean) ** 2 / (2.0 * p.variance)
    return out if out.ndim else float(out)


def gaussian_pdf(value, p: GaussianParams):
    return np.exp(gaussian_logpdf(value, p))


def sra_concentration(resultant_length: float) -> float:
    """First-order concentration estimate from the mean resultant length."""
    r = resultant_length
    if r >= 1.0:
        return KAPPA_MAX
    kappa = r * (2.0 - r * r) / (1.0 - r * r)
    return min(kappa, KAPPA_MAX)


def _check_weights(weights: np.ndarray) -> float:
    if np.any(weights < 0):
        raise ValueError("weights must be non-negative")
    total = float(np.sum(weights))
    if total <= 0.0:
        raise ValueError("total weight must be positive")
    return total


def fit_vonmises_weighted(vectors, weights) -> VonMisesParams:
    """Weighted estimate of the circular kernel.

    The mean direction is the normalized weighted vector sum; concentration
    comes from sra_concentration of the mean resultant length. A zero
    resultant leaves the direction undefined: the fit degrades to the
    uniform kernel and issues DegenerateFitWarning.
    """
    xs = np.asarray(vectors, dtype=float).reshape(-1, 2)
    w = np.asarray(weights, dtype=float).reshape(-1)
    total = _check_weights(w)
    resultant = w @ xs
    length = float(np.linalg.norm(resultant))
    if length <= 1e-12 * total:
        warnings.warn(
            "zero weighted resultant: falling back to the uniform circular kernel",
            DegenerateFitWarning,
            stacklevel=2,
        )
        return VonMisesParams(0.0, 0.0)
    mu = resultant / length
    return VonMisesParams.from_vector(mu, sra_concentration(length / total))


def fit_beta_weighted(values, weights) -> BetaParams:
    """Weighted method-of-moments Beta fit.

    Raises ZeroVariance for (near) point masses and MomentMismatch when the
    weighted variance is too large for any Beta distribution; callers keep
    their previous parameters in either case.
    """
    v = np.asarray(values, dtype=float).reshape(-1)
    w = np.asarray(weights, dtype=float).reshape(-1)
    total = _check_weights(w)
    mean = float(w @ v) / total
    var = float(w @ (v - mean) ** 2) / total
    if var <= 1e-12:
        raise ZeroVariance(f"weighted variance {var:g} too small for a moment fit")
    bound = mean * (1.0 - mean)
    if var >= bound:
        raise MomentMismatch(
            f"variance {var:g} >= m(1-m) {bound:g}: no Beta has these moments"
        )
    scale = bound / var - 1.0
    return BetaParams(mean * scale, (1.0 - mean) * scale)


def fit_gaussian_weighted(values, weights) -> GaussianParams:
    """Weighted mean and second central moment, variance floored at SIGMA_MIN."""
    v = np.asarray(values, dtype=float).reshape(-1)
    w = np.asarray(weights, dtype=float).reshape(-1)
    total = _check_weights(w)
    mean = float(w @ v) / total
    var = float(w @ (v - mean) ** 2) / total
    return GaussianParams(mean, max(var, SIGMA_MIN))
