"""Standard normal special functions and partial moments of its quantile function."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import ndtr

__all__ = [
    "Interval01",
    "std_normal_pdf",
    "std_normal_cdf",
    "std_normal_quantile",
    "quantile_partial_moment_1",
    "quantile_partial_moment_2",
    "partial_moments",
    "uniform_bin_moments",
]

_INV_SQRT_2PI = 0.3989422804014327
_SQRT_2PI = 2.5066282746310002

# Acklam's rational approximation, central and tail branches.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


@dataclass(frozen=True)
class Interval01:
    """A sub-interval ``[lo, hi]`` of the unit interval of probabilities."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (0.0 <= self.lo <= self.hi <= 1.0):
            raise ValueError(f"need 0 <= lo <= hi <= 1, got ({self.lo}, {self.hi})")


def std_normal_pdf(z):
    z = np.asarray(z, dtype=float)
    return _INV_SQRT_2PI * np.exp(-0.5 * z * z)


def std_normal_cdf(z):
    """Standard normal CDF; scalar in, float out, arrays broadcast."""
    out = ndtr(np.asarray(z, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def _polyval(coefs, x):
    acc = np.zeros_like(x) + coefs[0]
    for c in coefs[1:]:
        acc = acc * x + c
    return acc


def _lower_quantile(p):
    # p in (0, 0.5]; rational start then one Halley step against ndtr.
    x = np.empty_like(p)
    tail = p < _P_LOW
    if np.any(tail):
        q = np.sqrt(-2.0 * np.log(p[tail]))
        x[tail] = _polyval(_C, q) / (_polyval(_D, q) * q + 1.0)
    mid = ~tail
    if np.any(mid):
        q = p[mid] - 0.5
        r = q * q
        x[mid] = q * _polyval(_A, r) / (_polyval(_B, r) * r + 1.0)
    with np.errstate(over="ignore", invalid="ignore"):
        e = ndtr(x) - p
        u = e * _SQRT_2PI * np.exp(0.5 * x * x)
        refined = x - u / (1.0 + 0.5 * x * u)
    # subnormal p overflows the density ratio; the raw estimate stands there
    return np.where(np.isfinite(refined), refined, x)


def std_normal_quantile(t):
    """Inverse standard normal CDF on the open interval (0, 1).

    Raises
    ------
    ValueError
        If any ``t`` lies outside (0, 1) or is NaN.
    """
    arr = np.asarray(t, dtype=float)
    if not np.all((arr > 0.0) & (arr < 1.0)):
        raise ValueError("std_normal_quantile is defined on the open interval (0, 1)")
    flat = np.atleast_1d(arr).ravel()
    out = np.empty_like(flat)
    upper = flat > 0.5
    out[~upper] = _lower_quantile(flat[~upper])
    # 1 - t is exact for t >= 0.5, so the upper half reuses the lower branch
    out[upper] = -_lower_quantile(1.0 - flat[upper])
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


def _phi_at_quantile(t):
    """phi(Phi^-1(t)) and Phi^-1(t)*phi(Phi^-1(t)), both zero at t in {0, 1}."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    dens = np.zeros_like(t)
    zdens = np.zeros_like(t)
    inner = (t > 0.0) & (t < 1.0)
    if np.any(inner):
        z = std_normal_quantile(t[inner])
        dens[inner] = std_normal_pdf(z)
        zdens[inner] = z * dens[inner]
    return dens, zdens


def quantile_partial_moment_1(bin: Interval01) -> float:
    """Integral of the normal quantile function over ``bin``."""
    dens, _ = _phi_at_quantile([bin.lo, bin.hi])
    return float(dens[0] - dens[1])


def quantile_partial_moment_2(bin: Interval01) -> float:
    """Integral of the squared normal quantile function over ``bin``."""
    _, zdens = _phi_at_quantile([bin.lo, bin.hi])
    val = (bin.hi - zdens[1]) - (bin.lo - zdens[0])
    return max(float(val), 0.0)


def partial_moments(edges):
    """First and second quantile partial moments for consecutive bins.

    ``edges`` is a nondecreasing array of probabilities from 0 to 1 (or any
    sub-range); bin ``i`` is ``[edges[i], edges[i+1]]``.
    """
    edges = np.asarray(edges, dtype=float)
    dens, zdens = _phi_at_quantile(edges)
    m1 = dens[:-1] - dens[1:]
    g = edges - zdens
    m2 = np.maximum(g[1:] - g[:-1], 0.0)
    return m1, m2


@lru_cache(maxsize=64)
def _cached_uniform_bins(n):
    m1, m2 = partial_moments(np.arange(n + 1) / n)
    m1.setflags(write=False)
    m2.setflags(write=False)
    return m1, m2


def uniform_bin_moments(n: int):
    """Read-only (M1, M2) arrays for the bins ((i-1)/n, i/n), i = 1..n."""
    if n < 1:
        raise ValueError("n must be positive")
    return _cached_uniform_bins(int(n))
