"""Exact one-dimensional 2-Wasserstein distances.

All empirical measures are uniform over their atoms. In one dimension the
optimal coupling is the monotone (quantile) coupling, so every distance here
reduces to an integral of squared quantile differences over (0, 1).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .gaussmath import partial_moments, uniform_bin_moments

__all__ = [
    "SortedProjection",
    "W2Result",
    "w2_empirical_to_std_normal",
    "w2sq_sorted_to_std_normal",
    "w2_empirical_to_empirical",
    "w2_coupling_oracle",
    "w2_gaussian_to_gaussian",
    "w2_discrete_to_std_normal",
]

ORACLE_MAX_N = 8


@dataclass(frozen=True)
class SortedProjection:
    """A 1D sample held in nondecreasing order."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("SortedProjection needs a nonempty 1D array")
        if not np.all(np.isfinite(v)):
            raise ValueError("SortedProjection values must be finite")
        if v.size > 1 and np.any(np.diff(v) < 0):
            raise ValueError("values must be sorted in nondecreasing order")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_unsorted(cls, values) -> "SortedProjection":
        return cls(np.sort(np.asarray(values, dtype=float)))

    @property
    def n(self) -> int:
        return self.values.size

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class W2Result:
    distance: float
    squared: float

    @classmethod
    def from_squared(cls, squared: float) -> "W2Result":
        squared = max(float(squared), 0.0)
        return cls(distance=math.sqrt(squared), squared=squared)


def w2sq_sorted_to_std_normal(x: np.ndarray) -> float:
    """Squared W2 between the uniform measure on sorted ``x`` and N(0, 1).

    Works on a raw sorted array so the optimizer can skip validation.
    """
    n = x.shape[0]
    m1, m2 = uniform_bin_moments(n)
    sq = x.dot(x) / n - 2.0 * x.dot(m1) + m2.sum()
    return max(float(sq), 0.0)


def w2_empirical_to_std_normal(proj: SortedProjection) -> W2Result:
    """Exact W2 between an empirical measure and the standard Gaussian.

    Each order statistic is transported onto the Gaussian mass in its
    quantile bin, integrated exactly with the partial moments of the normal
    quantile function.
    """
    return W2Result.from_squared(w2sq_sorted_to_std_normal(proj.values))


def w2_discrete_to_std_normal(atoms, weights) -> W2Result:
    """Exact W2 between a finitely supported law and N(0, 1)."""
    atoms = np.asarray(atoms, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if atoms.shape != weights.shape or atoms.size == 0:
        raise ValueError("atoms and weights must be nonempty and equally shaped")
    if np.any(weights < 0) or not math.isclose(weights.sum(), 1.0, abs_tol=1e-12):
        raise ValueError("weights must be a probability vector")
    order = np.argsort(atoms, kind="stable")
    x = atoms[order]
    w = weights[order]
    edges = np.concatenate([[0.0], np.cumsum(w)])
    edges[-1] = 1.0
    edges = np.clip(edges, 0.0, 1.0)
    m1, m2 = partial_moments(edges)
    return W2Result.from_squared(np.sum(x * x * w) - 2.0 * x.dot(m1) + m2.sum())


def w2_empirical_to_empirical(a: SortedProjection, b: SortedProjection) -> W2Result:
    """W2 between two empirical measures by quantile coupling.

    Equal sizes use the sorted matching directly. Unequal sizes integrate over
    the common refinement of the two bin partitions; breakpoints are kept as
    integers on the grid 1/(n*m) so the refinement is exact.
    """
    x, y = a.values, b.values
    n, m = x.size, y.size
    if n == m:
        d = x - y
        return W2Result.from_squared(d.dot(d) / n)
    cuts = np.union1d(np.arange(n + 1, dtype=np.int64) * m,
                      np.arange(m + 1, dtype=np.int64) * n)
    starts, ends = cuts[:-1], cuts[1:]
    d = x[starts // m] - y[starts // n]
    length = (ends - starts) / (n * m)
    return W2Result.from_squared(np.sum(d * d * length))


def w2_coupling_oracle(a: SortedProjection, b: SortedProjection) -> W2Result:
    """Brute-force W2 over all permutation couplings, for n <= 8."""
    n = a.n
    if b.n != n:
        raise ValueError("oracle needs equal sample sizes")
    if n > ORACLE_MAX_N:
        raise ValueError(f"oracle enumerates n! couplings; n={n} exceeds {ORACLE_MAX_N}")
    x, y = a.values, b.values
    best = math.inf
    for perm in itertools.permutations(range(n)):
        d = x - y[list(perm)]
        best = min(best, float(d.dot(d)) / n)
    return W2Result.from_squared(best)


def w2_gaussian_to_gaussian(mean1: float, sd1: float, mean2: float, sd2: float) -> W2Result:
    if sd1 <= 0 or sd2 <= 0:
        raise ValueError("standard deviations must be positive")
    return W2Result.from_squared((mean1 - mean2) ** 2 + (sd1 - sd2) ** 2)
