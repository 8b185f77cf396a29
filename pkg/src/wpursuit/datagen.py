"""Planted non-Gaussian subspace models with computable ground truth.

A sample is ``X = U s + W g`` where ``U`` (p x k) and ``W`` (p x (p-k)) are
complementary orthonormal bases, ``s`` follows a standardized signal law on
R^k and ``g`` has i.i.d. standardized coordinates, exactly N(0, 1) unless a
complement shift is requested. Population W2 distances to N(0, 1) along a
direction are computed exactly for discrete laws, by quadrature for Gaussian
mixtures and piecewise-linear quantile functions, and by Monte Carlo only
when no closed form is available.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize
from scipy.special import ndtr, ndtri

from .gaussmath import partial_moments, std_normal_pdf, std_normal_quantile
from .pursuit import DataMatrix, Frame, sphere_net
from .transport import w2_discrete_to_std_normal, w2sq_sorted_to_std_normal

__all__ = [
    "SignalLaw",
    "PlantedModel",
    "make_planted_model",
    "example1_mixture",
    "sample",
    "ground_truth_metrics",
    "whiten",
    "mixture_w2_to_std_normal",
    "random_orthonormal_basis",
]

KINDS = ("two_point", "gaussian_mixture", "uniform", "custom_quantile")
DEFAULT_RESOLUTION = 1 << 20
MAX_EXACT_ATOMS = 1 << 16
_MC_SEED = 20240229


def mixture_w2_to_std_normal(means, sds, weights, grid: int = 40001) -> float:
    """W2 between a 1D Gaussian mixture and N(0, 1).

    Uses the substitution t = F(x): W2^2 = E[(X - Phi^-1(F(X)))^2], so no
    quantile inversion of the mixture is needed. Simpson rule on ``grid``
    points spanning 12 standard deviations beyond every component.
    """
    means = np.asarray(means, dtype=float)
    sds = np.asarray(sds, dtype=float)
    weights = np.asarray(weights, dtype=float)
    lo = np.min(means - 12 * sds)
    hi = np.max(means + 12 * sds)
    x = np.linspace(lo, hi, grid | 1)
    zc = (x[:, None] - means) / sds
    F = ndtr(zc) @ weights
    S = ndtr(-zc) @ weights
    dens = (std_normal_pdf(zc) / sds) @ weights
    with np.errstate(divide="ignore"):
        z = np.where(F < 0.5, ndtri(F), -ndtri(S))
    integrand = np.where(np.isfinite(z), (x - z) ** 2 * dens, 0.0)
    return math.sqrt(max(integrate.simpson(integrand, x=x), 0.0))


def _linear_quantile_w2(probs, values) -> float:
    """W2 to N(0, 1) of a standardized law with piecewise-linear quantile."""
    t = np.asarray(probs, dtype=float)
    q = np.asarray(values, dtype=float)
    slope = np.diff(q) / np.diff(t)
    icept = q[:-1] - slope * t[:-1]
    m1, _ = partial_moments(t)
    # integral of t * Phi^-1(t) over each segment, in closed form
    inner = (t > 0) & (t < 1)
    z = np.zeros_like(t)
    z[inner] = std_normal_quantile(t[inner])
    dens = np.where(inner, std_normal_pdf(z), 0.0)
    prim = -t * dens + ndtr(np.where(inner, math.sqrt(2) * z, np.where(t >= 1, np.inf, -np.inf))) / (2 * math.sqrt(math.pi))
    tm = np.diff(prim)
    cross = float(np.sum(icept * m1 + slope * tm))
    return math.sqrt(max(2.0 - 2.0 * cross, 0.0))


def _linear_quantile_moments(probs, values):
    t = np.asarray(probs, dtype=float)
    q = np.asarray(values, dtype=float)
    dt = np.diff(t)
    a, b = q[:-1], q[1:]
    mean = float(np.sum(dt * (a + b) / 2))
    second = float(np.sum(dt * (a * a + a * b + b * b) / 3))
    return mean, second - mean * mean


@dataclass(frozen=True, eq=False)
class SignalLaw:
    """A standardized law on R^k (mean 0, identity covariance).

    ``params`` by kind:

    * ``two_point``: ``prob`` of the upper atom (i.i.d. coordinates).
    * ``gaussian_mixture``: ``means`` (c x k), optional ``weights`` and
      per-component isotropic ``scales``.
    * ``uniform``: none (i.i.d. coordinates).
    * ``custom_quantile``: ``probs`` from 0 to 1 and strictly increasing
      ``values``; the quantile function interpolates linearly (i.i.d.
      coordinates).

    Raw parameters are affinely normalized at construction.
    """

    kind: str
    k: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown signal kind {self.kind!r}; expected one of {KINDS}")
        if self.k < 1:
            raise ValueError("signal dimension k must be at least 1")
        getattr(self, f"_init_{self.kind}")()

    # -- constructors ------------------------------------------------------
    @classmethod
    def two_point(cls, k: int = 1, prob: float = 0.5) -> "SignalLaw":
        return cls("two_point", k, {"prob": prob})

    @classmethod
    def gaussian_mixture(cls, means, weights=None, scales=None) -> "SignalLaw":
        means = np.atleast_2d(np.asarray(means, dtype=float))
        params = {"means": means.tolist()}
        if weights is not None:
            params["weights"] = list(map(float, weights))
        if scales is not None:
            params["scales"] = list(map(float, scales))
        return cls("gaussian_mixture", means.shape[1], params)

    @classmethod
    def uniform(cls, k: int = 1) -> "SignalLaw":
        return cls("uniform", k, {})

    @classmethod
    def custom_quantile(cls, probs, values, k: int = 1) -> "SignalLaw":
        return cls("custom_quantile", k, {"probs": list(map(float, probs)),
                                          "values": list(map(float, values))})

    @classmethod
    def standard_normal(cls) -> "SignalLaw":
        return cls.gaussian_mixture([[0.0]])

    def to_dict(self) -> dict:
        return {"kind": self.kind, "k": self.k, "params": self.params}

    @classmethod
    def from_dict(cls, d: dict) -> "SignalLaw":
        return cls(d["kind"], int(d["k"]), dict(d.get("params", {})))

    def _set(self, **kw):
        for key, val in kw.items():
            object.__setattr__(self, key, val)

    # -- per-kind normalization -------------------------------------------
    def _init_two_point(self):
        q = float(self.params.get("prob", 0.5))
        if not 0 < q < 1:
            raise ValueError("two_point prob must lie in (0, 1)")
        self._set(_atoms=np.array([-math.sqrt(q / (1 - q)), math.sqrt((1 - q) / q)]),
                  _probs=np.array([1 - q, q]))

    def _init_gaussian_mixture(self):
        means = np.atleast_2d(np.asarray(self.params["means"], dtype=float))
        c = means.shape[0]
        if means.shape[1] != self.k:
            raise ValueError(f"mixture means have dimension {means.shape[1]}, k={self.k}")
        w = np.asarray(self.params.get("weights", [1.0 / c] * c), dtype=float)
        s = np.asarray(self.params.get("scales", [1.0] * c), dtype=float)
        if w.shape != (c,) or s.shape != (c,):
            raise ValueError("weights and scales need one entry per component")
        if np.any(w <= 0) or not math.isclose(w.sum(), 1.0, rel_tol=1e-9):
            raise ValueError("mixture weights must be positive and sum to 1")
        if np.any(s <= 0):
            raise ValueError("mixture scales must be positive")
        center = w @ means
        dev = means - center
        cov = np.sum(w * s**2) * np.eye(self.k) + (dev.T * w) @ dev
        evals, evecs = np.linalg.eigh(cov)
        A = (evecs / np.sqrt(evals)) @ evecs.T
        self._set(_w=w, _s=s, _center=center, _A=A, _std_means=dev @ A)

    def _init_uniform(self):
        r = math.sqrt(3.0)
        self._set(_qprobs=np.array([0.0, 1.0]), _qvalues=np.array([-r, r]))

    def _init_custom_quantile(self):
        t = np.asarray(self.params["probs"], dtype=float)
        q = np.asarray(self.params["values"], dtype=float)
        if t.shape != q.shape or t.size < 2:
            raise ValueError("custom_quantile needs matching probs/values with >= 2 points")
        if t[0] != 0.0 or t[-1] != 1.0 or np.any(np.diff(t) <= 0):
            raise ValueError("custom_quantile probs must increase strictly from 0 to 1")
        if np.any(np.diff(q) <= 0) or not np.all(np.isfinite(q)):
            raise ValueError("custom_quantile values must be finite and strictly increasing")
        mean, var = _linear_quantile_moments(t, q)
        if not var > 1e-12:
            raise ValueError("custom_quantile law has zero variance")
        self._set(_qprobs=t, _qvalues=(q - mean) / math.sqrt(var))

    # -- sampling ----------------------------------------------------------
    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """``n x k`` draws."""
        if self.kind == "two_point":
            upper = rng.random((n, self.k)) < self._probs[1]
            return np.where(upper, self._atoms[1], self._atoms[0])
        if self.kind == "gaussian_mixture":
            comp = rng.choice(len(self._w), size=n, p=self._w)
            z = rng.standard_normal((n, self.k)) * self._s[comp][:, None]
            return self._std_means[comp] + z @ self._A
        return np.interp(rng.random((n, self.k)), self._qprobs, self._qvalues)

    @property
    def is_standard_gaussian(self) -> bool:
        return (self.kind == "gaussian_mixture" and len(self._w) == 1)

    def quantile(self, t):
        """Quantile function; defined for k = 1 only."""
        if self.k != 1:
            raise ValueError("quantile is defined for one-dimensional laws")
        t = np.asarray(t, dtype=float)
        if self.kind == "two_point":
            return np.where(t <= self._probs[0], self._atoms[0], self._atoms[1])
        if self.kind == "gaussian_mixture":
            return _mixture_quantile(self._std_means[:, 0], self._s * self._A[0, 0], self._w, t)
        return np.interp(t, self._qprobs, self._qvalues)

    # -- population distances ---------------------------------------------
    def directional_w2(self, a, resolution: int = DEFAULT_RESOLUTION) -> float:
        """Population W2 to N(0, 1) of ``a . s`` for a unit ``a`` in R^k."""
        return self.noisy_directional_w2(a, 0.0, resolution)

    def noisy_directional_w2(self, a, noise_sd: float, resolution: int = DEFAULT_RESOLUTION) -> float:
        """Population W2 to N(0, 1) of ``a . s + noise_sd * g`` with g ~ N(0, 1).

        ``|a|^2 + noise_sd^2`` should be 1 for the result to describe a unit
        direction of a planted model.
        """
        a = np.asarray(a, dtype=float).ravel()
        if a.size != self.k:
            raise ValueError(f"direction has dimension {a.size}, law has k={self.k}")
        if self.kind == "gaussian_mixture":
            mu = self._std_means @ a
            sd = np.sqrt((self._s * np.linalg.norm(self._A @ a)) ** 2 + noise_sd**2)
            return mixture_w2_to_std_normal(mu, sd, self._w, _grid_for(resolution))
        if self.kind == "two_point" and 2**self.k <= MAX_EXACT_ATOMS:
            atoms, probs = self._product_atoms(a)
            if noise_sd == 0.0:
                return w2_discrete_to_std_normal(atoms, probs).distance
            return mixture_w2_to_std_normal(atoms, np.full(atoms.size, noise_sd), probs,
                                            _grid_for(resolution))
        nonzero = np.flatnonzero(a != 0.0)
        if noise_sd == 0.0 and nonzero.size == 1 and self.kind != "two_point":
            # a single coordinate: the linear quantile is exact (up to sign)
            vals = self._qvalues if a[nonzero[0]] > 0 else -self._qvalues[::-1]
            return _linear_quantile_w2(self._qprobs if a[nonzero[0]] > 0 else 1 - self._qprobs[::-1],
                                       vals * abs(a[nonzero[0]]))
        return self._mc_w2(a, noise_sd, resolution)

    def _product_atoms(self, a):
        combos = np.array(list(itertools.product((0, 1), repeat=self.k)))
        atoms = self._atoms[combos] @ a
        probs = np.prod(self._probs[combos], axis=1)
        return atoms, probs

    def _mc_w2(self, a, noise_sd, resolution):
        rng = np.random.default_rng(_MC_SEED)
        x = self.sample(resolution, rng) @ a
        if noise_sd:
            x = x + noise_sd * rng.standard_normal(resolution)
        return math.sqrt(w2sq_sorted_to_std_normal(np.sort(x)))

    @property
    def has_closed_form(self) -> bool:
        """Whether noisy directional distances avoid Monte Carlo."""
        return self.kind == "gaussian_mixture" or (
            self.kind == "two_point" and 2**self.k <= MAX_EXACT_ATOMS)


def _grid_for(resolution):
    return int(min(max(resolution // 16, 4001), 200001))


def _mixture_quantile(means, sds, weights, t):
    t = np.atleast_1d(t)
    lo = np.full(t.shape, np.min(means - 40 * sds))
    hi = np.full(t.shape, np.max(means + 40 * sds))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        F = ndtr((mid[:, None] - means) / sds) @ weights
        below = F < t
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.max(hi - lo) < 1e-13:
            break
    return 0.5 * (lo + hi)


def random_orthonormal_basis(p: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix (columns orthonormal)."""
    Q, R = np.linalg.qr(rng.standard_normal((p, p)))
    return Q * np.where(np.diag(R) < 0, -1.0, 1.0)


@dataclass(frozen=True, eq=False)
class PlantedModel:
    """A planted model with its ground-truth separation quantities.

    ``d_psi`` is the largest directional W2 distance to N(0, 1), ``d_min_u``
    the smallest one inside the signal subspace, ``d_w`` the largest one inside
    its complement. ``kappa1 > kappa2`` separate the two and are recorded only
    as witnesses; recovery never reads them.
    """

    p: int
    k: int
    signal: SignalLaw | None
    basis_u: Frame
    basis_w: Frame
    d_psi: float
    d_min_u: float
    d_w: float
    snr: float
    kappa1: float
    kappa2: float
    complement_shift: float = 0.0

    def __post_init__(self):
        if len(self.basis_u) != self.k or len(self.basis_w) != self.p - self.k:
            raise ValueError("basis sizes do not match k and p")
        if (self.signal is None) != (self.k == 0):
            raise ValueError("a signal law is required exactly when k > 0")
        full = np.vstack([self.basis_u.vectors, self.basis_w.vectors])
        if np.max(np.abs(full @ full.T - np.eye(self.p))) > 1e-8:
            raise ValueError("basis_u and basis_w do not form an orthonormal basis")
        if self.k > 0 and not self.kappa1 > self.kappa2:
            raise ValueError("separation constants need kappa1 > kappa2")

    @property
    def complement_law(self) -> SignalLaw | None:
        if self.complement_shift == 0.0:
            return None
        m = self.complement_shift
        sd = math.sqrt(1 - m * m)
        return SignalLaw.gaussian_mixture([[-m], [m]], scales=[sd, sd])

    def to_dict(self) -> dict:
        return {
            "p": self.p, "k": self.k,
            "signal": None if self.signal is None else self.signal.to_dict(),
            "complement_shift": self.complement_shift,
            "basis_u": self.basis_u.vectors.tolist(),
            "basis_w": self.basis_w.vectors.tolist(),
            "d_psi": self.d_psi, "d_min_u": self.d_min_u, "d_w": self.d_w,
            "snr": self.snr, "kappa1": self.kappa1, "kappa2": self.kappa2,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PlantedModel":
        p = int(d["p"])
        return cls(p=p, k=int(d["k"]),
                   signal=None if d.get("signal") is None else SignalLaw.from_dict(d["signal"]),
                   basis_u=Frame(np.asarray(d["basis_u"], dtype=float).reshape(-1, p), p),
                   basis_w=Frame(np.asarray(d["basis_w"], dtype=float).reshape(-1, p), p),
                   d_psi=float(d["d_psi"]), d_min_u=float(d["d_min_u"]), d_w=float(d["d_w"]),
                   snr=float(d["snr"]), kappa1=float(d["kappa1"]), kappa2=float(d["kappa2"]),
                   complement_shift=float(d.get("complement_shift", 0.0)))


def example1_mixture(k: int, separation: float) -> SignalLaw:
    """Equal-weight mixture of unit-covariance Gaussians on a regular simplex.

    Uses k + 1 components: the centered means of only k components span
    k - 1 dimensions, which would leave one Gaussian direction inside U.
    ``separation`` is the distance of each mean from the centroid.
    """
    if k < 1 or separation <= 0:
        raise ValueError("need k >= 1 and positive separation")
    vertices = np.eye(k + 1) - 1.0 / (k + 1)
    basis = np.linalg.svd(vertices)[2][:k]  # rows span the simplex hyperplane
    means = vertices @ basis.T
    means *= separation / np.linalg.norm(means[0])
    return SignalLaw.gaussian_mixture(means)


def _search_extremes(f, k, method, mc_samples):
    """(max, min) of f over unit vectors of R^k."""
    if k == 1:
        v = f(np.array([1.0]))
        return v, v
    if k == 2:
        theta = np.arange(360) * (math.pi / 360)
        vals = np.array([f(np.array([math.cos(t), math.sin(t)])) for t in theta])
        h = math.pi / 360

        def refine(sign, t0):
            res = optimize.minimize_scalar(
                lambda t: sign * f(np.array([math.cos(t), math.sin(t)])),
                bounds=(t0 - h, t0 + h), method="bounded", options={"xatol": 1e-9})
            return sign * res.fun

        return (max(vals.max(), refine(-1, theta[vals.argmax()])),
                min(vals.min(), refine(1, theta[vals.argmin()])))
    if method == "net" and k == 3:
        cands = sphere_net(3, 0.08)
    elif method == "net":
        raise ValueError("net search supports k <= 3; use method='random'")
    else:
        rng = np.random.default_rng(_MC_SEED)
        cands = rng.standard_normal((max(2000, 50 * k), k))
        cands /= np.linalg.norm(cands, axis=1, keepdims=True)
    vals = np.array([f(c) for c in cands])

    def refine(sign, x0):
        res = optimize.minimize(lambda x: sign * f(x / np.linalg.norm(x)), x0,
                                method="Nelder-Mead",
                                options={"xatol": 1e-7, "fatol": 1e-10, "maxiter": 400 * k})
        return sign * res.fun

    return (max(vals.max(), refine(-1, cands[vals.argmax()])),
            min(vals.min(), refine(1, cands[vals.argmin()])))


def _snr(d_psi, d_min_u, d_w, k):
    if k == 0:
        return 0.0
    den = d_psi**2 - d_min_u**2
    num = d_psi**2 - d_w**2
    if den <= 1e-12 * max(d_psi**2, 1e-300):
        return math.inf
    return math.sqrt(max(num, 0.0) / den)


def ground_truth_metrics(model: PlantedModel, mc_samples: int = DEFAULT_RESOLUTION,
                         method: str = "auto"):
    """Population ``(d_psi, d_min_u, d_w, snr)`` of a planted model.

    ``method`` is ``"net"`` (k <= 3, grid plus local refinement), ``"random"``
    (random in-subspace directions plus local refinement, a lower bound on
    the supremum and an upper bound on the infimum) or ``"auto"``.
    ``mc_samples`` sets the quadrature or Monte Carlo resolution of each
    directional distance.
    """
    return _ground_truth(model.signal, model.k, model.complement_shift, mc_samples, method)


def _ground_truth(signal, k, complement_shift, mc_samples, method="auto"):
    if method == "auto":
        method = "net" if k <= 3 else "random"
    if method not in ("net", "random"):
        raise ValueError(f"unknown search method {method!r}")
    if method == "net" and k > 3:
        raise ValueError("net search supports k <= 3; use method='random'")
    d_w = 0.0
    if complement_shift:
        m = complement_shift
        sd = math.sqrt(1 - m * m)
        # coordinate axes of W: mixing i.i.d. coordinates only Gaussianizes
        d_w = mixture_w2_to_std_normal([-m, m], [sd, sd], [0.5, 0.5], _grid_for(mc_samples))
    if k == 0:
        return d_w, 0.0, d_w, 0.0
    d_sup, d_min_u = _search_extremes(lambda a: signal.directional_w2(a, mc_samples), k,
                                      method, mc_samples)
    d_psi = max(d_sup, d_w)
    return d_psi, d_min_u, d_w, _snr(d_psi, d_min_u, d_w, k)


def _kappas(d_min_u, d_w, k):
    if k == 0:
        return 0.0, 0.0
    gap = d_min_u - d_w
    if not gap > 0:
        raise ValueError(
            f"signal subspace is not separated from the complement: inf over U of W2 is "
            f"{d_min_u:.4g} but sup over W is {d_w:.4g}")
    return d_w + 2 * gap / 3, d_w + gap / 3


def make_planted_model(p: int, signal: SignalLaw | None, seed: int,
                       mc_samples: int = DEFAULT_RESOLUTION,
                       complement_shift: float = 0.0,
                       method: str = "auto") -> PlantedModel:
    """Random signal subspace of dimension ``signal.k`` (0 if None) in R^p."""
    k = 0 if signal is None else signal.k
    if not 0 <= k <= p:
        raise ValueError(f"need 0 <= k <= p, got k={k}, p={p}")
    if not 0 <= complement_shift < 1:
        raise ValueError("complement_shift must lie in [0, 1)")
    Q = random_orthonormal_basis(p, np.random.default_rng(seed))
    d_psi, d_min_u, d_w, snr = _ground_truth(signal, k, complement_shift, mc_samples, method)
    kappa1, kappa2 = _kappas(d_min_u, d_w, k)
    return PlantedModel(p=p, k=k, signal=signal,
                        basis_u=Frame(Q[:, :k].T, p), basis_w=Frame(Q[:, k:].T, p),
                        d_psi=float(d_psi), d_min_u=float(d_min_u), d_w=float(d_w),
                        snr=float(snr), kappa1=float(kappa1), kappa2=float(kappa2),
                        complement_shift=float(complement_shift))


def sample(model: PlantedModel, n: int, seed: int) -> DataMatrix:
    """``n`` i.i.d. rows of the planted model; deterministic given ``seed``."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    X = np.zeros((n, model.p))
    if model.k:
        X += model.signal.sample(n, rng) @ model.basis_u.vectors
    if model.k < model.p:
        comp = model.complement_law
        if comp is None:
            g = rng.standard_normal((n, model.p - model.k))
        else:
            g = comp.sample(n * (model.p - model.k), rng).reshape(n, model.p - model.k)
        X += g @ model.basis_w.vectors
    return DataMatrix(X, whitened=False)


def whiten(data: DataMatrix) -> DataMatrix:
    """Center and apply the symmetric inverse square root of the covariance.

    The covariance uses the 1/n normalization, so the output has exactly
    zero mean and identity sample covariance.
    """
    n, p = data.n, data.p
    if n <= p:
        raise ValueError(f"whitening needs n > p, got n={n}, p={p}")
    Xc = data.rows - data.rows.mean(axis=0)
    cov = Xc.T @ Xc / n
    evals, evecs = np.linalg.eigh(cov)
    if evals[0] <= 1e-12 * max(evals[-1], 1e-300):
        raise ValueError("sample covariance is singular; data is rank deficient")
    out = Xc @ ((evecs / np.sqrt(evals)) @ evecs.T)
    out -= out.mean(axis=0)
    return DataMatrix(out, whitened=True)
