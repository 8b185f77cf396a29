"""Recovery accuracy against ground truth and empirical concentration probes."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .datagen import PlantedModel, SignalLaw, sample
from .pursuit import DataMatrix, Frame, as_direction, objective
from .recovery import RecoveryReport
from .transport import (SortedProjection, w2_empirical_to_empirical,
                        w2_empirical_to_std_normal)

__all__ = [
    "RecoveryError",
    "projection_norm",
    "principal_angles",
    "evaluate_recovery",
    "ConcentrationResult",
    "concentration_probe",
    "RateResult",
    "rate_probe",
    "sample_cov_spectral_norm",
]

RATE_REFERENCE_ATOMS = 1 << 16


@dataclass
class RecoveryError:
    """Errors of the ``k_hat`` retained directions of a report.

    ``all_w_proj`` also covers the trailing rejected direction, for plots.
    """

    per_direction_w_proj: list
    max_w_proj: float
    principal_angles: list
    snr_bound: float
    all_w_proj: list = field(default_factory=list)

    @property
    def bound_holds(self) -> bool:
        return self.max_w_proj <= self.snr_bound

    def to_dict(self) -> dict:
        return {"per_direction_w_proj": self.per_direction_w_proj,
                "max_w_proj": self.max_w_proj,
                "principal_angles": self.principal_angles,
                "snr_bound": self.snr_bound,
                "bound_holds": self.bound_holds,
                "all_w_proj": self.all_w_proj}


def projection_norm(v, subspace: Frame) -> float:
    v = as_direction(v, subspace.p)
    if len(subspace) == 0:
        return 0.0
    return float(min(np.linalg.norm(subspace.vectors @ v), 1.0))


def principal_angles(a: Frame, b: Frame) -> list:
    """Principal angles between two spans, nondecreasing, in radians."""
    if a.p != b.p:
        raise ValueError(f"frames live in R^{a.p} and R^{b.p}")
    if len(a) == 0 or len(b) == 0:
        return []
    sv = np.linalg.svd(a.vectors @ b.vectors.T, compute_uv=False)
    return sorted(float(x) for x in np.arccos(np.clip(sv, 0.0, 1.0)))


def evaluate_recovery(report: RecoveryReport, model: PlantedModel) -> RecoveryError:
    if report.frame.p != model.p:
        raise ValueError(f"report has p={report.frame.p}, model has p={model.p}")
    all_w = [projection_norm(v, model.basis_w) for v in report.frame.vectors]
    kept = all_w[:report.k_hat]
    retained = Frame(report.frame.vectors[:report.k_hat], model.p)
    # snr = inf gives a zero bound: the population statement is exact orthogonality
    bound = 2.0 / model.snr if model.snr > 0 else math.inf
    return RecoveryError(per_direction_w_proj=kept, max_w_proj=max(kept, default=0.0),
                         principal_angles=principal_angles(retained, model.basis_u),
                         snr_bound=bound, all_w_proj=all_w)


@dataclass
class ConcentrationResult:
    """Largest gap between empirical and population indices over sampled directions.

    The directions are finitely many, so ``max_abs_deviation`` only bounds
    the supremum over the sphere from below.
    """

    max_abs_deviation: float
    per_direction: list
    truth_method: str


def _population_index(model, u, resolution):
    """Exact population index along ``u`` when a closed form exists, else None."""
    if model.complement_shift:
        return None
    a = model.basis_u.vectors @ u if model.k else np.zeros(0)
    alpha = float(np.linalg.norm(a))
    if alpha == 0.0 or model.k == 0:
        return 0.0
    if not model.signal.has_closed_form:
        return None
    beta = float(np.linalg.norm(model.basis_w.vectors @ u)) if model.k < model.p else 0.0
    return model.signal.noisy_directional_w2(a, beta, resolution)


def _derived_seed(seed, tag):
    return int(np.random.SeedSequence([seed, tag]).generate_state(1, np.uint64)[0])


def concentration_probe(model: PlantedModel, n: int, directions: int, mc_truth_samples: int,
                        seed: int, truth: str = "auto", truth_seed: int | None = None
                        ) -> ConcentrationResult:
    """Compare empirical and population indices along random unit directions.

    The empirical sample is ``sample(model, n, seed)``. Population indices are
    exact (``truth="auto"``) where the directional law has a closed form and
    otherwise come from an independent ``mc_truth_samples``-row sample drawn
    with ``truth_seed``; ``truth="mc"`` forces the Monte Carlo route.
    """
    if truth not in ("auto", "mc"):
        raise ValueError("truth must be 'auto' or 'mc'")
    data = sample(model, n, seed)
    rng = np.random.default_rng(_derived_seed(seed, 1))
    U = rng.standard_normal((directions, model.p))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    reference = None
    rows, methods = [], set()
    for u in U:
        emp = objective(data, u)
        pop = None if truth == "mc" else _population_index(model, u, mc_truth_samples)
        if pop is None:
            if reference is None:
                ts = _derived_seed(seed, 2) if truth_seed is None else truth_seed
                reference = sample(model, mc_truth_samples, ts)
            pop = objective(reference, u)
            methods.add("mc")
        else:
            methods.add("exact")
        rows.append({"empirical": emp, "population": pop, "gap": abs(emp - pop)})
    return ConcentrationResult(max_abs_deviation=max(r["gap"] for r in rows),
                               per_direction=rows,
                               truth_method="+".join(sorted(methods)))


@dataclass
class RateResult:
    points: list  # (n, mean_w2)
    slope: float


def _loglog_slope(ns, vals):
    return float(np.polyfit(np.log(ns), np.log(vals), 1)[0])


def rate_probe(law: SignalLaw, n_grid, trials: int, seed: int) -> RateResult:
    """Mean W2 between n-samples of a 1D law and the law itself, per n.

    For the standard normal this is the exact empirical-to-Gaussian distance.
    Other laws are compared against a quantization of their quantile
    function on 2^16 midpoints.
    """
    n_grid = [int(n) for n in n_grid]
    if len(n_grid) < 3 or any(b <= a for a, b in zip(n_grid, n_grid[1:])) or n_grid[0] < 1:
        raise ValueError("n_grid needs at least 3 increasing positive sizes")
    if law.k != 1:
        raise ValueError("rate_probe needs a one-dimensional law")
    if trials < 1:
        raise ValueError("trials must be positive")
    ref = None
    if not law.is_standard_gaussian:
        mids = (np.arange(RATE_REFERENCE_ATOMS) + 0.5) / RATE_REFERENCE_ATOMS
        ref = SortedProjection(np.sort(law.quantile(mids)))
    points = []
    for i, n in enumerate(n_grid):
        rng = np.random.default_rng(_derived_seed(seed, 100 + i))
        total = 0.0
        for _ in range(trials):
            proj = SortedProjection(np.sort(law.sample(n, rng)[:, 0]))
            res = w2_empirical_to_std_normal(proj) if ref is None else w2_empirical_to_empirical(proj, ref)
            total += res.distance
        points.append((n, total / trials))
    return RateResult(points=points, slope=_loglog_slope(*zip(*points)))


def sample_cov_spectral_norm(data: DataMatrix, rtol: float = 1e-8, max_iter: int = 100_000) -> float:
    """Top eigenvalue of (1/n) sum X_i X_i^T by power iteration.

    Iterates on the smaller of the p x p and n x n Gram matrices, which share
    their nonzero spectrum.
    """
    X = data.rows
    n, p = X.shape
    G = X.T @ X / n if p <= n else X @ X.T / n
    v = np.random.default_rng(0).standard_normal(G.shape[0])
    v /= np.linalg.norm(v)
    # for symmetric G some eigenvalue lies within |G v - lam v| of lam
    lam = 0.0
    for _ in range(max_iter):
        w = G @ v
        lam = float(v @ w)
        if lam <= 0.0:
            return 0.0
        if np.linalg.norm(w - lam * v) <= rtol * lam:
            return lam
        v = w / np.linalg.norm(w)
    return lam
