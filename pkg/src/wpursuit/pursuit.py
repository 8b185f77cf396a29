"""Projection-pursuit objective and its maximization over the unit sphere.

The index of a unit direction ``u`` is the W2 distance between the empirical
law of the projections ``u.X_i`` and N(0, 1). The optimizer works with the
squared index, whose gradient is clean once the ranks of the projections are
frozen, and reports the unsquared value.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space

from .gaussmath import uniform_bin_moments
from .transport import SortedProjection, w2_empirical_to_std_normal

__all__ = [
    "DataMatrix",
    "Frame",
    "OptimizerConfig",
    "AscentRun",
    "as_direction",
    "project",
    "objective",
    "objective_gradient",
    "ascend_from",
    "run_restarts",
    "maximize_on_sphere",
    "net_maximizer_oracle",
    "sphere_net",
]

UNIT_TOL = 1e-10
ORTHO_TOL = 1e-8
NET_MAX_SIZE = 10**7
EVAL_BLOCK = 16


@dataclass(frozen=True, eq=False)
class DataMatrix:
    """An immutable ``n x p`` sample; ``whitened`` records provenance only."""

    rows: np.ndarray
    whitened: bool = False

    def __post_init__(self):
        rows = np.array(self.rows, dtype=float)
        if rows.ndim != 2 or rows.shape[0] < 1 or rows.shape[1] < 1:
            raise ValueError(f"DataMatrix needs a nonempty 2D array, got shape {rows.shape}")
        if not np.all(np.isfinite(rows)):
            raise ValueError("DataMatrix contains non-finite entries")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        if self.whitened:
            ok, msg = self.whiteness_diagnostic()
            if not ok:
                warnings.warn(f"data flagged whitened but {msg}", stacklevel=2)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def p(self) -> int:
        return self.rows.shape[1]

    def whiteness_diagnostic(self):
        mean = self.rows.mean(axis=0)
        if np.linalg.norm(mean) > 1e-6 * math.sqrt(self.p):
            return False, f"sample mean norm is {np.linalg.norm(mean):.3g}"
        centered = self.rows - mean
        cov = centered.T @ centered / self.n
        gap = np.linalg.norm(cov - np.eye(self.p), 2)
        if gap > 0.5:
            return False, f"sample covariance is {gap:.3g} from identity in spectral norm"
        return True, ""


@dataclass(frozen=True, eq=False)
class Frame:
    """Ordered orthonormal directions in R^p, stored as the rows of ``vectors``."""

    vectors: np.ndarray
    p: int

    def __post_init__(self):
        v = np.array(self.vectors, dtype=float).reshape(-1, self.p)
        if v.shape[0] > self.p:
            raise ValueError("a frame cannot hold more than p directions")
        if v.shape[0]:
            gram = v @ v.T
            if np.max(np.abs(gram - np.eye(v.shape[0]))) > ORTHO_TOL:
                raise ValueError("frame vectors are not orthonormal")
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)

    @classmethod
    def empty(cls, p: int) -> "Frame":
        return cls(np.zeros((0, p)), p)

    def __len__(self):
        return self.vectors.shape[0]

    @property
    def directions(self):
        return [row.copy() for row in self.vectors]

    def extended(self, u) -> "Frame":
        return Frame(np.vstack([self.vectors, np.asarray(u, dtype=float)[None, :]]), self.p)

    def complement_basis(self) -> np.ndarray:
        """Orthonormal basis of the orthogonal complement, as columns (p x (p-m))."""
        if len(self) == 0:
            return np.eye(self.p)
        return null_space(self.vectors)


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 16
    max_iters: int = 500
    step_init: float = 1.0
    step_shrink: float = 0.5
    grad_tol: float = 1e-7
    stall_tol: float = 1e-8
    stall_window: int = 10
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.restarts < 1 or self.max_iters < 1 or self.threads < 1:
            raise ValueError("restarts, max_iters and threads must be positive")
        if not self.step_init > 0 or not self.grad_tol > 0:
            raise ValueError("step_init and grad_tol must be positive")
        if self.stall_tol < 0 or self.stall_window < 1:
            raise ValueError("stall_tol must be nonnegative and stall_window positive")
        if not 0 < self.step_shrink < 1:
            raise ValueError("step_shrink must lie in (0, 1)")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def as_direction(u, p: int | None = None) -> np.ndarray:
    u = np.asarray(u, dtype=float).ravel()
    if p is not None and u.size != p:
        raise ValueError(f"direction has dimension {u.size}, data has p={p}")
    if abs(np.linalg.norm(u) - 1.0) > UNIT_TOL:
        raise ValueError("direction must have unit norm")
    return u


def project(data: DataMatrix, u) -> SortedProjection:
    u = as_direction(u, data.p)
    return SortedProjection(np.sort(data.rows @ u))


def objective(data: DataMatrix, u) -> float:
    return w2_empirical_to_std_normal(project(data, u)).distance


def _evaluate_columns(Y, W, m1, m2sum):
    """Squared index for each column of ``W`` plus rank weights ``C``.

    The Euclidean gradient of column j is ``2 Y^T C[:, j]``. Ties among
    projections are broken by sample index.
    """
    n = Y.shape[0]
    P = Y @ W
    order = np.argsort(P, axis=0)
    Ps = np.take_along_axis(P, order, axis=0)
    if n > 1:
        tied = np.flatnonzero(np.any(Ps[1:] == Ps[:-1], axis=0))
        if tied.size:
            order[:, tied] = np.argsort(P[:, tied], axis=0, kind="stable")
            Ps[:, tied] = np.take_along_axis(P[:, tied], order[:, tied], axis=0)
    F = np.einsum("ij,ij->j", Ps, Ps) / n - 2.0 * (m1 @ Ps) + m2sum
    C = np.empty_like(P)
    np.put_along_axis(C, order, Ps / n - m1[:, None], axis=0)
    return np.maximum(F, 0.0), C


def objective_gradient(data: DataMatrix, u) -> np.ndarray:
    """Euclidean gradient of the squared index with the ranks held fixed."""
    u = as_direction(u, data.p)
    m1, m2 = uniform_bin_moments(data.n)
    _, C = _evaluate_columns(data.rows, u[:, None], m1, m2.sum())
    return 2.0 * data.rows.T @ C[:, 0]


@dataclass
class AscentRun:
    direction: np.ndarray
    value: float
    trace: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


class _Batch:
    """Per-restart state of Riemannian gradient ascent on a reduced sphere.

    Every restart follows exactly the sequential algorithm (Armijo
    backtracking, step growth after acceptance, renormalization retraction);
    restarts only share the matrix products and sorts.
    """

    def __init__(self, Y, W0, cfg: OptimizerConfig):
        self.Y = Y
        self.cfg = cfg
        self.m1, m2 = uniform_bin_moments(Y.shape[0])
        self.m2sum = float(m2.sum())
        R = W0.shape[1]
        self.W = W0 / np.linalg.norm(W0, axis=0)
        self.F, C = self._eval(self.W)
        self.T, self.tn2 = self._tangent(self.W, C)
        self.step = np.full(R, cfg.step_init)
        self.iters = np.zeros(R, dtype=int)
        self.traces = [[f] for f in self.F]
        self.converged = np.sqrt(self.tn2) < cfg.grad_tol
        self.active = ~self.converged

    def _eval(self, W):
        # fixed column blocks keep every product bitwise independent of threads
        blocks = [np.arange(i, min(i + EVAL_BLOCK, W.shape[1]))
                  for i in range(0, W.shape[1], EVAL_BLOCK)]

        def work(idx):
            return _evaluate_columns(self.Y, W[:, idx], self.m1, self.m2sum)

        if self.cfg.threads > 1 and len(blocks) > 1:
            with ThreadPoolExecutor(max_workers=self.cfg.threads) as pool:
                parts = list(pool.map(work, blocks))
        else:
            parts = [work(b) for b in blocks]
        if len(parts) == 1:
            return parts[0]
        return np.concatenate([f for f, _ in parts]), np.hstack([c for _, c in parts])

    def _tangent(self, W, C):
        G = 2.0 * self.Y.T @ C
        T = G - W * np.einsum("ij,ij->j", W, G)
        return T, np.einsum("ij,ij->j", T, T)

    def run(self, iter_cap: int):
        cfg = self.cfg
        cap = min(iter_cap, cfg.max_iters)
        self.active &= self.iters < cap
        while np.any(self.active):
            idx = np.flatnonzero(self.active)
            cand = self.W[:, idx] + self.step[idx] * self.T[:, idx]
            cand /= np.linalg.norm(cand, axis=0)
            F_new, C_new = self._eval(cand)
            ok = F_new >= self.F[idx] + 1e-4 * self.step[idx] * self.tn2[idx]
            bad = idx[~ok]
            self.step[bad] *= cfg.step_shrink
            stuck = bad[self.step[bad] <= 1e-14]
            self.converged[stuck] = True
            self.active[stuck] = False
            good = idx[ok]
            if good.size == 0:
                continue
            self.W[:, good] = cand[:, ok]
            self.F[good] = F_new[ok]
            T, tn2 = self._tangent(cand[:, ok], C_new[:, ok])
            self.T[:, good] = T
            self.tn2[good] = tn2
            self.step[good] /= cfg.step_shrink
            self.iters[good] += 1
            k = cfg.stall_window
            for j in good:
                tr = self.traces[j]
                tr.append(self.F[j])
                if (math.sqrt(self.tn2[j]) < cfg.grad_tol
                        or (len(tr) > k and tr[-1] - tr[-1 - k] <= cfg.stall_tol * tr[-1])):
                    self.converged[j] = True
                    self.active[j] = False
                elif self.iters[j] >= cap:
                    self.active[j] = False
        return self

    def resume(self, keep):
        """Reactivate the restarts in ``keep`` that have not converged."""
        self.active[:] = False
        keep = np.asarray(keep, dtype=int)
        self.active[keep] = ~self.converged[keep] & (self.iters[keep] < self.cfg.max_iters)
        return self


def _start_points(p, basis, count, seed):
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((count, p))
    return raw @ basis  # reduced coordinates of the projected ambient draws


def _check_constraints(data, constraints):
    if constraints.p != data.p:
        raise ValueError(f"constraint frame has p={constraints.p}, data has p={data.p}")
    if len(constraints) >= data.p:
        raise ValueError("no feasible direction: constraints span the whole space")
    return constraints.complement_basis()


def _lift(constraints, basis, w):
    u = basis @ w
    if len(constraints):
        u -= constraints.vectors.T @ (constraints.vectors @ u)
    return u / np.linalg.norm(u)


def _runs_from_batch(data, constraints, basis, batch):
    runs = []
    for j in range(batch.W.shape[1]):
        u = _lift(constraints, basis, batch.W[:, j])
        runs.append(AscentRun(direction=u, value=objective(data, u),
                              trace=[math.sqrt(v) for v in batch.traces[j]],
                              iterations=int(batch.iters[j]),
                              converged=bool(batch.converged[j])))
    return runs


def run_restarts(data: DataMatrix, constraints: Frame, config: OptimizerConfig,
                 starts=None, screen_iters: int = 0, screen_keep: int = 4):
    """All ascent runs of a multi-start search, in start order.

    Start points are standard Gaussian draws in R^p seeded by
    ``config.seed`` and projected onto the feasible subspace, or the rows of
    ``starts``. With ``screen_iters > 0`` every restart first takes at most
    that many steps; only the ``screen_keep`` best then run to convergence.
    """
    basis = _check_constraints(data, constraints)
    if starts is None:
        W0 = _start_points(data.p, basis, config.restarts, config.seed).T
    else:
        W0 = (np.atleast_2d(np.asarray(starts, dtype=float)) @ basis).T
    if np.any(np.linalg.norm(W0, axis=0) == 0):
        raise ValueError("a start point lies in the span of the constraints")
    batch = _Batch(data.rows @ basis, W0, config)
    if screen_iters > 0 and W0.shape[1] > screen_keep:
        batch.run(screen_iters)
        survivors = np.argsort(-batch.F, kind="stable")[:screen_keep]
        batch.resume(survivors)
    batch.run(config.max_iters)
    return _runs_from_batch(data, constraints, basis, batch)


def ascend_from(data: DataMatrix, constraints: Frame, start, config: OptimizerConfig) -> AscentRun:
    """One projected-gradient ascent run from an ambient start vector."""
    return run_restarts(data, constraints, config, starts=np.atleast_2d(start))[0]


def maximize_on_sphere(data: DataMatrix, constraints: Frame, config: OptimizerConfig,
                       starts=None, screen_iters: int = 0, screen_keep: int = 4):
    """Best direction over multi-start ascent, orthogonal to ``constraints``.

    Returns ``(direction, value)``; ties go to the earliest restart.
    """
    runs = run_restarts(data, constraints, config, starts, screen_iters, screen_keep)
    best = max(range(len(runs)), key=lambda i: (runs[i].value, -i))
    return runs[best].direction, runs[best].value


def sphere_net(p: int, resolution: float) -> np.ndarray:
    """Directions covering the half sphere at the given angular spacing.

    The index is even in ``u``, so one representative of each pair ``+-u``
    suffices. For p=2 the net is the uniform angle grid on [0, pi).
    """
    if p == 2:
        theta = np.arange(0.0, math.pi, resolution)
        return np.column_stack([np.cos(theta), np.sin(theta)])
    if p == 3:
        pts = [np.array([[0.0, 0.0, 1.0]])]
        polar = np.minimum(np.arange(resolution, math.pi / 2 + resolution / 2, resolution),
                           math.pi / 2)
        for theta, count in zip(polar, _ring_counts(resolution)):
            az = np.arange(count) * (2 * math.pi / count)
            pts.append(np.column_stack([math.sin(theta) * np.cos(az),
                                        math.sin(theta) * np.sin(az),
                                        np.full(count, math.cos(theta))]))
        return np.vstack(pts)
    raise ValueError(f"net oracle supports p in {{2, 3}}, got p={p}")


def _ring_counts(resolution):
    polar = np.minimum(np.arange(resolution, math.pi / 2 + resolution / 2, resolution),
                       math.pi / 2)
    return np.maximum(1, np.ceil(2 * math.pi * np.sin(polar) / resolution)).astype(np.int64)


def net_size(p: int, resolution: float) -> int:
    """Number of points ``sphere_net(p, resolution)`` would produce."""
    if p == 2:
        return int(math.ceil(math.pi / resolution))
    if p == 3:
        if resolution < 1e-7:
            return NET_MAX_SIZE + 1  # hopeless anyway; avoid a huge ring array
        return 1 + int(_ring_counts(resolution).sum())
    raise ValueError(f"net oracle supports p in {{2, 3}}, got p={p}")


def batch_objective(data: DataMatrix, directions: np.ndarray, batch: int = 512) -> np.ndarray:
    """Index values for many unit directions (rows) at once."""
    n = data.n
    m1, m2 = uniform_bin_moments(n)
    m2sum = m2.sum()
    out = np.empty(len(directions))
    for start in range(0, len(directions), batch):
        proj = np.sort(data.rows @ directions[start:start + batch].T, axis=0)
        sq = np.einsum("ij,ij->j", proj, proj) / n - 2.0 * m1 @ proj + m2sum
        out[start:start + batch] = np.sqrt(np.maximum(sq, 0.0))
    return out


def net_maximizer_oracle(data: DataMatrix, resolution: float):
    """Exhaustive search over a direction net for p in {2, 3}."""
    if data.p not in (2, 3):
        raise ValueError(f"net oracle supports p in {{2, 3}}, got p={data.p}")
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    if net_size(data.p, resolution) > NET_MAX_SIZE:
        raise ValueError(f"net at resolution {resolution} exceeds {NET_MAX_SIZE} points")
    net = sphere_net(data.p, resolution)
    values = batch_objective(data, net)
    best = int(np.argmax(values))
    return net[best].copy(), float(values[best])
