"""Greedy extraction of non-Gaussian directions and the dimension estimate."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .pursuit import DataMatrix, Frame, OptimizerConfig, maximize_on_sphere

__all__ = [
    "StoppingConfig",
    "SearchConfig",
    "RecoveryReport",
    "threshold",
    "estimate_d_psi",
    "sequential_recovery",
]

STOP_REASONS = ("threshold", "max_k", "exhausted")


@dataclass(frozen=True)
class StoppingConfig:
    """Constants of the stopping rule.

    A direction is kept while its index is at least
    ``sqrt(1 - 4 delta^2) * d_psi + epsilon + c_sigma * n**-0.25``.
    ``d_psi_hat`` fixes ``d_psi``; otherwise the largest index extracted so
    far is plugged in. ``epsilon`` is an absolute floor: without it a pure
    plug-in threshold sits below the first index and never rejects it.
    ``max_k=None`` means no cap besides p.
    """

    delta: float = 0.35
    epsilon: float = 0.1
    c_sigma: float = 0.0
    d_psi_hat: float | None = None
    max_k: int | None = None

    def __post_init__(self):
        if not 0 < self.delta < 1 or 4 * self.delta**2 > 1:
            raise ValueError("delta must lie in (0, 1) with 4 delta^2 <= 1")
        if self.epsilon < 0 or self.c_sigma < 0:
            raise ValueError("epsilon and c_sigma must be nonnegative")
        if self.d_psi_hat is not None and self.d_psi_hat < 0:
            raise ValueError("d_psi_hat must be nonnegative")
        if self.max_k is not None and self.max_k < 1:
            raise ValueError("max_k must be positive")


@dataclass(frozen=True)
class SearchConfig:
    """Restart screening applied to each greedy step (0 disables it)."""

    screen_iters: int = 0
    screen_keep: int = 4


@dataclass
class RecoveryReport:
    frame: Frame
    distances: list
    k_hat: int
    threshold_used: float
    d_psi_estimate: float
    stopped_reason: str
    thresholds: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.distances) != len(self.frame):
            raise ValueError("one distance per direction is required")
        if not 0 <= self.k_hat <= len(self.frame):
            raise ValueError("k_hat exceeds the number of directions")
        if self.stopped_reason not in STOP_REASONS:
            raise ValueError(f"stopped_reason must be one of {STOP_REASONS}")

    def to_dict(self) -> dict:
        return {
            "k_hat": self.k_hat,
            "stopped_reason": self.stopped_reason,
            "threshold_used": self.threshold_used,
            "d_psi_estimate": self.d_psi_estimate,
            "distances": list(self.distances),
            "thresholds": list(self.thresholds),
            "p": self.frame.p,
            "directions": self.frame.vectors.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RecoveryReport":
        p = int(d["p"])
        return cls(frame=Frame(np.asarray(d["directions"], dtype=float).reshape(-1, p), p),
                   distances=[float(x) for x in d["distances"]], k_hat=int(d["k_hat"]),
                   threshold_used=float(d["threshold_used"]),
                   d_psi_estimate=float(d["d_psi_estimate"]),
                   stopped_reason=d["stopped_reason"],
                   thresholds=[float(x) for x in d.get("thresholds", [])])


def threshold(stop: StoppingConfig, n: int, d_psi_hat: float) -> float:
    if n < 1:
        raise ValueError("n must be positive")
    d = stop.d_psi_hat if stop.d_psi_hat is not None else d_psi_hat
    shrink = math.sqrt(max(1.0 - 4.0 * stop.delta**2, 0.0))
    return shrink * d + stop.epsilon + stop.c_sigma * n ** -0.25


def estimate_d_psi(distances) -> float:
    """Plug-in estimate of the largest directional distance: the best index seen."""
    if len(distances) == 0:
        raise ValueError("need at least one distance")
    return float(max(distances))


def sequential_recovery(data: DataMatrix, opt: OptimizerConfig, stop: StoppingConfig,
                        search: SearchConfig = SearchConfig()) -> RecoveryReport:
    """Extract orthonormal directions greedily until the stopping rule fires.

    Step j maximizes the index orthogonally to steps 1..j-1 (restart seed
    ``opt.seed + j``). The first direction that falls below the threshold is
    kept in the report for inspection but not counted in ``k_hat``.
    """
    if not data.whitened:
        warnings.warn("sequential_recovery expects whitened data", stacklevel=2)
    p = data.p
    max_k = p if stop.max_k is None else stop.max_k
    if max_k > p:
        raise ValueError(f"max_k={max_k} exceeds the dimension p={p}")
    frame = Frame.empty(p)
    distances, thresholds = [], []
    reason = "exhausted"
    while len(frame) < p:
        step_cfg = OptimizerConfig(**{**opt.__dict__, "seed": (opt.seed + len(frame)) % 2**64})
        u, value = maximize_on_sphere(data, frame, step_cfg,
                                      screen_iters=search.screen_iters,
                                      screen_keep=search.screen_keep)
        frame = frame.extended(u)
        distances.append(value)
        thresholds.append(threshold(stop, data.n, estimate_d_psi(distances)))
        if value < thresholds[-1]:
            reason = "threshold"
            break
        if len(frame) >= max_k:
            reason = "max_k" if max_k < p else "exhausted"
            break
    used = thresholds[-1]
    k_hat = 0
    while k_hat < len(distances) and distances[k_hat] >= used:
        k_hat += 1
    return RecoveryReport(frame=frame, distances=distances, k_hat=k_hat, threshold_used=used,
                          d_psi_estimate=estimate_d_psi(distances), stopped_reason=reason,
                          thresholds=thresholds)
