import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wpursuit.datagen import SignalLaw, example1_mixture, make_planted_model, sample, whiten
from wpursuit.pursuit import DataMatrix, Frame, OptimizerConfig, net_maximizer_oracle
from wpursuit.recovery import (RecoveryReport, SearchConfig, StoppingConfig, estimate_d_psi,
                               sequential_recovery, threshold)

MC = 1 << 16
SCREEN = SearchConfig(screen_iters=20, screen_keep=4)


def test_threshold_examples():
    assert threshold(StoppingConfig(delta=1e-12, epsilon=0.0), 10, 0.6) == pytest.approx(0.6)
    got = threshold(StoppingConfig(delta=0.25, epsilon=0.05, c_sigma=1.0), 10_000, 0.8)
    assert got == pytest.approx(math.sqrt(0.75) * 0.8 + 0.15, abs=1e-15)
    assert got == pytest.approx(0.842820323, abs=1e-9)
    edge = threshold(StoppingConfig(delta=0.5, epsilon=0.05, c_sigma=2.0), 16, 0.9)
    assert edge == pytest.approx(0.05 + 2.0 / 2.0)
    with pytest.raises(ValueError):
        threshold(StoppingConfig(), 0, 0.5)


def test_threshold_override():
    stop = StoppingConfig(delta=0.3, epsilon=0.0, d_psi_hat=0.5)
    assert threshold(stop, 100, 0.9) == pytest.approx(0.8 * 0.5)


@pytest.mark.parametrize("kw", [{"delta": 0.6}, {"delta": 0.0}, {"epsilon": -1},
                                {"c_sigma": -0.1}, {"d_psi_hat": -1}, {"max_k": 0}])
def test_stopping_config_validation(kw):
    with pytest.raises(ValueError):
        StoppingConfig(**kw)


def test_estimate_d_psi():
    assert estimate_d_psi([0.2, 0.6, 0.1]) == 0.6
    assert estimate_d_psi([0.4]) == 0.4
    with pytest.raises(ValueError):
        estimate_d_psi([])


def test_report_validation_and_round_trip():
    f = Frame(np.eye(3)[:2], 3)
    r = RecoveryReport(f, [0.5, 0.1], 1, 0.3, 0.5, "threshold", [0.4, 0.3])
    again = RecoveryReport.from_dict(r.to_dict())
    assert again.to_dict() == r.to_dict()
    with pytest.raises(ValueError):
        RecoveryReport(f, [0.5], 1, 0.3, 0.5, "threshold")
    with pytest.raises(ValueError):
        RecoveryReport(f, [0.5, 0.1], 3, 0.3, 0.5, "threshold")
    with pytest.raises(ValueError):
        RecoveryReport(f, [0.5, 0.1], 1, 0.3, 0.5, "bored")


def test_null_data_rejects_first_direction():
    d = whiten(DataMatrix(np.random.default_rng(0).standard_normal((2000, 10))))
    stop = StoppingConfig(delta=0.1, epsilon=0.3, d_psi_hat=0.0)
    r = sequential_recovery(d, OptimizerConfig(restarts=20), stop, SCREEN)
    assert r.k_hat == 0 and r.stopped_reason == "threshold"
    assert r.threshold_used == pytest.approx(0.3)


def test_planted_one_dimensional_signal():
    m = make_planted_model(20, SignalLaw.two_point(1), 1)
    d = whiten(sample(m, 5000, 2))
    r = sequential_recovery(d, OptimizerConfig(restarts=40), StoppingConfig(), SCREEN)
    assert r.k_hat == 1
    assert abs(r.frame.vectors[0] @ m.basis_u.vectors[0]) >= 0.95
    # plug-in estimate of the largest directional distance
    assert abs(r.d_psi_estimate - m.d_psi) < 0.05


def test_max_k_forces_stop():
    m = make_planted_model(10, SignalLaw.two_point(2), 1, mc_samples=MC)
    d = whiten(sample(m, 4000, 2))
    r = sequential_recovery(d, OptimizerConfig(restarts=20), StoppingConfig(max_k=1), SCREEN)
    assert r.stopped_reason == "max_k" and len(r.frame) == 1 and r.k_hat == 1
    with pytest.raises(ValueError):
        sequential_recovery(d, OptimizerConfig(), StoppingConfig(max_k=11))


def test_exhausted_when_everything_passes():
    d = whiten(DataMatrix(np.random.default_rng(3).standard_normal((300, 3))))
    r = sequential_recovery(d, OptimizerConfig(restarts=4), StoppingConfig(epsilon=0.0, delta=0.5))
    assert r.stopped_reason == "exhausted" and len(r.frame) == 3


def test_warns_on_unwhitened_data():
    d = DataMatrix(np.random.default_rng(0).standard_normal((100, 3)))
    with pytest.warns(UserWarning, match="whitened"):
        sequential_recovery(d, OptimizerConfig(restarts=2, max_iters=20), StoppingConfig())


@given(st.integers(0, 2**31), st.floats(0.0, 0.3), st.floats(0.05, 0.5))
def test_stopping_soundness(seed, eps, delta):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((200, 4))
    X[:, 0] = np.sign(X[:, 0]) * rng.uniform(0.2, 1.5)
    d = whiten(DataMatrix(X))
    r = sequential_recovery(d, OptimizerConfig(restarts=3, max_iters=50, seed=seed),
                            StoppingConfig(delta=delta, epsilon=eps))
    V = r.frame.vectors
    assert np.max(np.abs(V @ V.T - np.eye(len(V)))) <= 1e-8
    assert all(x >= r.threshold_used for x in r.distances[:r.k_hat])
    if r.stopped_reason == "threshold":
        assert r.distances[-1] < r.threshold_used
        assert r.k_hat <= len(r.distances) - 1
    assert len(r.thresholds) == len(r.distances)


@pytest.mark.parametrize("seed", range(3))
def test_second_direction_no_better_than_unconstrained(seed):
    m = make_planted_model(2, SignalLaw.uniform(1), seed)
    d = whiten(sample(m, 1000, seed))
    r = sequential_recovery(d, OptimizerConfig(restarts=8), StoppingConfig(epsilon=0.0, delta=0.5))
    best = net_maximizer_oracle(d, 1e-3)[1]
    assert r.distances[1] <= best + 1e-3
    assert r.distances[0] >= best - 1e-3


@pytest.mark.slow
def test_example1_mixture_two_directions():
    m = make_planted_model(10, example1_mixture(2, 8.0), 0, mc_samples=MC)
    stop = StoppingConfig(delta=0.48)
    hits = 0
    for s in range(20):
        d = whiten(sample(m, 5000, s))
        hits += sequential_recovery(d, OptimizerConfig(restarts=20, seed=s), stop, SCREEN).k_hat == 2
    assert hits >= 18
