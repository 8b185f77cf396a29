import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate
from scipy.special import ndtri

from wpursuit.datagen import (PlantedModel, SignalLaw, example1_mixture, ground_truth_metrics,
                              make_planted_model, mixture_w2_to_std_normal,
                              random_orthonormal_basis, sample, whiten)
from wpursuit.pursuit import DataMatrix, Frame, objective
from wpursuit.transport import SortedProjection, w2_empirical_to_std_normal

# 30-digit values: two-point law and standardized uniform law against N(0, 1)
TWO_POINT_D = 0.635791536900475963106686277221
UNIFORM_D = 0.213518037618184177743049012376
MC = 1 << 16


def mc_distance(law, a, n=400_000, seed=99):
    """Monte Carlo oracle: empirical W2 of a large sample along ``a``."""
    x = law.sample(n, np.random.default_rng(seed)) @ np.asarray(a, dtype=float)
    return w2_empirical_to_std_normal(SortedProjection.from_unsorted(x)).distance


LAWS = [
    SignalLaw.two_point(2),
    SignalLaw.two_point(1, prob=0.2),
    SignalLaw.uniform(3),
    SignalLaw.gaussian_mixture([[-2.0], [1.0]], weights=[0.3, 0.7], scales=[0.5, 1.2]),
    SignalLaw.custom_quantile([0, 0.3, 1], [-1, 0, 4]),
    example1_mixture(2, 2.0),
]


@pytest.mark.parametrize("law", LAWS, ids=lambda l: l.kind)
def test_laws_are_standardized(law):
    x = law.sample(400_000, np.random.default_rng(0))
    assert x.shape[1] == law.k
    assert np.max(np.abs(x.mean(axis=0))) < 0.01
    assert np.max(np.abs(np.cov(x.T, bias=True).reshape(law.k, law.k) - np.eye(law.k))) < 0.01


@pytest.mark.parametrize("law", LAWS, ids=lambda l: l.kind)
def test_directional_w2_against_monte_carlo(law):
    a = np.random.default_rng(1).standard_normal(law.k)
    a /= np.linalg.norm(a)
    assert abs(law.directional_w2(a, MC) - mc_distance(law, a)) < 0.01


def test_closed_forms():
    assert abs(SignalLaw.two_point(1).directional_w2(np.array([1.0])) - TWO_POINT_D) < 1e-12
    assert abs(SignalLaw.uniform(1).directional_w2(np.array([1.0])) - UNIFORM_D) < 1e-6
    assert SignalLaw.standard_normal().directional_w2(np.array([1.0])) < 1e-6


def test_custom_quantile_against_quadrature():
    law = SignalLaw.custom_quantile([0, 0.2, 0.7, 1], [-3, -1, 0.5, 2])
    sq = integrate.quad(lambda t: (law.quantile(t) - ndtri(t)) ** 2, 0, 1, limit=500,
                        points=[0.2, 0.7])[0]
    assert abs(law.directional_w2(np.array([1.0])) - math.sqrt(sq)) < 1e-6


def test_mixture_w2_quadrature_matches_gaussian_closed_form():
    assert abs(mixture_w2_to_std_normal([1.0], [2.0], [1.0]) - math.sqrt(2.0)) < 1e-7


@pytest.mark.parametrize("bad", [
    lambda: SignalLaw.custom_quantile([0, 1], [1, 1]),
    lambda: SignalLaw.gaussian_mixture([[0.0]], scales=[0.0]),
    lambda: SignalLaw.two_point(1, prob=1.0),
    lambda: SignalLaw("cauchy", 1),
    lambda: SignalLaw.two_point(0),
])
def test_degenerate_laws_rejected(bad):
    with pytest.raises(ValueError):
        bad()


def test_law_round_trip():
    for law in LAWS:
        again = SignalLaw.from_dict(law.to_dict())
        a = np.ones(law.k) / math.sqrt(law.k)
        assert again.directional_w2(a, MC) == law.directional_w2(a, MC)


def test_random_basis_orthogonal():
    Q = random_orthonormal_basis(7, np.random.default_rng(0))
    assert np.allclose(Q.T @ Q, np.eye(7))


# -- planted models ------------------------------------------------------------
def test_ground_truth_two_point_k1():
    m = make_planted_model(4, SignalLaw.two_point(1), 0)
    assert abs(m.d_psi - TWO_POINT_D) < 1e-9 and abs(m.d_min_u - TWO_POINT_D) < 1e-9
    assert m.d_w == 0 and m.snr == math.inf
    assert m.kappa1 > m.kappa2


def test_ground_truth_null():
    m = make_planted_model(10, None, 0)
    assert (m.k, m.d_psi, m.snr) == (0, 0.0, 0.0)
    assert len(m.basis_w) == 10


def test_isotropic_signal():
    law = SignalLaw.gaussian_mixture([[0.0, 0.0], [0.0, 0.0]], scales=[0.5, 1.5])
    m = make_planted_model(5, law, 0, mc_samples=MC)
    assert abs(m.d_psi - m.d_min_u) < 1e-3


def test_two_point_k2_ground_truth():
    m = make_planted_model(50, SignalLaw.two_point(2), 0, mc_samples=MC)
    assert abs(m.d_psi - TWO_POINT_D) < 1e-6
    # exhaustive angle scan as the oracle for the in-plane extremes
    theta = np.linspace(0, math.pi / 2, 2001)
    vals = [SignalLaw.two_point(2).directional_w2(np.array([math.cos(t), math.sin(t)]), MC)
            for t in theta]
    assert abs(m.d_min_u - min(vals)) < 1e-5
    assert abs(m.d_psi - max(vals)) < 1e-9
    assert m.snr == pytest.approx(math.sqrt(m.d_psi ** 2 / (m.d_psi ** 2 - m.d_min_u ** 2)))


def test_ground_truth_stable_under_resolution():
    m = make_planted_model(6, example1_mixture(2, 1.5), 0, mc_samples=MC)
    fine = ground_truth_metrics(m, mc_samples=4 * MC)
    for a, b in zip((m.d_psi, m.d_min_u, m.d_w), fine[:3]):
        assert abs(a - b) < 1e-3


def test_net_method_limits():
    with pytest.raises(ValueError):
        make_planted_model(6, SignalLaw.two_point(4), 0, method="net")
    m = make_planted_model(6, SignalLaw.two_point(4), 0, mc_samples=MC)
    assert m.d_min_u < m.d_psi


def test_complement_shift_separation():
    m = make_planted_model(6, SignalLaw.two_point(1), 0, complement_shift=0.3)
    assert 0 < m.d_w < m.kappa2 < m.kappa1 < m.d_min_u
    with pytest.raises(ValueError):
        make_planted_model(6, SignalLaw.uniform(1), 0, complement_shift=0.9)


def test_model_validation_and_round_trip():
    m = make_planted_model(5, SignalLaw.two_point(2), 3, mc_samples=MC)
    again = PlantedModel.from_dict(m.to_dict())
    assert np.array_equal(again.basis_u.vectors, m.basis_u.vectors) and again.snr == m.snr
    with pytest.raises(ValueError):
        PlantedModel(p=3, k=1, signal=None, basis_u=Frame(np.eye(3)[:1], 3),
                     basis_w=Frame(np.eye(3)[1:], 3), d_psi=0, d_min_u=0, d_w=0, snr=0,
                     kappa1=0, kappa2=0)


# -- sampling ----------------------------------------------------------------
def test_sample_deterministic_and_validated():
    m = make_planted_model(6, SignalLaw.two_point(1), 0)
    assert np.array_equal(sample(m, 50, 7).rows, sample(m, 50, 7).rows)
    assert not np.array_equal(sample(m, 50, 7).rows, sample(m, 50, 8).rows)
    with pytest.raises(ValueError):
        sample(m, 0, 1)


def test_null_model_projections_small():
    m = make_planted_model(10, None, 1)
    d = sample(m, 10_000, 2)
    U = np.random.default_rng(0).standard_normal((200, 10))
    for u in U / np.linalg.norm(U, axis=1, keepdims=True):
        assert objective(d, u) < 0.15


def test_two_point_p1_sample():
    m = make_planted_model(1, SignalLaw.two_point(1), 0)
    d = sample(m, 20_000, 1)
    assert set(np.round(np.abs(d.rows[:, 0]), 12)) == {1.0}
    assert abs(objective(d, [1.0]) - TWO_POINT_D) < 0.01


def test_example1_gaussian_off_the_means():
    law = example1_mixture(2, 3.0)
    m = make_planted_model(6, law, 0, mc_samples=MC)
    d = sample(m, 20_000, 3)
    for w in m.basis_w.vectors:
        assert objective(d, w) < 0.05
    assert m.d_min_u > 0.1


def test_independence_of_blocks():
    m = make_planted_model(8, SignalLaw.two_point(2), 4)
    X = sample(m, 10_000, 5).rows
    s, g = X @ m.basis_u.vectors.T, X @ m.basis_w.vectors.T
    corr = np.corrcoef(np.hstack([s, g]).T)[:2, 2:]
    assert np.max(np.abs(corr)) < 0.05


@pytest.mark.parametrize("law", [SignalLaw.two_point(2), example1_mixture(3, 1.0), None])
def test_covariance_envelope(law):
    p, n = 40, 4000
    m = make_planted_model(p, law, 0, mc_samples=MC)
    X = sample(m, n, 1).rows
    gap = np.linalg.norm(X.T @ X / n - np.eye(p), 2)
    assert gap <= 10 * (math.sqrt(p / n) + p / n)


def test_separation_witness_by_monte_carlo():
    m = make_planted_model(6, example1_mixture(2, 2.0), 2, mc_samples=MC)
    d = sample(m, 200_000, 3)
    rng = np.random.default_rng(4)
    inside = [objective(d, unit_in(m.basis_u, rng)) for _ in range(30)]
    outside = [objective(d, unit_in(m.basis_w, rng)) for _ in range(30)]
    assert min(inside) > max(outside)


def unit_in(frame, rng):
    v = rng.standard_normal(len(frame)) @ frame.vectors
    return v / np.linalg.norm(v)


# -- whitening ---------------------------------------------------------------
@given(st.integers(0, 2**31), st.floats(0.1, 10), st.floats(-10, 10))
def test_whiten_exact_moments(seed, scale, shift):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((4, 4)) + 2 * np.eye(4)
    X = (rng.standard_normal((200, 4)) @ A) * scale + shift
    w = whiten(DataMatrix(X))
    assert w.whitened
    assert np.max(np.abs(w.rows.mean(axis=0))) < 1e-10
    assert np.max(np.abs(w.rows.T @ w.rows / 200 - np.eye(4))) < 1e-8


def test_whiten_examples():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((5000, 3))
    w = whiten(DataMatrix(X)).rows
    # symmetric whitening of nearly white data moves it little
    assert np.max(np.abs(w - (X - X.mean(0)))) < 0.2
    w3 = whiten(DataMatrix(3 * X)).rows
    assert np.allclose(w3, w, atol=1e-10)
    shifted = whiten(DataMatrix(X + 5.0)).rows
    assert np.max(np.abs(shifted.mean(axis=0))) < 1e-12


def test_whiten_rejects_singular():
    with pytest.raises(ValueError):
        whiten(DataMatrix(np.random.default_rng(0).standard_normal((3, 5))))
    X = np.random.default_rng(0).standard_normal((100, 2))
    with pytest.raises(ValueError):
        whiten(DataMatrix(np.column_stack([X, X[:, 0]])))
