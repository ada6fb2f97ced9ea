import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import ortho_group

from relfit.dist import Gaussian, Mixture, mixture_logpdf
from relfit.errors import DegenerateStatisticError
from relfit.fitters import EmOptions, FitConstraints, em_fit, em_fit_result, fit_single_gaussian, loglik
from relfit.kmeans import _lloyd2, kmeans2, sigclust_statistic, symmetric_kmeans2
from relfit.rng import RngStream
from relfit.theory import kappa


def _two_blobs(n=1000, sep=10.0, seed=0):
    g = np.random.default_rng(seed)
    lab = g.random(n) < 0.5
    x = g.normal(size=(n, 2))
    x[:, 0] += np.where(lab, sep, -sep)
    return x, lab


def test_em_k1_equals_single_gaussian():
    x = np.random.default_rng(1).normal(size=(50, 3))
    m = em_fit(x, 1, rng=RngStream(0))
    g = fit_single_gaussian(x)
    assert np.array_equal(m.components[0].mean, g.mean)
    assert np.array_equal(m.components[0].cov, g.cov)


def test_em_recovers_separated_means():
    x, lab = _two_blobs()
    m = em_fit(x, 2, rng=RngStream(3))
    order = np.argsort(m.means[:, 0])
    oracle = np.array([x[~lab].mean(0), x[lab].mean(0)])
    assert np.abs(m.means[order] - oracle).max() < 0.3
    assert np.abs(m.means[order] - [[-10, 0], [10, 0]]).max() < 0.3


def test_em_loglik_monotone():
    g = np.random.default_rng(5)
    x = np.vstack([g.normal(size=(150, 2)), g.normal(size=(150, 2)) * [2, 0.5] + [2.5, 0]])
    res = em_fit_result(x, 3, opts=EmOptions(restarts=1), rng=RngStream(2))
    tr = np.array(res.trace)
    assert len(tr) > 3
    assert np.all(np.diff(tr) >= -1e-8 * np.abs(tr[1:]))


def test_em_respects_constraints():
    x, _ = _two_blobs(200)
    c = FitConstraints(eig_min=2.0, eig_max=3.0, mean_low=-5, mean_high=5)
    m = em_fit(x, 2, c, rng=RngStream(1))
    for comp in m.components:
        ev = np.linalg.eigvalsh(comp.cov)
        assert ev.min() >= 2 - 1e-9 and ev.max() <= 3 + 1e-9
        assert np.all(np.abs(comp.mean) <= 5 + 1e-12)


def test_em_errors():
    with pytest.raises(ValueError):
        em_fit(np.zeros((2, 2)), 3)
    with pytest.raises(ValueError):
        em_fit(np.zeros((0, 2)), 1)
    with pytest.raises(ValueError):
        EmOptions(tol=0)


def test_loglik_examples():
    g = Gaussian([0, 0], np.eye(2))
    m = Mixture([0.4, 0.6], [g, Gaussian([1, 1], 2 * np.eye(2))])
    x = np.random.default_rng(0).normal(size=(20, 2))
    assert loglik(m, x[:1]) == pytest.approx(mixture_logpdf(x[0], m), abs=1e-12)
    assert loglik(m, np.vstack([x, x])) == pytest.approx(2 * loglik(m, x), rel=1e-13)
    assert loglik(g, [[0.0, 0.0]]) == pytest.approx(-1.837877, abs=1e-6)


def test_kmeans2_small_examples():
    r = kmeans2([[-1.0], [1.0]], rng=RngStream(0))
    assert sorted(r.centers.ravel()) == [-1, 1] and r.within_ss == 0
    r = kmeans2([[0.0], [0.0], [3.0], [3.0]], rng=RngStream(0))
    assert sorted(r.centers.ravel()) == [0, 3] and r.within_ss == 0
    with pytest.raises(ValueError):
        kmeans2(np.ones((5, 2)))


def test_symmetric_kmeans2_small_examples():
    r = symmetric_kmeans2([[-1.0], [1.0]], rng=RngStream(0))
    assert abs(r.center[0]) == 1 and r.within_ss == 0
    with pytest.raises(ValueError):
        symmetric_kmeans2(np.full((4, 3), 2.0))


def test_kmeans2_large_null():
    x = np.random.default_rng(11).normal(size=(1_000_000, 2)) * np.sqrt([2.0, 1.0])
    w = kmeans2(x, restarts=2, rng=RngStream(1)).within_ss
    assert abs(w / (3 - 4 / np.pi) - 1) < 0.01


def test_symmetric_kmeans2_large_alternative():
    g = np.random.default_rng(12)
    x = g.normal(size=(1_000_000, 2))
    x[:, 0] += np.where(g.random(len(x)) < 0.5, -2.0, 2.0)
    w = symmetric_kmeans2(x, restarts=2, rng=RngStream(1)).within_ss
    assert kappa(4, 1) == pytest.approx(2.0170, abs=1e-4)
    assert abs(w / (6 - kappa(4, 1) ** 2) - 1) < 0.01


def test_sigclust_statistic_examples():
    assert sigclust_statistic([[-1.0], [1.0]], rng=RngStream(0)) == 0
    x = np.random.default_rng(13).normal(size=(1_000_000, 2)) * np.sqrt([2.0, 1.0])
    t = sigclust_statistic(x, restarts=2, rng=RngStream(2))
    assert abs(t / ((3 - 4 / np.pi) / 3) - 1) < 0.01
    with pytest.raises(DegenerateStatisticError):
        sigclust_statistic(np.ones((3, 2)))


def test_kmeans_result_consistency():
    x = np.random.default_rng(3).normal(size=(300, 3))
    r = kmeans2(x, rng=RngStream(4))
    w = ((x - r.centers[r.assignment]) ** 2).sum(1).mean()
    assert abs(w - r.within_ss) < 1e-9
    lab, c, w2, _ = _lloyd2(x[None], r.centers[None].copy(), max_iter=1)
    assert abs(w2[0] - r.within_ss) < 1e-12


def test_lloyd_objective_non_increasing():
    x = np.random.default_rng(8).normal(size=(400, 2)) * [3, 1]
    c0 = x[[0, 1]][None].copy()
    ws = [_lloyd2(x[None], c0.copy(), max_iter=k)[2][0] for k in range(1, 12)]
    assert np.all(np.diff(ws) <= 1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 60), st.integers(1, 4), st.integers(0, 10_000))
def test_symmetric_within_ss_dominates(n, d, seed):
    x = np.random.default_rng(seed).normal(size=(n, d))
    x[0] += 1.0
    sym = symmetric_kmeans2(x, rng=RngStream(seed)).within_ss
    km = kmeans2(x, rng=RngStream(seed)).within_ss
    assert sym >= km - 1e-9
    assert km >= 0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.booleans())
def test_sigclust_statistic_invariances(seed, symmetric):
    g = np.random.default_rng(seed)
    x = g.normal(size=(60, 3)) * [3, 1, 0.5]
    t = sigclust_statistic(x, symmetric, rng=RngStream(seed))
    assert 0 <= t <= 1
    shifted = sigclust_statistic(x + g.normal(size=3) * 100, symmetric, rng=RngStream(seed))
    assert shifted == pytest.approx(t, abs=1e-9)
    if not symmetric:
        q = ortho_group.rvs(3, random_state=seed)
        assert sigclust_statistic(x @ q.T, rng=RngStream(seed)) == pytest.approx(t, abs=1e-9)
