import warnings
from dataclasses import replace

import numpy as np
import pytest
from scipy.stats import kstest, multivariate_t

from relfit.dist import Gaussian, Mixture, Region, cross_integral, cross_integral_is
from relfit.errors import DegenerateStatisticError
from relfit.fitters import FitConstraints
from relfit.gof import mardia, nn_test, nn_w_values, sigclust_bootstrap
from relfit.rift import (RiftOptions, l2rift, l2rift_from_fits, mrift, mrift_from_fits, relative_fit_stats,
                         rift, rift_from_fits, separated_mixture_test, sign_test_pvalue, split_halves)
from relfit.rng import RngStream

SE200 = 3 * np.sqrt(0.05 * 0.95 / 200)


def _dup(p1):
    return Mixture([0.5, 0.5], [p1, p1])


def _blobs(n, sep, seed, d=2):
    g = np.random.default_rng(seed)
    x = g.normal(size=(n, d))
    x[:, 0] += np.where(g.random(n) < 0.5, -sep, sep)
    return x


def test_split_halves_examples():
    s = split_halves(100, 0.5, RngStream(0))
    assert len(s.d1_indices) == 50 and len(s.d2_indices) == 50
    s = split_halves(101, 0.5, RngStream(0))
    assert len(s.d1_indices) == 51 and len(s.d2_indices) == 50
    assert np.array_equal(np.sort(np.r_[s.d1_indices, s.d2_indices]), np.arange(101))
    t = split_halves(101, 0.5, RngStream(0))
    assert np.array_equal(s.d1_indices, t.d1_indices)
    with pytest.raises(ValueError):
        split_halves(3)


def test_relative_fit_stats_examples():
    p1 = Gaussian([0, 0], np.eye(2))
    x = np.random.default_rng(0).normal(size=(30, 2))
    g, t, r = relative_fit_stats(p1, _dup(p1), x, delta=0.0)
    assert g == 0 and t == 0 and np.all(r == 0)
    p2 = Mixture([1.0], [Gaussian([0, 0], np.eye(2) * np.exp(-1.0))])
    x0 = np.zeros((5, 2))
    g, t, r = relative_fit_stats(p1, p2, x0, delta=0.0)
    assert g == pytest.approx(1.0) and t == pytest.approx(0.0, abs=1e-12)
    q = Mixture([0.4, 0.6], [Gaussian([1, 0], np.eye(2)), Gaussian([-1, 0], np.eye(2))])
    a = relative_fit_stats(p1, q, x, None, 1e-5, RngStream(3))
    b = relative_fit_stats(p1, q, x, Region(), 1e-5, RngStream(3))
    assert a[0] == b[0] and a[1] == b[1]


def test_rift_degenerate_without_jitter():
    p1 = Gaussian([0, 0], np.eye(2))
    x = np.random.default_rng(0).normal(size=(30, 2))
    with pytest.raises(DegenerateStatisticError):
        rift_from_fits(x, p1, _dup(p1), RiftOptions(delta_jitter=0.0))


def test_rift_exact_null_pvalues_uniform():
    p1 = Gaussian([0, 0], np.eye(2))
    x = np.random.default_rng(1).normal(size=(100, 2))
    p = [rift_from_fits(x, p1, _dup(p1), rng=RngStream(s)).p_value for s in range(200)]
    assert kstest(p, "uniform").pvalue > 0.01


def test_rift_detects_clusters():
    out = rift(_blobs(400, 4, 0), rng=RngStream(0))
    assert out.reject and out.p_value < 1e-6
    assert set(out.aux) >= {"gamma_hat", "tau_hat"}
    with pytest.raises(ValueError):
        rift(np.zeros((5, 2)))


def test_sign_test_pvalues():
    assert sign_test_pvalue(10, 10) == pytest.approx(2 ** -10)
    assert sign_test_pvalue(0, 40) == 1.0
    assert sign_test_pvalue(32, 50) == pytest.approx(0.0325, abs=5e-4)
    assert sign_test_pvalue(0, 0) == 1.0


def test_mrift_pvalues_super_uniform_under_exact_null():
    p1 = Gaussian([0, 0], np.eye(2))
    x = np.random.default_rng(2).normal(size=(60, 2))
    p = np.sort([mrift_from_fits(x, p1, _dup(p1), rng=RngStream(s)).p_value for s in range(300)])
    band = 1.36 / np.sqrt(len(p))
    ecdf = np.arange(1, len(p) + 1) / len(p)
    assert np.all(ecdf[:-1] <= p[1:] + band)
    never = mrift_from_fits(x, p1, _dup(p1), RiftOptions(delta_jitter=0.0))
    assert never.p_value == 1.0 and not never.reject


def test_mrift_detects_clusters():
    assert mrift(_blobs(400, 4, 1), rng=RngStream(1)).reject


def test_l2_closed_form_and_importance():
    g = Gaussian([0], [[1]])
    assert cross_integral(g, g) == pytest.approx(0.282095, abs=1e-6)
    p = Mixture([0.3, 0.7], [Gaussian([0, 0], np.eye(2)), Gaussian([3, 0], np.eye(2))])
    x = _blobs(200, 1.5, 3)
    a = l2rift_from_fits(x, g2 := Gaussian([1.5, 0], np.diag([3.0, 1.0])), p, rng=RngStream(0))
    b = l2rift_from_fits(x, g2, p, rng=RngStream(0), integration="importance")
    se = np.hypot(cross_integral_is(g2, g2, 100_000, RngStream(0).derive("is", 1))[1],
                  cross_integral_is(p, p, 100_000, RngStream(0).derive("is", 2))[1])
    assert abs(a.statistic - b.statistic) < 3 * se


def test_l2rift_exact_null_calibration():
    p1 = Gaussian([0, 0], np.eye(2))
    x = np.random.default_rng(4).normal(size=(100, 2))
    rej = [l2rift_from_fits(x, p1, _dup(p1), rng=RngStream(s)).reject for s in range(200)]
    assert np.mean(rej) <= 0.05 + SE200


def test_l2rift_detects_clusters():
    assert l2rift(_blobs(400, 4, 2), rng=RngStream(2)).reject


def test_scale_invariance():
    x = _blobs(200, 2.5, 5)
    a = rift(x, rng=RngStream(7))
    b = rift(3.0 * x, rng=RngStream(7))
    assert abs(a.p_value - b.p_value) < 1e-6
    opts = RiftOptions(delta_jitter=0.0)
    a = l2rift(x, opts=opts, rng=RngStream(7))
    b = l2rift(3.0 * x, opts=opts, rng=RngStream(7))
    assert abs(a.p_value - b.p_value) < 1e-6


def test_scale_invariance_with_explicit_constraints():
    x = _blobs(200, 2.5, 6)
    c = FitConstraints(eig_min=0.1, eig_max=50, mean_low=-20, mean_high=20)
    c3 = FitConstraints(eig_min=0.9, eig_max=450, mean_low=-60, mean_high=60)
    a = rift(x, c, rng=RngStream(8))
    b = rift(3.0 * x, c3, rng=RngStream(8))
    assert abs(a.p_value - b.p_value) < 1e-6


def test_truncated_whole_space_equals_plain():
    x = _blobs(200, 2, 7)
    a = rift(x, rng=RngStream(9))
    b = rift(x, opts=RiftOptions(region=Region()), rng=RngStream(9))
    assert a.p_value == b.p_value and a.statistic == b.statistic


def test_separated_delta_zero_equals_rift():
    for seed in range(5):
        x = _blobs(200, 1.0, seed)
        a = rift(x, rng=RngStream(seed))
        b = separated_mixture_test(x, Delta=0.0, rng=RngStream(seed))
        assert a.reject == b.reject and a.p_value == b.p_value


def test_separated_far_mixture_power():
    rej = [separated_mixture_test(_blobs(400, 10, s), rng=RngStream(s), kl_draws=20_000).reject
           for s in range(20)]
    assert np.mean(rej) >= 0.9


@pytest.mark.slow
def test_separated_null_calibration():
    rej = []
    for s in range(200):
        x = np.random.default_rng(100 + s).normal(size=(2000, 2))
        rej.append(separated_mixture_test(x, rng=RngStream(s), kl_draws=20_000).reject)
    assert np.mean(rej) <= 0.05 + SE200


def test_sigclust_examples():
    out = sigclust_bootstrap(_blobs(100, 10, 0), B=200, rng=RngStream(0))
    assert out.p_value == pytest.approx(1 / 201)
    x = np.random.default_rng(1).normal(size=(60, 2))
    out = sigclust_bootstrap(x, B=50, rng=RngStream(1))
    assert 1 / 51 <= out.p_value <= 1
    with pytest.raises(ValueError):
        sigclust_bootstrap(x, B=10)


@pytest.mark.slow
def test_sigclust_null_calibration():
    rej = []
    for s in range(200):
        x = np.random.default_rng(200 + s).normal(size=(200, 2)) * np.sqrt([2.0, 1.0])
        rej.append(sigclust_bootstrap(x, B=200, rng=RngStream(s)).reject)
    assert abs(np.mean(rej) - 0.05) <= SE200


def test_sigclust_truncated_region():
    rule = Mixture([0.5, 0.5], [Gaussian([-3, 0], np.eye(2)), Gaussian([3, 0], np.eye(2))])
    region = Region([(rule, 1)])
    x = np.random.default_rng(2).normal(size=(80, 2)) + [3, 0]
    x = x[region.contains(x)]
    out = sigclust_bootstrap(x, B=30, region=region, rng=RngStream(2))
    assert out.method == "sigclust-trunc" and 0 < out.p_value <= 1
    far = Region([(rule, 0)])
    with pytest.raises(Exception):
        sigclust_bootstrap(np.random.default_rng(3).normal(size=(50, 2)) + [40, 0], B=20, region=far,
                           rng=RngStream(3))


def test_mardia_examples():
    b = [mardia(np.random.default_rng(s).normal(size=(2000, 2))).aux["b2d"] for s in range(50)]
    assert abs(np.mean(b) - 8) < 0.1
    z = [mardia(np.random.default_rng(s).normal(size=(100_000, 3))).statistic for s in range(100)]
    assert np.mean(np.abs(z) < 4) >= 0.99
    t = multivariate_t(np.zeros(2), np.eye(2), df=3)
    rej = [mardia(t.rvs(1000, random_state=s)).reject for s in range(50)]
    assert np.mean(rej) >= 0.9
    with pytest.raises(ValueError):
        mardia(np.zeros((2, 3)))


def test_nn_w_values_range_and_center():
    ws = []
    for s in range(50):
        x = np.random.default_rng(s).normal(size=(400, 2))
        w = nn_w_values(x[:200], x[200:])
        assert np.all((w > 0) & (w <= 1))
        ws.append(w.mean())
    assert abs(np.mean(ws) - 0.5) < 0.02


def test_nn_duplicate_points_warn():
    x = np.random.default_rng(0).normal(size=(40, 2))
    x[30] = x[31]
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        nn_w_values(x[:20], x[20:])
    assert any(issubclass(r.category, RuntimeWarning) for r in rec)


def test_nn_ks_null_calibration():
    rej = [nn_test(np.random.default_rng(300 + s).normal(size=(1000, 2)), "ks", rng=RngStream(s)).reject
           for s in range(200)]
    assert abs(np.mean(rej) - 0.05) <= SE200


def test_nn_detects_clusters():
    assert nn_test(_blobs(1000, 5, 0), "zstat", rng=RngStream(0)).reject
    assert nn_test(_blobs(1000, 5, 0), "ks", rng=RngStream(0)).reject


def test_null_calibration_rift_family():
    rej = {"rift": [], "l2rift": [], "mrift": []}
    opts = replace(RiftOptions(), trunc_mc=1000)
    for s in range(100):
        x = np.random.default_rng(400 + s).normal(size=(200, 2))
        rej["rift"].append(rift(x, opts=opts, rng=RngStream(s)).reject)
        rej["l2rift"].append(l2rift(x, opts=opts, rng=RngStream(s)).reject)
    se = 3 * np.sqrt(0.05 * 0.95 / 100)
    assert np.mean(rej["rift"]) <= 0.05 + se
    assert np.mean(rej["l2rift"]) <= 0.05 + se
