"""Dispatch from method tags to tests and tree split rules."""

from dataclasses import replace

import numpy as np

from .dist import Mixture
from .fitters import em_fit, fit_single_gaussian
from .gof import mardia, nn_test, nn_test_halves, sigclust_bootstrap
from .kmeans import kmeans2
from .rift import (RiftOptions, l2rift, l2rift_from_fits, mrift, mrift_from_fits, rift,
                   rift_from_fits)
from .rng import as_stream

METHODS = ("rift", "mrift", "l2rift", "sigclust", "sigclust-trunc", "mardia", "nn-ks", "nn-z")
RIFT_FAMILY = ("rift", "mrift", "l2rift")
SIGCLUST_FAMILY = ("sigclust", "sigclust-trunc")


def check_method(method):
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    return method


def _opts(opts, alpha, region=None):
    return replace(opts or RiftOptions(), alpha=alpha, region=region)


def run_test(method, data, alpha=0.05, rng=None, c=None, opts=None, B=1000):
    """Run one test of a single Gaussian against clustering on the whole sample.

    Returns
    -------
    TestOutcome
    """
    check_method(method)
    s = as_stream(rng)
    if method in RIFT_FAMILY:
        return {"rift": rift, "mrift": mrift, "l2rift": l2rift}[method](data, c, _opts(opts, alpha), s)
    if method in SIGCLUST_FAMILY:
        out = sigclust_bootstrap(data, B, alpha, rng=s)
        out.method = method
        return out
    if method == "mardia":
        return mardia(data, alpha)
    split_ratio = (opts or RiftOptions()).split_ratio
    return nn_test(data, "ks" if method == "nn-ks" else "zstat", alpha, split_ratio, s)


def kmeans_rule(d1, rng=None):
    """Two-means partition encoded as an equal-weight, equal-isotropic-covariance mixture.

    Its posterior comparison is exactly the nearest-center rule.
    """
    res = kmeans2(d1, 10, rng)
    d = d1.shape[1]
    v = max(res.within_ss / d, 1e-12)
    return Mixture.from_arrays([0.5, 0.5], res.centers, [v * np.eye(d)] * 2)


def split_rule(method, d1, c=None, opts=None, rng=None):
    """Two-component rule used to split a node: 2-means for SigClust, a 2-GMM otherwise."""
    if method in SIGCLUST_FAMILY:
        return kmeans_rule(d1, rng)
    return em_fit(d1, 2, c, (opts or RiftOptions()).em, rng)


def node_test(method, d1, d2, rule, level, region=None, c=None, opts=None, B=1000, rng=None):
    """Test a node using its fitting points ``d1``, test points ``d2`` and split rule.

    ``region`` is the node's region; RIFT-family tests renormalize their
    densities over it and the truncated SigClust simulates inside it.
    """
    check_method(method)
    s = as_stream(rng)
    if method in RIFT_FAMILY:
        p1 = fit_single_gaussian(d1, c)
        f = {"rift": rift_from_fits, "mrift": mrift_from_fits, "l2rift": l2rift_from_fits}[method]
        return f(d2, p1, rule, _opts(opts, level, region), s)
    if method in SIGCLUST_FAMILY:
        reg = region if method == "sigclust-trunc" else None
        out = sigclust_bootstrap(d2, B, level, region=reg, rng=s)
        out.method = method
        return out
    if method == "mardia":
        return mardia(d2, level)
    return nn_test_halves(d1, d2, "ks" if method == "nn-ks" else "zstat", level)
