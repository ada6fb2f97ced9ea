"""Single-Gaussian goodness-of-fit tests: SigClust bootstrap, Mardia kurtosis, nearest-neighbor."""

import warnings

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import gammaln
from scipy.stats import kstest, norm

from .errors import DegenerateStatisticError, NumericalError
from .fitters import FitConstraints, fit_single_gaussian
from .kmeans import kmeans2_batch, symmetric_kmeans2_batch
from .rift import TestOutcome, _check, split_halves
from .rng import as_stream

_CHUNK = 4_000_000


def _batch_stat(x, symmetric, restarts, g):
    xc = x - x.mean(axis=1, keepdims=True)
    total = (xc ** 2).sum(2).mean(1)
    if symmetric:
        w = symmetric_kmeans2_batch(xc, restarts, g)[1]
    else:
        w = kmeans2_batch(x, restarts, g)[2]
    return w / total


def sample_in_region(gauss, n, region, rng, reps=1, min_accept=1e-4):
    """Draw ``reps * n`` points from ``gauss`` restricted to ``region`` by rejection.

    Raises ``NumericalError`` if the acceptance rate falls below ``min_accept``.
    """
    g = as_stream(rng).gen
    need = int(n) * int(reps)
    if region is None or region.is_whole_space:
        return gauss.sample(need, g).reshape(reps, n, gauss.dim)
    pilot = gauss.sample(min(max(need, 10_000), 200_000), g)
    keep = [pilot[region.contains(pilot)]]
    acc = len(keep[0]) / len(pilot)
    if acc < min_accept:
        raise NumericalError(f"region acceptance rate {acc:.2e} is below {min_accept:g}")
    got = len(keep[0])
    while got < need:
        y = gauss.sample(int(1.2 * (need - got) / acc) + 100, g)
        y = y[region.contains(y)]
        keep.append(y)
        got += len(y)
    return np.concatenate(keep)[:need].reshape(reps, n, gauss.dim)


def sigclust_bootstrap(data, B=1000, alpha=0.05, symmetric=False, region=None, rng=None, restarts=5):
    """SigClust parametric bootstrap test of a single Gaussian.

    The cluster index ``T = W_n / total SS`` of the data is compared with
    ``B`` indices from datasets simulated from the fitted Gaussian
    (restricted to ``region`` when given).  Small ``T`` is evidence of
    clustering; the p-value is ``(1 + #{T* < T}) / (B + 1)``.

    Parameters
    ----------
    data : array_like, shape (n, d)
    B : int
        Bootstrap replicates, at least 19.
    alpha : float
    symmetric : bool
        Use symmetric two-means about the sample mean.
    region : Region, optional
    rng : RngStream, Generator or int, optional
    restarts : int
        Random two-means starts per dataset.

    Returns
    -------
    TestOutcome
    """
    x = _check(data, 4)
    B = int(B)
    if B < 19:
        raise ValueError("B must be at least 19")
    s = as_stream(rng)
    n, d = x.shape
    t_obs = float(_batch_stat(x[None], symmetric, restarts, s.derive("observed").gen)[0])
    if not np.isfinite(t_obs):
        raise DegenerateStatisticError("data have zero total variance")
    gauss = fit_single_gaussian(x, FitConstraints())
    sims = s.derive("bootstrap")
    per = max(1, _CHUNK // (n * d))
    t_star = []
    for start in range(0, B, per):
        m = min(per, B - start)
        xs = sample_in_region(gauss, n, region, sims.derive("draw", start), reps=m)
        t_star.append(_batch_stat(xs, symmetric, restarts, sims.derive("kmeans", start).gen))
    t_star = np.concatenate(t_star)
    p = (1.0 + np.sum(t_star < t_obs)) / (B + 1.0)
    name = "sigclust" if region is None or region.is_whole_space else "sigclust-trunc"
    return TestOutcome(name, t_obs, float(p), bool(p < alpha), alpha,
                       {"B": B, "t_star_mean": float(t_star.mean()), "t_star_sd": float(t_star.std())})


def mardia(data, alpha=0.05):
    """Mardia's multivariate kurtosis test.

    ``b = (1/n) sum_i ((x_i - xbar)' S^-1 (x_i - xbar))^2`` with ``S`` the
    covariance with divisor ``n``; under normality
    ``z = sqrt(n) (b - d(d+2)) / sqrt(8 d (d+2))`` is asymptotically standard
    normal.  Two-sided.

    Returns
    -------
    TestOutcome
        ``statistic`` is ``z``; ``aux["b2d"]`` holds the kurtosis.
    """
    x = _check(data, 2)
    n, d = x.shape
    if n <= d:
        raise ValueError("need n > d")
    xc = x - x.mean(axis=0)
    s = xc.T @ xc / n
    try:
        chol = np.linalg.cholesky(s)
    except np.linalg.LinAlgError:
        raise NumericalError("sample covariance is singular") from None
    if np.min(np.diag(chol)) <= 1e-12 * np.sqrt(np.max(np.diag(s))):
        raise NumericalError("sample covariance is singular")
    y = np.linalg.solve(chol, xc.T)
    b = float(np.mean(np.sum(y * y, axis=0) ** 2))
    z = np.sqrt(n) * (b - d * (d + 2)) / np.sqrt(8.0 * d * (d + 2))
    p = float(2 * norm.sf(abs(z)))
    return TestOutcome("mardia", float(z), p, bool(p < alpha), alpha, {"b2d": b, "d": d})


def nn_w_values(d1, d2):
    """Nearest-neighbor probability transforms ``W_i = exp(-n p0(X_i) K_d R_i^d)`` on ``d2``."""
    gauss = fit_single_gaussian(d1, FitConstraints())
    n, d = d2.shape
    dist = cKDTree(d2).query(d2, k=2)[0][:, 1]
    if np.any(dist <= 0):
        warnings.warn("duplicate points; zero nearest-neighbor distances set to 1e-12", RuntimeWarning)
        dist = np.maximum(dist, 1e-12)
    log_kd = 0.5 * d * np.log(np.pi) - gammaln(0.5 * d + 1)
    log_dens = gauss.logpdf(d2) + log_kd + d * np.log(dist)
    return np.exp(-n * np.exp(log_dens))


def nn_test(data, variant="ks", alpha=0.05, split_ratio=0.5, rng=None):
    """Nearest-neighbor goodness-of-fit test of a single Gaussian.

    A Gaussian is fitted on one half; on the other half the transforms
    ``W_i`` are approximately uniform under the null.

    Parameters
    ----------
    variant : {"ks", "zstat"}
        ``ks`` applies a Kolmogorov-Smirnov test of the ``W_i`` against
        U(0, 1); ``zstat`` uses ``Z = sum(W_i - 1/2) / (sd(W) sqrt(n))``,
        two-sided.

    Returns
    -------
    TestOutcome
    """
    x = _check(data, 4)
    h = split_halves(x.shape[0], split_ratio, as_stream(rng).derive("split"))
    return nn_test_halves(x[h.d1_indices], x[h.d2_indices], variant, alpha)


def nn_test_halves(d1, d2, variant="ks", alpha=0.05):
    """Nearest-neighbor test with the Gaussian fitted on ``d1`` and tested on ``d2``."""
    d1 = np.asarray(d1, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    if len(d2) < 10:
        raise ValueError("need at least 10 test points")
    w = nn_w_values(d1, d2)
    if variant == "ks":
        res = kstest(w, "uniform")
        return TestOutcome("nn-ks", float(res.statistic), float(res.pvalue), bool(res.pvalue < alpha), alpha,
                           {"w_mean": float(w.mean()), "n_test": len(w)})
    if variant == "zstat":
        sd = w.std(ddof=1)
        if not sd > 0:
            raise DegenerateStatisticError("W values are constant")
        z = float(np.sum(w - 0.5) / (sd * np.sqrt(len(w))))
        p = float(2 * norm.sf(abs(z)))
        return TestOutcome("nn-z", z, p, bool(p < alpha), alpha, {"w_mean": float(w.mean()), "n_test": len(w)})
    raise ValueError(f"unknown variant {variant!r}")
