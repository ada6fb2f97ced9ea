"""Tests of relative fit: RIFT, M-RIFT, the L2 variant and the separated-mixture test.

All tests split the sample once: the single Gaussian ``p1`` and the
two-component mixture ``p2`` are fitted on ``D1`` and compared on ``D2``.
P-values are conditional on ``D1``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binom, norm

from .dist import Region, as_mixture, cross_integral, l2_sq_integral_is, truncation_mass
from .errors import DegenerateStatisticError, NumericalError
from .fitters import EmOptions, em_fit, fit_single_gaussian
from .rng import as_stream


@dataclass
class TestOutcome:
    """Result of one hypothesis test.

    ``aux`` holds method-specific quantities such as ``gamma_hat``,
    ``tau_hat``, ``theta_hat``, ``a_hat``, ``n_test`` or ``B``.
    """

    method: str
    statistic: float
    p_value: float
    reject: bool
    alpha: float
    aux: dict = field(default_factory=dict)

    __test__ = False

    def to_dict(self):
        return {"method": self.method, "statistic": float(self.statistic), "p_value": float(self.p_value),
                "reject": bool(self.reject), "alpha": float(self.alpha),
                "aux": {k: float(v) for k, v in self.aux.items()}}


@dataclass(frozen=True)
class SplitHalves:
    """Random partition of ``range(n)`` into fitting and testing halves."""

    d1_indices: np.ndarray
    d2_indices: np.ndarray
    ratio: float


@dataclass(frozen=True)
class RiftOptions:
    """Options shared by the relative-fit tests.

    Parameters
    ----------
    delta_jitter : float
        Scale of the Gaussian jitter added to each per-point term.
    alpha : float
    split_ratio : float
        Fraction of points used for fitting.
    region : Region, optional
        Restrict the densities to a region (truncated test).
    trunc_mc : int
        Monte Carlo draws for region masses.
    em : EmOptions
        Settings for the mixture fit.
    """

    delta_jitter: float = 1e-5
    alpha: float = 0.05
    split_ratio: float = 0.5
    region: Region = None
    trunc_mc: int = 100_000
    em: EmOptions = EmOptions()

    def __post_init__(self):
        if not 0 <= self.alpha < 1:
            raise ValueError("alpha must lie in [0, 1)")
        if not 0 < self.split_ratio < 1:
            raise ValueError("split_ratio must lie in (0, 1)")
        if self.delta_jitter < 0:
            raise ValueError("delta_jitter must be non-negative")


def _z(alpha):
    return np.inf if alpha <= 0 else float(norm.isf(alpha))


def split_halves(n, ratio=0.5, rng=None):
    """Uniform random split with ``|D1| = round(ratio * n)`` rounding half up.

    Examples
    --------
    >>> s = split_halves(101, 0.5, rng=0)
    >>> len(s.d1_indices), len(s.d2_indices)
    (51, 50)
    """
    n = int(n)
    if n < 4:
        raise ValueError(f"need n >= 4 to split, got {n}")
    if not 0 < ratio < 1:
        raise ValueError("ratio must lie in (0, 1)")
    n1 = int(np.floor(ratio * n + 0.5))
    n1 = min(max(n1, 1), n - 1)
    perm = as_stream(rng).gen.permutation(n)
    return SplitHalves(np.sort(perm[:n1]), np.sort(perm[n1:]), float(ratio))


def _check(data, min_n=8):
    x = np.asarray(data, dtype=float)
    if x.ndim != 2:
        raise ValueError("data must be (n, d)")
    if x.shape[0] < min_n:
        raise ValueError(f"need at least {min_n} points, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise ValueError("data contain non-finite values")
    return x


def _truncated_logpdf(p, x, region, m, stream, key):
    lp = p.logpdf(x)
    if region is None or region.is_whole_space:
        return lp
    return lp - np.log(truncation_mass(p, region, m, stream.derive("mass", key)))


def relative_fit_stats(p1, p2, d2, region=None, delta=1e-5, rng=None, trunc_mc=100_000):
    """Per-point log-density ratios and their jittered mean and spread.

    ``R_i = log p2(X_i) - log p1(X_i)`` on the test half, with each density
    renormalized by its estimated mass in ``region`` when one is given.

    Returns
    -------
    gamma_hat, tau_hat : float
        Mean and standard deviation (divisor ``n``) of ``R_i + delta Z_i``.
    r_values : ndarray
        The unjittered ``R_i``.
    """
    x = np.asarray(d2, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need at least 2 test points")
    s = as_stream(rng)
    r = (_truncated_logpdf(p2, x, region, trunc_mc, s, 2)
         - _truncated_logpdf(p1, x, region, trunc_mc, s, 1))
    rt = r + delta * s.derive("jitter").gen.standard_normal(len(r)) if delta > 0 else r
    return float(rt.mean()), float(rt.std()), r


def _fit_pair(d1, c, opts, stream):
    p1 = fit_single_gaussian(d1, c)
    p2 = em_fit(d1, 2, c, opts.em, stream.derive("fit"))
    return p1, p2


def _split(data, opts, stream):
    x = _check(data)
    h = split_halves(x.shape[0], opts.split_ratio, stream.derive("split"))
    return x[h.d1_indices], x[h.d2_indices]


def rift_from_fits(d2, p1, p2, opts=None, rng=None):
    """RIFT decision for given fits: reject iff ``gamma > z_alpha tau / sqrt(n)``."""
    opts = opts or RiftOptions()
    g, t, r = relative_fit_stats(p1, p2, d2, opts.region, opts.delta_jitter, rng, opts.trunc_mc)
    n = len(r)
    if not (t > 0 and np.isfinite(t) and np.isfinite(g)):
        raise DegenerateStatisticError("RIFT spread estimate is zero or non-finite")
    zstat = np.sqrt(n) * g / t
    return TestOutcome("rift", g, float(norm.sf(zstat)), bool(g > _z(opts.alpha) * t / np.sqrt(n)),
                       opts.alpha, {"gamma_hat": g, "tau_hat": t, "z": float(zstat), "n_test": n})


def rift(data, c=None, opts=None, rng=None):
    """Relative information fit test of one Gaussian against a two-component mixture.

    Parameters
    ----------
    data : array_like, shape (n, d)
    c : FitConstraints, optional
    opts : RiftOptions, optional
    rng : RngStream, Generator or int, optional

    Returns
    -------
    TestOutcome
        ``statistic`` is the mean log-likelihood ratio on the test half.
    """
    opts = opts or RiftOptions()
    s = as_stream(rng)
    d1, d2 = _split(data, opts, s)
    p1, p2 = _fit_pair(d1, c, opts, s)
    return rift_from_fits(d2, p1, p2, opts, s)


def sign_test_pvalue(n_pos, n_test):
    """``P(Bin(n_test, 1/2) >= n_pos)``."""
    if n_test == 0:
        return 1.0
    return float(binom.sf(n_pos - 1, n_test, 0.5))


def mrift_from_fits(d2, p1, p2, opts=None, rng=None):
    """Sign test on the jittered log-density ratios; zeros are excluded."""
    opts = opts or RiftOptions()
    s = as_stream(rng)
    _, _, r = relative_fit_stats(p1, p2, d2, opts.region, 0.0, s, opts.trunc_mc)
    if opts.delta_jitter > 0:
        r = r + opts.delta_jitter * s.derive("jitter").gen.standard_normal(len(r))
    n_pos = int(np.sum(r > 0))
    n_test = int(np.sum(r != 0))
    p = sign_test_pvalue(n_pos, n_test)
    return TestOutcome("mrift", float(np.median(r)), p, bool(p < opts.alpha), opts.alpha,
                       {"n_pos": n_pos, "n_test": n_test})


def mrift(data, c=None, opts=None, rng=None):
    """Median relative fit test: exact one-sided sign test on the test half.

    Returns
    -------
    TestOutcome
        ``statistic`` is the median jittered log-density ratio.
    """
    opts = opts or RiftOptions()
    s = as_stream(rng)
    d1, d2 = _split(data, opts, s)
    p1, p2 = _fit_pair(d1, c, opts, s)
    return mrift_from_fits(d2, p1, p2, opts, s)


def _l2_terms(p, x, region, integration, draws, m, stream, key):
    """Return ``(int_S p^2 / P(S)^2, p(x)/P(S))``."""
    if region is None or region.is_whole_space:
        if integration == "closed_form":
            integral = cross_integral(p, p)
        elif integration == "importance":
            integral = l2_sq_integral_is(p, draws, stream.derive("is", key))[0]
        else:
            raise ValueError(f"unknown integration {integration!r}")
        return integral, p.pdf(x)
    y = p.sample(int(m), stream.derive("mass", key).gen)
    inside = region.contains(y)
    mass = inside.mean()
    if mass <= 0:
        raise NumericalError("estimated truncation mass is zero")
    integral = np.mean(np.where(inside, p.pdf(y), 0.0)) / mass ** 2
    return float(integral), p.pdf(x) / mass


def l2rift_from_fits(d2, p1, p2, opts=None, rng=None, integration="closed_form", is_draws=100_000):
    """L2 relative fit decision for given fits.

    ``theta = int p1^2 - int p2^2 - (2/n) sum U_i`` with
    ``U_i = p1(X_i) - p2(X_i)`` jittered.  The standard error of ``theta`` is
    ``2 a / sqrt(n)`` where ``a`` is the standard deviation of the jittered
    ``U_i``; reject iff ``theta > z_alpha * 2 a / sqrt(n)``.
    """
    opts = opts or RiftOptions()
    s = as_stream(rng)
    x = np.asarray(d2, dtype=float)
    n = x.shape[0]
    i1, f1 = _l2_terms(p1, x, opts.region, integration, is_draws, opts.trunc_mc, s, 1)
    i2, f2 = _l2_terms(p2, x, opts.region, integration, is_draws, opts.trunc_mc, s, 2)
    u = f1 - f2
    if opts.delta_jitter > 0:
        u = u + opts.delta_jitter * s.derive("jitter").gen.standard_normal(n)
    theta = i1 - i2 - 2.0 * u.mean()
    a = float(u.std())
    if not (a > 0 and np.isfinite(a) and np.isfinite(theta)):
        raise DegenerateStatisticError("L2 spread estimate is zero or non-finite")
    se = 2.0 * a / np.sqrt(n)
    return TestOutcome("l2rift", float(theta), float(norm.sf(theta / se)), bool(theta > _z(opts.alpha) * se),
                       opts.alpha, {"theta_hat": float(theta), "a_hat": a, "z": float(theta / se), "n_test": n})


def l2rift(data, c=None, opts=None, rng=None, integration="closed_form", is_draws=100_000):
    """L2 relative fit test.

    Parameters
    ----------
    integration : {"closed_form", "importance"}
        How ``int p^2`` is evaluated over the whole space; importance
        sampling uses a multivariate t proposal with 3 degrees of freedom.
    is_draws : int
        Importance-sampling draws.
    """
    opts = opts or RiftOptions()
    s = as_stream(rng)
    d1, d2 = _split(data, opts, s)
    p1, p2 = _fit_pair(d1, c, opts, s)
    return l2rift_from_fits(d2, p1, p2, opts, s, integration, is_draws)


def separate_mixture(p2, delta, m=100_000, rng=None, max_scale=1e6, tol=1e-3):
    """Push the component means apart until ``KL(q*, p2) >= delta``.

    ``q*`` is the moment-matched single Gaussian of the mixture.  Means are
    scaled about the mixture mean by a factor ``s >= 1`` found by bisection,
    with common random numbers across evaluations.

    Returns
    -------
    mixture : Mixture
    kl : float
        Estimated divergence at the returned mixture.
    scale : float
    """
    p2 = as_mixture(p2)
    if delta <= 0:
        return p2, float("nan"), 1.0
    z = as_stream(rng).gen.standard_normal((int(m), p2.dim))
    center = p2.weights @ p2.means

    def build(sc):
        return type(p2).from_arrays(p2.weights, center + sc * (p2.means - center), p2.covs)

    def kl(mix):
        q = mix.moment_matched()
        y = q.mean + z @ q.chol.T
        return float(np.mean(q.logpdf(y) - mix.logpdf(y)))

    k0 = kl(p2)
    if k0 >= delta:
        return p2, k0, 1.0
    if np.allclose(p2.means, center, rtol=0, atol=1e-12 * (1 + np.abs(center).max())):
        raise NumericalError("component means coincide; no separation direction")
    lo, hi = 1.0, 2.0
    while kl(build(hi)) < delta:
        lo, hi = hi, 2 * hi
        if hi > max_scale:
            raise NumericalError("separation constraint could not be met")
    while hi - lo > tol * lo:
        mid = 0.5 * (lo + hi)
        if kl(build(mid)) >= delta:
            hi = mid
        else:
            lo = mid
    out = build(hi)
    return out, kl(out), hi


def separated_mixture_test(data, c=None, Delta=0.05, opts=None, rng=None, kl_draws=100_000):
    """RIFT with the mixture fit held a KL distance ``Delta`` away from the Gaussian family.

    ``Delta = 0`` reproduces :func:`rift` exactly.
    """
    if Delta < 0:
        raise ValueError("Delta must be non-negative")
    opts = opts or RiftOptions()
    s = as_stream(rng)
    d1, d2 = _split(data, opts, s)
    p1, p2 = _fit_pair(d1, c, opts, s)
    p2, kl, scale = separate_mixture(p2, Delta, kl_draws, s.derive("separation"))
    out = rift_from_fits(d2, p1, p2, opts, s)
    out.method = "separated"
    out.aux.update({"Delta": float(Delta), "separation_scale": scale})
    if Delta > 0:
        out.aux["kl_to_gaussian"] = kl
    return out


__all__ = ["TestOutcome", "SplitHalves", "RiftOptions", "split_halves",
           "relative_fit_stats", "rift", "rift_from_fits", "mrift", "mrift_from_fits", "l2rift",
           "l2rift_from_fits", "separated_mixture_test", "separate_mixture", "sign_test_pvalue"]
