"""Closed-form asymptotics of the two-means cluster index.

Null model: ``X ~ N(0, diag(s_1, ..., s_d))`` with ``s_1`` strictly largest.
Alternative model: coordinate 1 is the symmetric mixture
``N(a/2, s_1)/2 + N(-a/2, s_1)/2`` and coordinates ``j >= 2`` are
``N(0, s_j)``, independent.  Here ``s_j`` are variances.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.stats import norm

from .kmeans import symmetric_kmeans2_batch
from .rng import as_stream

FIRST, SECOND, INDETERMINATE = "FirstCoord", "SecondCoord", "Indeterminate"


@dataclass(frozen=True)
class TheoryParams:
    """Variances ``sigmas_sq``, mean separation ``a``, sample size ``n`` and level ``alpha``."""

    sigmas_sq: tuple
    a: float = 0.0
    n: int = 2000
    alpha: float = 0.05

    def __post_init__(self):
        s = np.atleast_1d(np.asarray(self.sigmas_sq, dtype=float))
        if s.ndim != 1 or s.size < 1 or np.any(s <= 0) or not np.all(np.isfinite(s)):
            raise ValueError("variances must be a non-empty vector of positive reals")
        if self.a < 0:
            raise ValueError("a must be non-negative")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        object.__setattr__(self, "sigmas_sq", tuple(float(v) for v in s))

    @property
    def s(self):
        return np.asarray(self.sigmas_sq)


@dataclass
class RegimeResult:
    """Optimal symmetric split under the alternative.

    ``w1`` and ``tau1_sq`` are the limiting mean and ``n``-scaled variance
    of ``W_n``.  For an Indeterminate regime they belong to the better of the
    two candidate splits and ``candidates`` holds both.
    """

    regime: str
    w1: float
    tau1_sq: float
    thresholds: tuple = ()
    candidates: dict = field(default_factory=dict)


def null_moments(sigmas_sq):
    """Limiting mean and variance of two-means ``W_n`` for a diagonal Gaussian.

    ``W = sum s_i - 2 s_1/pi`` and ``tau^2 = 2 sum s_i^2 - 16 s_1^2/pi^2``.

    Examples
    --------
    >>> round(null_moments([2.0, 1.0])[0], 5)
    1.72676
    """
    s = np.atleast_1d(np.asarray(sigmas_sq, dtype=float))
    if np.any(s <= 0):
        raise ValueError("variances must be positive")
    if s.size > 1 and not s[0] > s[1:].max():
        raise ValueError("the first variance must be strictly largest")
    return float(s.sum() - 2 * s[0] / np.pi), float(2 * (s ** 2).sum() - 16 * s[0] ** 2 / np.pi ** 2)


def kappa(a, sigma1_sq):
    """``E[Y | Y > 0]`` for ``Y ~ N(a/2, s)/2 + N(-a/2, s)/2``.

    Equals ``(a/2)(2 Phi(u) - 1) + sqrt(2/pi) sigma exp(-u^2/2)`` with
    ``u = a / (2 sigma)``.
    """
    if sigma1_sq <= 0:
        raise ValueError("sigma1_sq must be positive")
    sd = np.sqrt(sigma1_sq)
    u = a / (2 * sd)
    return float(a / 2 * (2 * norm.cdf(u) - 1) + np.sqrt(2 / np.pi) * sd * np.exp(-u * u / 2))


def _folded_var_sq(a, var, center):
    """``var((Y - center)^2)`` for ``Y = |X|``, ``X ~ N(a/2, var)/2 + N(-a/2, var)/2``, by quadrature."""
    sd = np.sqrt(var)
    m = a / 2.0

    def f(y):
        return (norm.pdf(y, m, sd) + norm.pdf(y, -m, sd))

    upper = m + 12 * sd
    e2 = quad(lambda y: f(y) * (y - center) ** 2, 0, upper, epsabs=1e-10, limit=200)[0]
    e4 = quad(lambda y: f(y) * (y - center) ** 4, 0, upper, epsabs=1e-10, limit=200)[0]
    return e4 - e2 ** 2


def _check_alt(params):
    s = params.s
    if s.size < 2:
        raise ValueError("the alternative needs d >= 2")
    if s.size > 2 and not min(s[0], s[1]) > s[2:].max():
        raise ValueError("the first two variances must exceed all others")
    return s


def thresholds(params):
    """The two variance thresholds above which coordinate 2 is the optimal split."""
    s1, a = params.s[0], params.a
    t1 = (2 * s1 ** 2 + a ** 4 / 16 + a ** 2 / 2 * np.sqrt(s1 ** 2 + a ** 4 / 64)) / (2 * s1)
    t2 = np.pi / 2 * kappa(a, s1) ** 2
    return float(t1), float(t2)


def _first_split(params):
    s, a = params.s, params.a
    k = kappa(a, s[0])
    w = s.sum() + a ** 2 / 4 - k ** 2
    tau = 2 * (s[1:] ** 2).sum() + _folded_var_sq(a, s[0], k)
    return float(w), float(tau)


def _second_split(params):
    s, a = params.s, params.a
    c = np.sqrt(2 / np.pi * s[1])
    w = s.sum() + a ** 2 / 4 - 2 / np.pi * s[1]
    tau = 2 * (s[0] ** 2 + (s[2:] ** 2).sum()) + s[0] * a ** 2 + _folded_var_sq(0.0, s[1], c)
    return float(w), float(tau)


def alt_split(params):
    """Classify the optimal symmetric split and return its limiting moments.

    FirstCoord iff ``s_2 < s_1 + a^2/4``; SecondCoord iff ``s_2`` exceeds both
    thresholds; otherwise (including equality) Indeterminate.

    Returns
    -------
    RegimeResult
    """
    s = _check_alt(params)
    th = thresholds(params)
    first, second = _first_split(params), _second_split(params)
    cands = {FIRST: first, SECOND: second}
    if s[1] < s[0] + params.a ** 2 / 4:
        return RegimeResult(FIRST, *first, th, cands)
    if s[1] > max(th):
        return RegimeResult(SECOND, *second, th, cands)
    best = first if first[0] <= second[0] else second
    return RegimeResult(INDETERMINATE, *best, th, cands)


def null_moments_shifted(params):
    """Moments of ``W_n`` under the matched null ``N(0, diag(s_1 + a^2/4, s_2, ...))``.

    Returns
    -------
    w0, tau0_sq : float
    """
    s, a = params.s, params.a
    top = s[0] + a ** 2 / 4
    rest = s[1:]
    big = max(top, rest.max()) if rest.size else top
    w0 = s.sum() + a ** 2 / 4 - 2 / np.pi * big
    tau0 = 2 * (rest ** 2).sum() + 2 * top ** 2 - 16 / np.pi ** 2 * big ** 2
    return float(w0), float(tau0)


def asymptotic_power(params):
    """Limiting power ``Phi(tau0 Phi^-1(alpha)/tau1 + sqrt(n)(W0 - W1)/tau1)`` of SigClust.

    Raises ``ValueError`` in the Indeterminate regime, where the optimal
    split is not identified.
    """
    res = alt_split(params)
    if res.regime == INDETERMINATE:
        raise ValueError(
            f"variance s_2={params.s[1]:g} lies in the indeterminate band "
            f"[{params.s[0] + params.a ** 2 / 4:g}, {max(res.thresholds):g}]; the optimal split is not identified")
    w0, tau0 = null_moments_shifted(params)
    t0, t1 = np.sqrt(tau0), np.sqrt(res.tau1_sq)
    return float(norm.cdf(t0 * norm.ppf(params.alpha) / t1 + np.sqrt(params.n) * (w0 - res.w1) / t1))


def kappa_gap_bound(a, sigma1_sq):
    """``kappa^2 - (2/pi)(s_1 + a^2/4)`` and its lower bound.

    The bound is ``a^4 / (240 s_1 pi)`` for ``a <= 4 sigma_1`` and ``a^2/40`` beyond.

    Returns
    -------
    gap, bound : float
    """
    gap = kappa(a, sigma1_sq) ** 2 - 2 / np.pi * (sigma1_sq + a ** 2 / 4)
    bound = a ** 4 / (240 * sigma1_sq * np.pi) if a <= 4 * np.sqrt(sigma1_sq) else a ** 2 / 40
    return float(gap), float(bound)


def sample_alternative(params, n, reps=1, rng=None):
    """Draw ``reps`` datasets of size ``n`` from the alternative model, shape (reps, n, d)."""
    g = as_stream(rng).gen
    s = params.s
    x = g.standard_normal((reps, n, s.size)) * np.sqrt(s)
    x[:, :, 0] += np.where(g.random((reps, n)) < 0.5, params.a / 2, -params.a / 2)
    return x


def matched_null_variances(params):
    s = params.s.copy()
    s[0] += params.a ** 2 / 4
    return s


def _sym_w(x, g, restarts, chunk=4_000_000):
    per = max(1, chunk // (x.shape[1] * x.shape[2]))
    return np.concatenate([symmetric_kmeans2_batch(x[i:i + per], restarts, g)[1] for i in range(0, len(x), per)])


def oracle_sigclust_power(params, reps=500, null_reps=2000, rng=None, restarts=2):
    """Monte Carlo power of the SigClust test whose null calibration is known exactly.

    The statistic is the symmetric two-means ``W_n`` divided by the
    population total variance ``sum s_i + a^2/4``; its critical value is the
    ``alpha`` quantile of the same statistic over ``null_reps`` draws from the
    matched null ``N(0, diag(s_1 + a^2/4, s_2, ...))``.  This is the test
    whose limit :func:`asymptotic_power` describes.

    Returns
    -------
    dict
        ``power``, ``critical`` and the simulated alternative statistics ``w``.
    """
    st = as_stream(rng)
    n = params.n
    total = params.s.sum() + params.a ** 2 / 4
    sd0 = np.sqrt(matched_null_variances(params))
    w_null, w_alt = [], []
    block = max(1, 2_000_000 // (n * params.s.size))
    for i in range(0, null_reps, block):
        m = min(block, null_reps - i)
        x0 = st.derive("null", i).gen.standard_normal((m, n, params.s.size)) * sd0
        w_null.append(_sym_w(x0, st.derive("null-fit", i).gen, restarts))
    for i in range(0, reps, block):
        m = min(block, reps - i)
        x1 = sample_alternative(params, n, m, st.derive("alt", i))
        w_alt.append(_sym_w(x1, st.derive("alt-fit", i).gen, restarts))
    w_null = np.concatenate(w_null) / total
    w_alt = np.concatenate(w_alt) / total
    crit = float(np.quantile(w_null, params.alpha))
    return {"power": float(np.mean(w_alt < crit)), "critical": crit, "w": w_alt}
