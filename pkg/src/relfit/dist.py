"""Gaussian and Gaussian-mixture densities, routing regions and L2 integrals."""

import numpy as np
from scipy.special import logsumexp
from scipy.stats import multivariate_t

from .errors import NumericalError
from .rng import as_generator

_LOG2PI = np.log(2.0 * np.pi)


def _as_points(x, d):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :] if d > 1 or x.size == 1 else x[:, None]
    if x.ndim != 2 or x.shape[1] != d:
        raise ValueError(f"expected points of dimension {d}, got shape {x.shape}")
    return x


class Gaussian:
    """Multivariate normal density.

    Parameters
    ----------
    mean : array_like, shape (d,)
    cov : array_like, shape (d, d)
        Symmetric positive definite.
    """

    def __init__(self, mean, cov):
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        d = mean.shape[0]
        if mean.ndim != 1 or cov.shape != (d, d):
            raise ValueError("mean must be (d,) and cov (d, d)")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise ValueError("non-finite Gaussian parameters")
        if not np.allclose(cov, cov.T, rtol=1e-10, atol=1e-12 * max(1.0, np.abs(cov).max())):
            raise ValueError("covariance is not symmetric")
        cov = 0.5 * (cov + cov.T)
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise ValueError("covariance is not positive definite") from None
        self.mean = mean
        self.cov = cov
        self.chol = chol
        self.dim = d
        self._logdet = 2.0 * np.sum(np.log(np.diag(chol)))

    def logpdf(self, x):
        x = _as_points(x, self.dim)
        z = np.linalg.solve(self.chol, (x - self.mean).T)
        return -0.5 * (self.dim * _LOG2PI + self._logdet + np.sum(z * z, axis=0))

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def sample(self, n, rng=None):
        g = as_generator(rng)
        z = g.standard_normal((int(n), self.dim))
        return self.mean + z @ self.chol.T

    def __repr__(self):
        return f"Gaussian(mean={self.mean!r}, cov={self.cov!r})"


class Mixture:
    """Finite Gaussian mixture ``sum_k w_k N(mu_k, Sigma_k)``.

    Parameters
    ----------
    weights : array_like, shape (k,)
        Non-negative, summing to one within 1e-12.
    components : sequence of Gaussian
    """

    def __init__(self, weights, components):
        w = np.atleast_1d(np.asarray(weights, dtype=float))
        components = list(components)
        if len(components) == 0 or w.shape != (len(components),):
            raise ValueError("need one weight per component")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and non-negative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        dims = {c.dim for c in components}
        if len(dims) != 1:
            raise ValueError("components have different dimensions")
        self.weights = w / w.sum()
        self.components = components
        self.dim = dims.pop()

    @classmethod
    def from_arrays(cls, weights, means, covs):
        return cls(weights, [Gaussian(m, s) for m, s in zip(means, covs)])

    @property
    def k(self):
        return len(self.components)

    @property
    def means(self):
        return np.array([c.mean for c in self.components])

    @property
    def covs(self):
        return np.array([c.cov for c in self.components])

    def component_logpdf(self, x):
        """Matrix of ``log w_k + log N_k(x_i)``, shape (n, k)."""
        x = _as_points(x, self.dim)
        with np.errstate(divide="ignore"):
            lw = np.log(self.weights)
        return np.column_stack([c.logpdf(x) for c in self.components]) + lw

    def logpdf(self, x):
        # weights stay outside the exponent so equal components give exactly their own density
        x = _as_points(x, self.dim)
        lp = np.column_stack([c.logpdf(x) for c in self.components])
        return logsumexp(lp, axis=1, b=self.weights)

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def posterior(self, x):
        lp = self.component_logpdf(x)
        return np.exp(lp - logsumexp(lp, axis=1, keepdims=True))

    def sample(self, n, rng=None, return_labels=False):
        g = as_generator(rng)
        n = int(n)
        labels = g.choice(self.k, size=n, p=self.weights)
        z = g.standard_normal((n, self.dim))
        x = np.empty((n, self.dim))
        for j, c in enumerate(self.components):
            idx = labels == j
            x[idx] = c.mean + z[idx] @ c.chol.T
        return (x, labels) if return_labels else x

    def moment_matched(self):
        """Single Gaussian with the mixture's mean and covariance."""
        m = self.weights @ self.means
        second = np.einsum("k,kij->ij", self.weights, self.covs + np.einsum("ki,kj->kij", self.means, self.means))
        return Gaussian(m, second - np.outer(m, m))

    def __repr__(self):
        return f"Mixture(k={self.k}, weights={self.weights!r})"


def as_mixture(density):
    if isinstance(density, Mixture):
        return density
    if isinstance(density, Gaussian):
        return Mixture([1.0], [density])
    raise TypeError(f"expected Gaussian or Mixture, got {type(density).__name__}")


def split_branch(rule, x):
    """Branch of a two-component split rule: 0 (left) iff ``w0 N0(x) >= w1 N1(x)``."""
    lp = rule.component_logpdf(x)
    return np.where(lp[:, 0] >= lp[:, 1], 0, 1)


class Region:
    """Subset of R^d reached by following a route of split rules.

    Parameters
    ----------
    route : sequence of (Mixture, int)
        Each entry is a two-component split rule and the branch taken.
        The empty route is the whole space.
    """

    def __init__(self, route=()):
        route = tuple((r, int(b)) for r, b in route)
        for rule, b in route:
            if rule.k != 2 or b not in (0, 1):
                raise ValueError("route entries must be (two-component Mixture, 0 or 1)")
        self.route = route

    @property
    def is_whole_space(self):
        return len(self.route) == 0

    def child(self, rule, branch):
        return Region(self.route + ((rule, branch),))

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        inside = np.ones(x.shape[0], dtype=bool)
        for rule, b in self.route:
            if not inside.any():
                break
            idx = np.flatnonzero(inside)
            inside[idx] = split_branch(rule, x[idx]) == b
        return inside


def truncation_mass(density, region, m=100_000, rng=None):
    """Monte Carlo estimate of ``P(S)`` under ``density``.

    Returns exactly 1.0 without consuming randomness when the region is the
    whole space.  Raises ``NumericalError`` if no draw lands in the region.
    """
    if region is None or region.is_whole_space:
        return 1.0
    y = density.sample(int(m), as_generator(rng))
    p = region.contains(y).mean()
    if p <= 0:
        raise NumericalError("estimated truncation mass is zero")
    return float(p)


def gaussian_cross_integral(g1, g2):
    """Closed form of ``int N(x; m1, S1) N(x; m2, S2) dx = N(m1 - m2; 0, S1 + S2)``."""
    return float(Gaussian(np.zeros(g1.dim), g1.cov + g2.cov).pdf(g1.mean - g2.mean)[0])


def cross_integral(p, q):
    """``int p q`` for Gaussians or mixtures."""
    p, q = as_mixture(p), as_mixture(q)
    tot = 0.0
    for wi, ci in zip(p.weights, p.components):
        for wj, cj in zip(q.weights, q.components):
            tot += wi * wj * gaussian_cross_integral(ci, cj)
    return tot


def l2_sq_integral(p):
    """``int p^2`` in closed form."""
    return cross_integral(p, p)


def cross_integral_is(p, q, m=100_000, rng=None, df=3.0):
    """Importance-sampling estimate of ``int p q``.

    The proposal is a multivariate t (``df`` degrees of freedom) located at
    the mean of the equal mixture of ``p`` and ``q`` with its covariance as
    scale.

    Returns
    -------
    estimate, std_error : float
    """
    p, q = as_mixture(p), as_mixture(q)
    if p.dim != q.dim:
        raise ValueError("densities have different dimensions")
    mm = Mixture(np.r_[p.weights, q.weights] / 2, p.components + q.components).moment_matched()
    prop = multivariate_t(loc=mm.mean, shape=mm.cov, df=df)
    y = prop.rvs(size=int(m), random_state=as_generator(rng)).reshape(int(m), p.dim)
    vals = np.exp(p.logpdf(y) + q.logpdf(y) - prop.logpdf(y).reshape(-1))
    if not np.any(vals > 0) or not np.all(np.isfinite(vals)):
        raise NumericalError("importance weights are all zero or non-finite")
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(len(vals)))


def l2_sq_integral_is(p, m=100_000, rng=None, df=3.0):
    """Importance-sampling estimate of ``int p^2``; see :func:`cross_integral_is`."""
    return cross_integral_is(p, p, m, rng, df)


def kl_divergence_mc(p, q, m=20_000, rng=None):
    """Monte Carlo ``KL(p || q) = E_p[log p - log q]`` using draws from ``p``."""
    y = p.sample(int(m), as_generator(rng))
    return float(np.mean(p.logpdf(y) - q.logpdf(y)))


def mvn_logpdf(x, g):
    """Log density of a Gaussian at the rows of ``x`` (a scalar for one point)."""
    out = g.logpdf(x)
    return float(out[0]) if np.ndim(x) == 1 else out


def mixture_logpdf(x, m):
    """Log density of a mixture, computed with log-sum-exp."""
    out = as_mixture(m).logpdf(x)
    return float(out[0]) if np.ndim(x) == 1 else out


def mvn_sample(g, n, rng=None):
    """``n`` draws from a Gaussian, shape (n, d)."""
    if int(n) < 1:
        raise ValueError("n must be >= 1")
    return g.sample(n, rng)


def mixture_sample(m, n, rng=None):
    """``n`` draws from a mixture and their component labels."""
    if int(n) < 1:
        raise ValueError("n must be >= 1")
    return as_mixture(m).sample(n, rng, return_labels=True)


gaussian_l2_cross = gaussian_cross_integral
estimate_region_mass = truncation_mass
