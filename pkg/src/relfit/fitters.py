"""Constrained Gaussian and Gaussian-mixture maximum likelihood fits."""

from dataclasses import dataclass

import numpy as np

from .dist import Gaussian, Mixture
from .errors import NumericalError
from .rng import as_generator


@dataclass(frozen=True)
class FitConstraints:
    """Compact parameter set for the fits.

    Covariance eigenvalues are confined to ``[eig_min, eig_max]`` and means to
    the box ``[mean_low, mean_high]``.  ``None`` entries are filled from the
    data by :meth:`resolve`: ``1e-6 * tr(S)/d`` and ``1e6 * tr(S)/d`` for the
    eigenvalue bounds and the data bounding box inflated tenfold for the means.
    """

    eig_min: float = None
    eig_max: float = None
    mean_low: object = None
    mean_high: object = None

    def __post_init__(self):
        if self.eig_min is not None and not self.eig_min > 0:
            raise ValueError("eig_min must be positive")
        if self.eig_min is not None and self.eig_max is not None and self.eig_max < self.eig_min:
            raise ValueError("eig_max must be >= eig_min")

    def resolve(self, data):
        """Return ``(eig_min, eig_max, low, high)`` with defaults filled in."""
        x = np.asarray(data, dtype=float)
        d = x.shape[1]
        scale = np.trace(np.atleast_2d(np.cov(x.T, bias=True))) / d if x.shape[0] > 1 else 0.0
        if not scale > 0:
            scale = 1.0
        c1 = self.eig_min if self.eig_min is not None else 1e-6 * scale
        c2 = self.eig_max if self.eig_max is not None else max(1e6 * scale, c1)
        lo, hi = x.min(axis=0), x.max(axis=0)
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo) + 1e-12
        low = np.broadcast_to(np.asarray(self.mean_low, float), (d,)) if self.mean_low is not None else mid - 10 * half
        high = np.broadcast_to(np.asarray(self.mean_high, float), (d,)) if self.mean_high is not None else mid + 10 * half
        return float(c1), float(c2), low, high


@dataclass
class FitResult:
    """Output of :func:`em_fit_result`; ``trace`` is the per-iteration log-likelihood of the kept run."""

    mixture: Mixture
    loglik: float
    n_iter: int
    converged: bool
    trace: tuple = ()


def _check_data(data, min_n=1):
    x = np.asarray(data, dtype=float)
    if x.ndim != 2:
        raise ValueError("data must be a 2-d array (n, d)")
    if x.shape[0] < min_n:
        raise ValueError(f"need at least {min_n} points, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise ValueError("data contain non-finite values")
    return x


def clamp_cov(cov, c1, c2):
    """Project symmetric matrices onto ``{S : c1 I <= S <= c2 I}`` by clipping eigenvalues.

    Accepts a single matrix or a stack of shape (k, d, d).
    """
    vals, vecs = np.linalg.eigh(0.5 * (cov + np.swapaxes(cov, -1, -2)))
    vals = np.clip(vals, c1, c2)
    return (vecs * vals[..., None, :]) @ np.swapaxes(vecs, -1, -2)


def fit_single_gaussian(data, constraints=None):
    """Constrained maximum-likelihood Gaussian (covariance divisor ``n``).

    Parameters
    ----------
    data : array_like, shape (n, d)
    constraints : FitConstraints, optional

    Returns
    -------
    Gaussian
    """
    x = _check_data(data, 1)
    c1, c2, lo, hi = (constraints or FitConstraints()).resolve(x)
    mu = np.clip(x.mean(axis=0), lo, hi)
    r = x - mu
    return Gaussian(mu, clamp_cov(r.T @ r / x.shape[0], c1, c2))


def _log_comp(x, means, covs, logw):
    d = x.shape[1]
    chol = np.linalg.cholesky(covs)
    z = np.linalg.solve(chol, np.swapaxes(x[None] - means[:, None, :], 1, 2))
    logdet = 2 * np.log(np.diagonal(chol, axis1=1, axis2=2)).sum(1)
    return (logw - 0.5 * (d * np.log(2 * np.pi) + logdet) - 0.5 * (z * z).sum(1).T)


def _kmeanspp(x, k, g):
    n = x.shape[0]
    idx = [int(g.integers(n))]
    d2 = ((x - x[idx[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        tot = d2.sum()
        j = int(g.choice(n, p=d2 / tot)) if tot > 0 else int(g.integers(n))
        idx.append(j)
        d2 = np.minimum(d2, ((x - x[j]) ** 2).sum(axis=1))
    return x[idx]


def _lloyd(x, centers, max_iter=100):
    """k-means labels from the given seeds; an emptied cluster is re-seeded at the farthest point."""
    lab = None
    for _ in range(max_iter):
        d2 = ((x[:, None, :] - centers[None]) ** 2).sum(axis=2)
        new = np.argmin(d2, axis=1)
        for j in range(len(centers)):
            if not np.any(new == j):
                far = int(np.argmax(d2[np.arange(len(x)), new]))
                new[far] = j
        if lab is not None and np.array_equal(new, lab):
            break
        lab = new
        centers = np.array([x[lab == j].mean(axis=0) for j in range(len(centers))])
    return lab


def _whiten(x):
    """Coordinates in which the sample covariance is the identity, so seeding is affine invariant."""
    vals, vecs = np.linalg.eigh(np.atleast_2d(np.cov(x, rowvar=False, bias=True)))
    vals = np.maximum(vals, max(vals.max(), 1e-300) * 1e-12)
    return (x - x.mean(axis=0)) @ (vecs / np.sqrt(vals))


def _m_step(x, resp, c1, c2, lo, hi):
    n = x.shape[0]
    nk = resp.sum(axis=0)
    if np.any(nk <= 1e-10 * n):
        raise NumericalError("mixture component lost all mass")
    means = np.clip(resp.T @ x / nk[:, None], lo, hi)
    r = x[None] - means[:, None, :]
    covs = np.einsum("nk,kni,knj->kij", resp, r, r) / nk[:, None, None]
    return nk / n, means, clamp_cov(covs, c1, c2)


@dataclass(frozen=True)
class EmOptions:
    """EM settings.

    ``tol`` is the relative change of the log-likelihood used to stop;
    ``init`` is ``"kmeans"`` (hard k-means labels from k-means++ seeds,
    computed in whitened coordinates) or ``"random"``
    (Dirichlet responsibilities).
    """

    max_iter: int = 500
    tol: float = 1e-8
    restarts: int = 10
    init: str = "kmeans"

    def __post_init__(self):
        if self.max_iter < 1 or self.restarts < 1 or not self.tol > 0:
            raise ValueError("need max_iter >= 1, restarts >= 1 and tol > 0")
        if self.init not in ("kmeans", "random"):
            raise ValueError("init must be 'kmeans' or 'random'")


def loglik(m, data):
    """Total log-likelihood of ``data`` under a Gaussian or mixture."""
    return float(np.sum(m.logpdf(np.asarray(data, dtype=float))))


def em_fit_result(data, k, c=None, opts=None, rng=None):
    """Constrained EM for a ``k``-component Gaussian mixture, with diagnostics.

    The M-step clips covariance eigenvalues to the constraint interval and
    means to the box.  The restart with the highest log-likelihood is kept;
    restarts that fail numerically are discarded.

    Parameters
    ----------
    data : array_like, shape (n, d)
    k : int
    c : FitConstraints, optional
    opts : EmOptions, optional
    rng : RngStream, Generator or int, optional

    Returns
    -------
    FitResult
    """
    x = _check_data(data, 1)
    k = int(k)
    if k < 1:
        raise ValueError("k must be >= 1")
    if x.shape[0] < k:
        raise ValueError(f"cannot fit {k} components to {x.shape[0]} points")
    c = c or FitConstraints()
    opts = opts or EmOptions()
    if k == 1:
        g = fit_single_gaussian(x, c)
        ll = float(g.logpdf(x).sum())
        return FitResult(Mixture([1.0], [g]), ll, 1, True, (ll,))
    c1, c2, lo, hi = c.resolve(x)
    gen = as_generator(rng)
    xw = _whiten(x) if opts.init == "kmeans" else None
    best = None
    for _ in range(opts.restarts):
        if opts.init == "kmeans":
            resp = np.eye(k)[_lloyd(xw, _kmeanspp(xw, k, gen))]
        else:
            resp = gen.dirichlet(np.ones(k), size=x.shape[0])
        try:
            w, means, covs = _m_step(x, resp, c1, c2, lo, hi)
            ll_old = -np.inf
            converged = False
            trace = []
            for it in range(1, opts.max_iter + 1):
                lp = _log_comp(x, means, covs, np.log(w))
                top = lp.max(axis=1)
                norm = top + np.log(np.exp(lp - top[:, None]).sum(axis=1))
                ll = float(norm.sum())
                if not np.isfinite(ll):
                    raise NumericalError("non-finite log-likelihood")
                trace.append(ll)
                if abs(ll - ll_old) <= opts.tol * abs(ll):
                    converged = True
                    break
                ll_old = ll
                params = (w, means, covs)
                w, means, covs = _m_step(x, np.exp(lp - norm[:, None]), c1, c2, lo, hi)
            if not converged:
                w, means, covs = params
        except (NumericalError, np.linalg.LinAlgError):
            continue
        if best is None or ll > best[0]:
            best = (ll, w, means, covs, it, converged, tuple(trace))
    if best is None:
        raise NumericalError(f"all {opts.restarts} EM restarts failed for k={k}")
    ll, w, means, covs, it, converged, trace = best
    return FitResult(Mixture.from_arrays(w / w.sum(), means, covs), ll, it, converged, trace)


def em_fit(data, k, c=None, opts=None, rng=None):
    """Constrained EM fit of a ``k``-component mixture; see :func:`em_fit_result`.

    Returns
    -------
    Mixture
    """
    return em_fit_result(data, k, c, opts, rng).mixture
