"""Two-means clustering (ordinary and symmetric about the origin).

Both solvers work on a batch of datasets of shape ``(R, n, d)`` so that
bootstrap and simulation replicates can be run together.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateStatisticError
from .rng import as_generator


@dataclass
class KmeansResult:
    """Best two-means partition.

    ``within_ss`` is the within-cluster sum of squares divided by ``n``.
    """

    centers: np.ndarray
    assignment: np.ndarray
    within_ss: float
    iterations: int


@dataclass
class SymKmeansResult:
    """Best symmetric two-means solution with centers ``center`` and ``-center``.

    ``signs`` are in {-1, +1}; ``within_ss`` is divided by ``n``.
    """

    center: np.ndarray
    within_ss: float
    signs: np.ndarray
    iterations: int


def _batch(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3 or x.shape[1] < 2:
        raise ValueError("need data of shape (n, d) with n >= 2")
    if not np.all(np.isfinite(x)):
        raise ValueError("data contain non-finite values")
    if np.any(np.all(x == x[:, :1], axis=(1, 2))):
        raise ValueError("all rows are identical")
    return x


def _lloyd2(x, c, max_iter=300):
    r_, n, _ = x.shape
    rr = np.arange(r_)
    total = x.sum(axis=1)
    lab = np.zeros((r_, n), dtype=bool)
    iters = np.zeros(r_, dtype=int)
    active = np.ones(r_, dtype=bool)
    for it in range(max_iter):
        diff = c[:, 1] - c[:, 0]
        thr = 0.5 * ((c[:, 1] ** 2).sum(1) - (c[:, 0] ** 2).sum(1))
        new = np.einsum("rnd,rd->rn", x, diff) > thr[:, None]
        n1 = new.sum(1)
        empty = (n1 == 0) | (n1 == n)
        if it > 0:
            active &= empty | np.any(new != lab, axis=1)
            if not active.any():
                break
        iters += active
        lab = new
        s1 = np.einsum("rn,rnd->rd", lab, x)
        with np.errstate(invalid="ignore", divide="ignore"):
            c1 = s1 / n1[:, None]
            c0 = (total - s1) / (n - n1)[:, None]
        for r in np.flatnonzero(empty):
            keep = c0[r] if n1[r] == 0 else c1[r]
            far = x[r, np.argmax(((x[r] - keep) ** 2).sum(1))]
            c0[r], c1[r] = (keep, far) if n1[r] == 0 else (far, keep)
        c = np.stack([c0, c1], axis=1)
    cent = c[rr[:, None], lab.astype(int)]
    w = ((x - cent) ** 2).sum(axis=2).mean(axis=1)
    return lab.astype(int), c, w, iters


def _pca_init(x):
    xc = x - x.mean(axis=1, keepdims=True)
    cov = np.einsum("rni,rnj->rij", xc, xc)
    v = np.linalg.eigh(cov)[1][:, :, -1]
    side = np.einsum("rnd,rd->rn", xc, v) > 0
    n1 = side.sum(1)
    ok = (n1 > 0) & (n1 < x.shape[1])
    s1 = np.einsum("rn,rnd->rd", side, x)
    with np.errstate(invalid="ignore", divide="ignore"):
        c1 = s1 / n1[:, None]
        c0 = (x.sum(1) - s1) / (x.shape[1] - n1)[:, None]
    c0[~ok] = x[~ok, 0]
    c1[~ok] = x[~ok, -1]
    return np.stack([c0, c1], axis=1)


def _pp_init(x, g):
    r_, n, _ = x.shape
    rr = np.arange(r_)
    i0 = g.integers(n, size=r_)
    c0 = x[rr, i0]
    d2 = ((x - c0[:, None]) ** 2).sum(2)
    cum = np.cumsum(d2, axis=1)
    u = g.random(r_) * cum[:, -1]
    i1 = np.minimum((cum < u[:, None]).sum(1), n - 1)
    return np.stack([c0, x[rr, i1]], axis=1)


def _keep_best(best, new):
    better = new[2] < best[2] - 1e-12 * np.abs(best[2])
    if better.any():
        for b, v in zip(best, new):
            b[better] = v[better]
    return best


def kmeans2_batch(x, restarts=10, rng=None, max_iter=300):
    """Two-means on each dataset of a batch of shape (R, n, d).

    Runs a principal-axis split start, a start at the symmetric two-means
    centers ``-t, t`` (so the result never exceeds the symmetric objective)
    and ``restarts`` k-means++ starts, keeping the smallest within-cluster
    sum of squares for each dataset.

    Returns
    -------
    assignment : ndarray, shape (R, n)
    centers : ndarray, shape (R, 2, d)
    within_ss : ndarray, shape (R,)
    iterations : ndarray, shape (R,)
    """
    x = _batch(x)
    g = as_generator(rng)
    best = _lloyd2(x, _pca_init(x), max_iter)
    t = _sym_iter(x, _sym_init(x), max_iter)[0]
    best = _keep_best(best, _lloyd2(x, np.stack([-t, t], axis=1), max_iter))
    for _ in range(int(restarts)):
        best = _keep_best(best, _lloyd2(x, _pp_init(x, g), max_iter))
    return best


def kmeans2(data, restarts=10, rng=None, max_iter=300):
    """Two-means clustering by Lloyd iterations.

    Parameters
    ----------
    data : array_like, shape (n, d)
    restarts : int
        Number of k-means++ starts in addition to a principal-axis split.
    rng : RngStream, Generator or int, optional

    Returns
    -------
    KmeansResult
    """
    x = np.asarray(data, dtype=float)
    if x.ndim != 2:
        raise ValueError("data must be (n, d)")
    lab, c, w, it = kmeans2_batch(x, restarts, rng, max_iter)
    return KmeansResult(c[0], lab[0], float(w[0]), int(it[0]))


def _sym_iter(x, t, max_iter=300):
    s = None
    iters = np.zeros(x.shape[0], dtype=int)
    for _ in range(max_iter):
        new = np.where(np.einsum("rnd,rd->rn", x, t) >= 0, 1.0, -1.0)
        if s is not None:
            changed = np.any(new != s, axis=1)
            if not changed.any():
                break
            iters += changed
        else:
            iters += 1
        s = new
        t = np.einsum("rn,rnd->rd", s, x) / x.shape[1]
    w = (x ** 2).sum(2).mean(1) - (t ** 2).sum(1)
    return t, w, s, iters


def _sym_init(x):
    m2 = np.einsum("rni,rnj->rij", x, x)
    v = np.linalg.eigh(m2)[1][:, :, -1]
    return v * np.abs(np.einsum("rnd,rd->rn", x, v)).mean(1)[:, None]


def symmetric_kmeans2_batch(x, restarts=5, rng=None, max_iter=300):
    """Symmetric two-means ``min_t (1/n) sum_i min ||x_i -/+ t||^2`` on a batch.

    Starts from the leading principal direction of the uncentered second
    moment, scaled by the mean absolute projection, plus ``restarts``
    starts at randomly chosen data points.

    Returns
    -------
    center : ndarray, shape (R, d)
    within_ss : ndarray, shape (R,)
    signs : ndarray, shape (R, n)
    iterations : ndarray, shape (R,)
    """
    x = _batch(x)
    g = as_generator(rng)
    r_, n, _ = x.shape
    best = list(_sym_iter(x, _sym_init(x), max_iter))
    for _ in range(int(restarts)):
        new = _sym_iter(x, x[np.arange(r_), g.integers(n, size=r_)], max_iter)
        better = new[1] < best[1] - 1e-12 * np.abs(best[1])
        if better.any():
            for b, v_ in zip(best, new):
                b[better] = v_[better]
    return tuple(best)


def symmetric_kmeans2(data, restarts=5, rng=None, max_iter=300):
    """Symmetric two-means about the origin.

    Returns
    -------
    SymKmeansResult
    """
    x = np.asarray(data, dtype=float)
    if x.ndim != 2:
        raise ValueError("data must be (n, d)")
    t, w, s, it = symmetric_kmeans2_batch(x, restarts, rng, max_iter)
    return SymKmeansResult(t[0], float(w[0]), s[0].astype(int), int(it[0]))


def sigclust_statistic(data, symmetric=False, restarts=10, rng=None):
    """Cluster index ``T = W_n / ((1/n) sum ||x_i - xbar||^2)``.

    With ``symmetric=True`` the data are centered at the sample mean and
    ``W_n`` is the symmetric two-means value, which makes the statistic
    translation invariant.
    """
    x = np.asarray(data, dtype=float)
    if x.ndim != 2:
        raise ValueError("data must be (n, d)")
    xc = x - x.mean(axis=0)
    total = (xc ** 2).sum(1).mean()
    if not total > 0:
        raise DegenerateStatisticError("data have zero total variance")
    if symmetric:
        w = symmetric_kmeans2(xc, restarts, rng).within_ss
    else:
        w = kmeans2(x, restarts, rng).within_ss
    return float(w / total)
