"""Choosing the number of mixture components.

``srift_select`` runs the sequential relative-fit procedure: fit every order
``k = 1..K_n`` on one half, then for ascending ``j`` ask whether any larger
fit beats the order-``j`` fit on the other half.  ``ic_select`` gives the
usual AIC/BIC baselines.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError
from .fitters import em_fit, fit_single_gaussian, loglik
from .rift import RiftOptions, _l2_terms, _z, relative_fit_stats, split_halves
from .rng import as_stream


@dataclass
class SeqResult:
    """Outcome of the sequential selection.

    Attributes
    ----------
    k_hat : int
        First order whose fit was not beaten.
    per_j : list of dict
        One entry per tested order with keys ``j``, ``tested_s``,
        ``max_gamma``, ``thresholds`` and ``rejected``.
    fits : dict
        Fitted density per order; ``None`` where the fit failed.
    """

    k_hat: int
    per_j: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)


def default_kmax(n):
    """``min(10, floor(sqrt(n)))``, at least 1."""
    return max(1, min(10, int(np.floor(np.sqrt(n)))))


def _check(data, K_n):
    x = np.asarray(data, dtype=float)
    if x.ndim != 2:
        raise ValueError("data must be (n, d)")
    if not np.all(np.isfinite(x)):
        raise ValueError("data contain non-finite values")
    K_n = default_kmax(x.shape[0]) if K_n is None else int(K_n)
    if K_n < 1:
        raise ValueError("K_n must be >= 1")
    if x.shape[0] < 4 * K_n:
        raise ValueError("need n >= 4 * K_n")
    return x, K_n


def _fit(x, k, c, opts, stream):
    try:
        if k == 1:
            return fit_single_gaussian(x, c)
        return em_fit(x, k, c, opts.em, stream.derive("fit", k))
    except (NumericalError, np.linalg.LinAlgError):
        return None


def fit_orders(x, K_n, c=None, opts=None, rng=None, n_jobs=1):
    """Fit orders ``1..K_n`` to ``x``; failed fits are ``None``.

    Each order draws from its own derived stream, so the result does not
    depend on ``n_jobs``.
    """
    opts = opts or RiftOptions()
    s = as_stream(rng)
    ks = range(1, K_n + 1)
    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as ex:
            out = list(ex.map(lambda k: _fit(x, k, c, opts, s), ks))
    else:
        out = [_fit(x, k, c, opts, s) for k in ks]
    return dict(zip(ks, out))


def _pair_stat(distance, pj, ps, d2, opts, stream):
    n = d2.shape[0]
    if distance == "kl":
        gamma, tau, _ = relative_fit_stats(pj, ps, d2, None, opts.delta_jitter, stream)
        return gamma, tau / np.sqrt(n)
    ij, fj = _l2_terms(pj, d2, None, "closed_form", 0, 0, stream, 1)
    is_, fs = _l2_terms(ps, d2, None, "closed_form", 0, 0, stream, 2)
    u = fj - fs
    if opts.delta_jitter > 0:
        u = u + opts.delta_jitter * stream.derive("jitter").gen.standard_normal(n)
    return ij - is_ - 2.0 * u.mean(), 2.0 * u.std() / np.sqrt(n)


def srift_select(data, K_n=None, alpha=0.05, distance="kl", c=None, opts=None, rng=None, n_jobs=1):
    """Sequential relative-fit selection of the mixture order.

    For ``j = 1, 2, ...`` the order-``j`` fit is compared with every larger
    order ``s`` on the test half.  ``H_0j`` is rejected when
    ``max_s (Gamma_js - z_{alpha/m_j} se_js) > 0`` with ``m_j`` the number of
    comparators actually tested; the first ``j`` not rejected is returned.

    Parameters
    ----------
    data : array_like, shape (n, d)
    K_n : int, optional
        Largest order considered; defaults to ``min(10, floor(sqrt(n)))``.
    alpha : float
    distance : {"kl", "l2"}
        Log-density ratio statistic or its L2 analogue.
    c : FitConstraints, optional
    opts : RiftOptions, optional
        Split ratio, jitter and EM settings.
    rng : RngStream, Generator or int, optional
    n_jobs : int
        Threads used for the order fits.

    Returns
    -------
    SeqResult
    """
    if distance not in ("kl", "l2"):
        raise ValueError("distance must be 'kl' or 'l2'")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    x, K_n = _check(data, K_n)
    opts = opts or RiftOptions()
    s = as_stream(rng)
    if K_n == 1:
        return SeqResult(1, [], {1: fit_single_gaussian(x, c)})
    h = split_halves(x.shape[0], opts.split_ratio, s.derive("split"))
    d1, d2 = x[h.d1_indices], x[h.d2_indices]
    fits = fit_orders(d1, K_n, c, opts, s, n_jobs)
    per_j = []
    for j in range(1, K_n + 1):
        if fits[j] is None:
            per_j.append({"j": j, "tested_s": [], "max_gamma": float("nan"),
                          "thresholds": [], "rejected": True, "failed": True})
            continue
        comps = [t for t in range(j + 1, K_n + 1) if fits[t] is not None]
        z = _z(alpha / len(comps)) if comps else np.inf
        gammas, thr = [], []
        for t in comps:
            g, se = _pair_stat(distance, fits[j], fits[t], d2, opts, s.derive("pair", j, t))
            gammas.append(float(g))
            thr.append(float(z * se))
        rejected = bool(comps) and bool(np.any(np.array(gammas) > np.array(thr)))
        per_j.append({"j": j, "tested_s": comps, "max_gamma": max(gammas) if gammas else float("nan"),
                      "thresholds": thr, "rejected": rejected})
        if not rejected:
            return SeqResult(j, per_j, fits)
    return SeqResult(K_n, per_j, fits)


def n_parameters(k, d):
    """Free parameters of a ``k``-component full-covariance Gaussian mixture."""
    return k - 1 + k * d + k * d * (d + 1) // 2


def ic_select(data, K_n=None, criterion="bic", c=None, opts=None, rng=None, split=False,
              return_scores=False):
    """Order minimizing AIC or BIC over ``1..K_n``.

    Every order is fitted to all of ``data``.  With ``split=True`` the
    criterion is instead computed for the fitting-half fits that
    :func:`srift_select` uses with the same ``rng``, and ``n`` in the BIC
    penalty is the fitting-half size.

    Orders whose fit fails are skipped.  With ``return_scores`` the
    criterion values are returned as well (``inf`` for failed orders).
    """
    if criterion not in ("aic", "bic"):
        raise ValueError("criterion must be 'aic' or 'bic'")
    x, K_n = _check(data, K_n)
    opts = opts or RiftOptions()
    s = as_stream(rng)
    if split:
        x = x[split_halves(x.shape[0], opts.split_ratio, s.derive("split")).d1_indices]
    n, d = x.shape
    pen = 2.0 if criterion == "aic" else np.log(n)
    fits = fit_orders(x, K_n, c, opts, s)
    scores = np.full(K_n, np.inf)
    for k, m in fits.items():
        if m is not None:
            scores[k - 1] = -2.0 * loglik(m, x) + pen * n_parameters(k, d)
    if not np.isfinite(scores).any():
        raise NumericalError("every fit failed")
    k = int(np.argmin(scores)) + 1
    return (k, scores) if return_scores else k
