"""Simulation scenarios and gene-expression preprocessing."""

from dataclasses import dataclass, field

import numpy as np

from .rng import as_generator

KINDS = ("two_mix", "square", "tetrahedron", "ten_cluster", "single_gaussian", "uniform_rects", "custom")


@dataclass
class ScenarioSpec:
    """Generative setting.

    Parameters by kind (all optional unless noted):

    - ``two_mix``: ``a`` (signal), ``n``, ``variant`` ("symmetric" for
      ``N(mu,S)/2 + N(-mu,S)/2`` or "shifted" for ``N(0,S)/2 + N(mu,S)/2``),
      ``direction`` ("first" for ``mu = (a, 0, ...)`` or "all" for
      ``mu = (a, ..., a)``), ``mu`` (explicit mean), ``anisotropy``
      (diagonal of ``S``).
    - ``square``, ``tetrahedron``: ``delta`` (side), ``n_per_cluster``.
    - ``ten_cluster``: ``a``, ``n``, ``sigma_sq``; ``d`` divisible by 5.
    - ``single_gaussian``: ``n``, ``anisotropy``.
    - ``uniform_rects``: ``n``; ``d`` must be 2.
    - ``custom``: ``means`` (list of vectors), ``n_per_cluster``, ``sigma_sq``.
    """

    kind: str
    d: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scenario {self.kind!r}; choose from {', '.join(KINDS)}")
        self.d = int(self.d)
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.kind == "tetrahedron" and self.d < 3:
            raise ValueError("tetrahedron needs d >= 3")
        if self.kind == "square" and self.d < 2:
            raise ValueError("square needs d >= 2")
        if self.kind == "ten_cluster" and self.d % 5:
            raise ValueError("ten_cluster needs d divisible by 5")
        if self.kind == "uniform_rects" and self.d != 2:
            raise ValueError("uniform_rects needs d = 2")


def _diag(spec):
    an = spec.params.get("anisotropy")
    if an is None:
        return np.ones(spec.d)
    an = np.broadcast_to(np.asarray(an, dtype=float), (spec.d,)).copy()
    if np.any(an <= 0):
        raise ValueError("anisotropy entries must be positive")
    return an


def square_vertices(delta):
    """Vertices ``(+-delta/2, +-delta/2)``."""
    h = delta / 2.0
    return np.array([[-h, -h], [-h, h], [h, -h], [h, h]])


def tetrahedron_vertices(delta):
    """Regular tetrahedron with side ``delta`` centered at the origin."""
    return np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float) * delta / np.sqrt(8.0)


def ten_cluster_means(d, a):
    """Ten means ``+-a`` times the indicator of one of five coordinate blocks of length ``d/5``."""
    p = d // 5
    out = []
    for b in range(5):
        e = np.zeros(d)
        e[b * p:(b + 1) * p] = a
        out.extend([e, -e])
    return np.array(out)


def _clusters(means, d, n_per, sd, g):
    k = len(means)
    full = np.zeros((k, d))
    full[:, :means.shape[1]] = means
    labels = np.repeat(np.arange(k), n_per)
    return full[labels] + sd * g.standard_normal((k * n_per, d)), labels


def gen_scenario(spec, rng=None):
    """Draw data from a scenario.

    Returns
    -------
    data : ndarray, shape (n, d)
    labels : ndarray of int
    """
    g = as_generator(rng)
    p, d = spec.params, spec.d
    kind = spec.kind
    if kind == "square":
        return _clusters(square_vertices(float(p.get("delta", 6.0))), d, int(p.get("n_per_cluster", 50)), 1.0, g)
    if kind == "tetrahedron":
        return _clusters(tetrahedron_vertices(float(p.get("delta", 5.0))), d, int(p.get("n_per_cluster", 50)),
                         1.0, g)
    if kind == "ten_cluster":
        n = int(p.get("n", 1000))
        if n % 10:
            raise ValueError("ten_cluster needs n divisible by 10")
        sd = np.sqrt(float(p.get("sigma_sq", 1.0)))
        return _clusters(ten_cluster_means(d, float(p.get("a", 1.0))), d, n // 10, sd, g)
    if kind == "custom":
        means = np.atleast_2d(np.asarray(p["means"], dtype=float))
        if means.shape[1] > d:
            raise ValueError("custom means longer than d")
        return _clusters(means, d, int(p.get("n_per_cluster", 50)), np.sqrt(float(p.get("sigma_sq", 1.0))), g)
    n = int(p.get("n", 1000))
    if n < 1:
        raise ValueError("n must be positive")
    if kind == "single_gaussian":
        return g.standard_normal((n, d)) * np.sqrt(_diag(spec)), np.zeros(n, dtype=int)
    if kind == "uniform_rects":
        labels = (g.random(n) < 0.5).astype(int)
        x = g.random((n, 2))
        x[:, 0] += np.where(labels == 0, -2.0, 2.0)
        return x, labels
    if "mu" in p:
        mu = np.broadcast_to(np.asarray(p["mu"], dtype=float), (d,)).copy()
    else:
        a = float(p.get("a", 1.0))
        mu = np.full(d, a) if p.get("direction", "first") == "all" else np.eye(d)[0] * a
    labels = (g.random(n) < 0.5).astype(int)
    z = g.standard_normal((n, d)) * np.sqrt(_diag(spec))
    if p.get("variant", "symmetric") == "shifted":
        return z + labels[:, None] * mu, labels
    return z + np.where(labels == 1, 1.0, -1.0)[:, None] * mu, labels


def gene_preprocess(matrix, top_k):
    """Log-transform an expression matrix and keep the ``top_k`` most variable columns.

    Zeros are replaced by the smallest positive entry, the natural log is
    taken, and columns are ranked by median absolute deviation about the
    median (ties broken by column index).  Kept columns stay in their
    original order.

    Returns
    -------
    data : ndarray, shape (n, min(top_k, d))
    columns : ndarray of int
        Indices of the kept columns.
    """
    x = np.asarray(matrix, dtype=float)
    if x.ndim != 2:
        raise ValueError("matrix must be 2-d")
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise ValueError("expression values must be finite and non-negative")
    if not np.any(x > 0):
        raise ValueError("matrix has no positive entries")
    top_k = int(top_k)
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    y = np.log(np.where(x > 0, x, x[x > 0].min()))
    mad = np.median(np.abs(y - np.median(y, axis=0)), axis=0)
    order = np.argsort(-mad, kind="stable")
    cols = np.sort(order[:top_k])
    return y[:, cols], cols
