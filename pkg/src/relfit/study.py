"""Replication drivers for power, tree and order-selection studies.

Replication ``r`` draws its data from ``RngStream(seed, r).derive("data")``
and each method from ``RngStream(seed, r).derive("method", name)``, so a
study is reproducible from its configuration alone and any subset of reps
or methods can be rerun in isolation.
"""

import csv
import io
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .methods import check_method, run_test
from .rng import RngStream
from .scenarios import ScenarioSpec, gen_scenario
from .select import ic_select, srift_select
from .tree import bottomup_cluster, topdown_cluster

SELECTORS = ("srift-kl", "srift-l2", "aic", "bic")


@dataclass
class StudyConfig:
    """Settings of one simulation study.

    Parameters
    ----------
    scenario : ScenarioSpec
    methods : list of str
        Test tags for power and tree studies, or entries of ``SELECTORS``
        for selection studies.
    reps : int
    alpha : float
    seed : int
    outputs : dict
        Optional ``{"csv": path}``; :func:`run_study` writes the report there.
    B : int
        Bootstrap size for SigClust.
    directions : list of str
        Tree directions for tree studies.
    max_depth : int, optional
        Depth limit for trees (bottom-up growth depth or top-down cap).
    K_n : int, optional
        Largest order for selection studies.
    """

    scenario: ScenarioSpec
    methods: list = field(default_factory=lambda: ["rift"])
    reps: int = 100
    alpha: float = 0.05
    seed: int = 0
    outputs: dict = field(default_factory=dict)
    B: int = 1000
    directions: list = field(default_factory=lambda: ["topdown"])
    max_depth: int = None
    K_n: int = None

    def __post_init__(self):
        if int(self.reps) < 1:
            raise ValueError("reps must be >= 1")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if not self.methods:
            raise ValueError("need at least one method")
        for d in self.directions:
            if d not in ("topdown", "bottomup"):
                raise ValueError(f"unknown direction {d!r}")
        self.reps = int(self.reps)


@dataclass
class PowerReport:
    """Per-rep records with rejection counts and cluster-count histograms.

    ``records`` hold one dict per (rep, method) with keys ``rep``,
    ``method``, ``statistic``, ``p_value``, ``reject`` and ``k``; ``k`` is the
    leaf count (tree study), the selected order (selection study) or
    ``None`` (power study).
    """

    kind: str
    reps: int
    records: list

    def methods(self):
        return list(dict.fromkeys(r["method"] for r in self.records))

    def counts(self):
        """Rejections per method."""
        out = {m: 0 for m in self.methods()}
        for r in self.records:
            out[r["method"]] += bool(r["reject"])
        return out

    def rates(self):
        return {m: c / self.reps for m, c in self.counts().items()}

    def p_values(self, method):
        return np.array([r["p_value"] for r in self.records if r["method"] == method], dtype=float)

    def histogram(self, method):
        """``{k: count}`` of cluster counts for one method."""
        return dict(sorted(Counter(r["k"] for r in self.records if r["method"] == method).items()))

    def to_csv(self, path=None):
        """Write the records; returns the CSV text."""
        last = {"tree": "leaves", "select": "k_hat"}.get(self.kind, "leaves")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rep", "method", "statistic", "p_value", "reject", last])
        for r in self.records:
            w.writerow([r["rep"], r["method"], _num(r["statistic"]), _num(r["p_value"]),
                        int(bool(r["reject"])), "" if r["k"] is None else r["k"]])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as f:
                f.write(text)
        return text


def _num(v):
    return "" if v is None else "%.17g" % v


def _scenario_n(spec):
    x, _ = gen_scenario(spec, RngStream(0).derive("probe"))
    return x.shape[0]


def _check_compat(config, tests=True):
    d = config.scenario.d
    n = _scenario_n(config.scenario)
    for m in config.methods:
        if tests:
            check_method(m)
        elif m not in SELECTORS:
            raise ValueError(f"unknown selector {m!r}; choose from {', '.join(SELECTORS)}")
        if n < 4 * (d + 2):
            raise ValueError(f"method {m!r} needs at least {4 * (d + 2)} points for d={d}, scenario has {n}")


def _rep_data(config, r):
    return gen_scenario(config.scenario, RngStream(config.seed, r).derive("data"))[0]


def _method_stream(config, r, name):
    return RngStream(config.seed, r).derive("method", name)


def _power_rep(config, r):
    x = _rep_data(config, r)
    out = []
    for m in config.methods:
        t = run_test(m, x, config.alpha, _method_stream(config, r, m), B=config.B)
        out.append({"rep": r, "method": m, "statistic": t.statistic, "p_value": t.p_value,
                    "reject": t.reject, "k": None})
    return out


def _tree_rep(config, r):
    x = _rep_data(config, r)
    out = []
    for direction in config.directions:
        for m in config.methods:
            name = f"{m}/{direction}"
            s = _method_stream(config, r, name)
            if direction == "topdown":
                kw = {} if config.max_depth is None else {"max_depth": config.max_depth}
                tree = topdown_cluster(x, m, config.alpha, rng=s, B=config.B, **kw)
            else:
                tree = bottomup_cluster(x, m, config.alpha, rng=s, B=config.B, max_depth=config.max_depth or 3)
            root = tree.nodes[tree.root].outcome
            out.append({"rep": r, "method": name,
                        "statistic": None if root is None else root.statistic,
                        "p_value": None if root is None else root.p_value,
                        "reject": tree.n_leaves > 1, "k": tree.n_leaves})
    return out


def _select_rep(config, r):
    x = _rep_data(config, r)
    out = []
    for m in config.methods:
        s = _method_stream(config, r, m)
        if m.startswith("srift"):
            k = srift_select(x, config.K_n, config.alpha, m.split("-")[1], rng=s).k_hat
        else:
            k = ic_select(x, config.K_n, m, rng=s)
        out.append({"rep": r, "method": m, "statistic": None, "p_value": None, "reject": k > 1, "k": k})
    return out


_REP = {"power": _power_rep, "tree": _tree_rep, "select": _select_rep}


def _run(kind, config, n_jobs):
    _check_compat(config, tests=kind != "select")
    fn = _REP[kind]
    reps = range(config.reps)
    if n_jobs and n_jobs > 1:
        with ProcessPoolExecutor(n_jobs) as ex:
            chunks = list(ex.map(fn, [config] * config.reps, reps))
    else:
        chunks = [fn(config, r) for r in reps]
    report = PowerReport(kind, config.reps, [rec for c in chunks for rec in c])
    if config.outputs.get("csv"):
        report.to_csv(config.outputs["csv"])
    return report


def run_power_study(config, n_jobs=1):
    """Repeat generate-then-test ``config.reps`` times.

    Returns
    -------
    PowerReport
        Records ordered by rep, then by method.
    """
    return _run("power", config, n_jobs)


def run_tree_study(config, n_jobs=1):
    """Repeat generate-then-cluster and record leaf counts per method and direction.

    Methods are reported as ``"<method>/<direction>"``; ``reject`` is true
    when the tree has more than one leaf.
    """
    return _run("tree", config, n_jobs)


def run_select_study(config, n_jobs=1):
    """Repeat generate-then-select with methods from ``SELECTORS``."""
    return _run("select", config, n_jobs)
