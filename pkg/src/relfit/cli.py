"""Command-line interface.

Exit codes: 0 on success, 2 on input errors, 3 on numerical failures.
All randomness is controlled by ``--seed``.
"""

import argparse
import csv
import json
import sys

import numpy as np

from .errors import NumericalError
from .methods import METHODS, run_test
from .rng import RngStream
from .scenarios import KINDS, ScenarioSpec, gene_preprocess
from .select import ic_select, srift_select
from .study import SELECTORS, StudyConfig, run_power_study, run_select_study, run_tree_study
from .tree import bottomup_cluster, topdown_cluster, tree_to_json


class InputError(ValueError):
    pass


def read_csv(path):
    """Read a CSV with a header row; returns ``(header, float matrix)``."""
    try:
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}") from e
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if len(rows) < 2:
        raise InputError(f"{path}: need a header row and at least one data row")
    header = [c.strip() for c in rows[0]]
    if any(len(r) != len(header) for r in rows[1:]):
        raise InputError(f"{path}: rows have differing lengths")
    try:
        x = np.array([[float(c) for c in r] for r in rows[1:]])
    except ValueError as e:
        raise InputError(f"{path}: non-numeric entry ({e})") from e
    if not np.all(np.isfinite(x)):
        raise InputError(f"{path}: non-finite entry")
    return header, x


def write_csv(path, header, x):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in x:
            w.writerow(["%.17g" % v for v in row])


def parse_param(text):
    """Parse ``key=value``; values are JSON, comma-separated numbers or strings."""
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    key, val = text.split("=", 1)
    try:
        v = json.loads(val)
    except json.JSONDecodeError:
        try:
            v = [float(p) for p in val.split(",")] if "," in val else val
        except ValueError:
            v = val
    return key.strip(), v


def _cmd_cluster(a):
    _, x = read_csv(a.input)
    kw = dict(method=a.method, alpha=a.alpha, rng=RngStream(a.seed), min_node_size=a.min_node, B=a.B)
    if a.direction == "topdown":
        tree = topdown_cluster(x, max_depth=a.max_depth or 30, **kw)
    else:
        tree = bottomup_cluster(x, max_depth=a.max_depth or 3, **kw)
    text = tree_to_json(tree)
    if a.out:
        with open(a.out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_test(a):
    _, x = read_csv(a.input)
    out = run_test(a.method, x, a.alpha, RngStream(a.seed), B=a.B)
    print(json.dumps(out.to_dict()))
    return 0


def _cmd_selectk(a):
    _, x = read_csv(a.input)
    s = RngStream(a.seed)
    if a.criterion:
        k, scores = ic_select(x, a.kmax, a.criterion, rng=s, return_scores=True)
        print(json.dumps({"criterion": a.criterion, "k_hat": k,
                          "scores": [None if not np.isfinite(v) else float(v) for v in scores]}))
        return 0
    res = srift_select(x, a.kmax, a.alpha, a.distance, rng=s)
    print(json.dumps({"distance": a.distance, "k_hat": res.k_hat, "per_j": res.per_j}))
    return 0


def _cmd_simulate(a):
    params = dict(a.param or [])
    d = int(params.pop("d", 2))
    spec = ScenarioSpec(a.scenario, d, params)
    methods = a.methods.split(",") if a.methods else (["srift-kl", "bic"] if a.study == "select" else ["rift"])
    cfg = StudyConfig(spec, methods, a.reps, a.alpha, a.seed, {"csv": a.out} if a.out else {}, B=a.B,
                      directions=a.direction.split(","), max_depth=a.max_depth, K_n=a.kmax)
    run = {"power": run_power_study, "tree": run_tree_study, "select": run_select_study}[a.study]
    rep = run(cfg, n_jobs=a.jobs)
    if not a.out:
        sys.stdout.write(rep.to_csv())
    return 0


def _cmd_genes(a):
    header, x = read_csv(a.input)
    y, cols = gene_preprocess(x, a.top)
    write_csv(a.out, [header[i] for i in cols], y)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="relfit", description="Relative-fit clustering tests.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("cluster", help="build a clustering tree")
    c.add_argument("--input", required=True)
    c.add_argument("--method", choices=METHODS, default="mrift")
    c.add_argument("--direction", choices=("topdown", "bottomup"), default="topdown")
    c.add_argument("--alpha", type=float, default=0.05)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--min-node", type=int, default=None)
    c.add_argument("--max-depth", type=int, default=None)
    c.add_argument("--B", type=int, default=1000, help="SigClust bootstrap size")
    c.add_argument("--out")
    c.set_defaults(func=_cmd_cluster)

    t = sub.add_parser("test", help="test one Gaussian against clustering")
    t.add_argument("--input", required=True)
    t.add_argument("--method", choices=METHODS, default="rift")
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--B", type=int, default=1000)
    t.set_defaults(func=_cmd_test)

    s = sub.add_parser("selectk", help="choose the number of mixture components")
    s.add_argument("--input", required=True)
    s.add_argument("--kmax", type=int, default=None)
    s.add_argument("--distance", choices=("kl", "l2"), default="kl")
    s.add_argument("--criterion", choices=("aic", "bic"))
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=_cmd_selectk)

    m = sub.add_parser("simulate", help="run a replicated simulation study")
    m.add_argument("--scenario", choices=KINDS, required=True)
    m.add_argument("--param", type=parse_param, action="append", metavar="KEY=VALUE",
                   help="scenario parameter, repeatable; d=... sets the dimension")
    m.add_argument("--reps", type=int, default=100)
    m.add_argument("--alpha", type=float, default=0.05)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out")
    m.add_argument("--study", choices=("power", "tree", "select"), default="power")
    m.add_argument("--methods", help="comma-separated test tags, or selectors " + ",".join(SELECTORS))
    m.add_argument("--direction", default="topdown", help="topdown, bottomup or both comma-separated")
    m.add_argument("--max-depth", type=int, default=None)
    m.add_argument("--kmax", type=int, default=None)
    m.add_argument("--B", type=int, default=1000)
    m.add_argument("--jobs", type=int, default=1)
    m.set_defaults(func=_cmd_simulate)

    g = sub.add_parser("genes", help="preprocess an expression matrix")
    g.add_argument("--input", required=True)
    g.add_argument("--top", type=int, default=500)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_genes)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericalError as e:
        print(f"error: numerical failure: {e}", file=sys.stderr)
        return 3
    except (ValueError, KeyError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
