"""Top-down and bottom-up clustering trees driven by a single-Gaussian test.

The sample is split once into a fitting half ``D1`` and a testing half
``D2``.  At each node a two-component rule is fitted on the node's ``D1``
points; it routes points to the children and defines the children's regions.
The node's test uses its ``D2`` points.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .dist import Mixture, Region, split_branch
from .methods import RIFT_FAMILY, check_method, node_test, split_rule
from .rift import RiftOptions, TestOutcome, split_halves
from .rng import as_stream


@dataclass
class ClusterNode:
    """Node of a clustering tree; ``children`` is empty or two ids ``(2i, 2i+1)``."""

    id: int
    depth: int
    parent: int
    region: Region
    d1_idx: np.ndarray
    d2_idx: np.ndarray
    split: Mixture = None
    outcome: TestOutcome = None
    children: tuple = ()
    level: float = None
    note: str = ""

    @property
    def is_leaf(self):
        return not self.children


@dataclass
class ClusterTree:
    """Binary tree of nodes keyed by id; the root has id 1."""

    nodes: dict
    alpha: float
    method: str
    direction: str
    root: int = 1
    n_nodes_grown: int = None
    data: np.ndarray = field(default=None, repr=False)

    def leaves(self):
        return [i for i in sorted(self.nodes) if self.nodes[i].is_leaf]

    @property
    def n_leaves(self):
        return len(self.leaves())

    def subtree(self, node_id):
        out, stack = [], [node_id]
        while stack:
            i = stack.pop()
            out.append(i)
            stack.extend(self.nodes[i].children)
        return out

    def to_json(self):
        return tree_to_json(self)


def topdown_level(alpha, depth):
    """Level for a node at ``depth``: ``alpha/2`` at the root, ``alpha/2^(2 depth + 1)`` below."""
    return alpha / 2.0 if depth == 0 else alpha / 2.0 ** (2 * depth + 1)


def _prepare(data, opts, stream, min_node_size):
    x = np.asarray(data, dtype=float)
    if x.ndim != 2 or x.shape[0] < 16:
        raise ValueError("need data of shape (n, d) with n >= 16")
    if not np.all(np.isfinite(x)):
        raise ValueError("data contain non-finite values")
    h = split_halves(x.shape[0], (opts or RiftOptions()).split_ratio, stream.derive("split"))
    if min_node_size is None:
        min_node_size = 2 * (x.shape[1] + 2)
    root = ClusterNode(1, 0, None, Region(), h.d1_indices, h.d2_indices)
    return x, {1: root}, int(min_node_size)


def _split_node(tree_nodes, node, x, rule):
    b1 = split_branch(rule, x[node.d1_idx])
    b2 = split_branch(rule, x[node.d2_idx])
    if b1.min() == b1.max():
        node.note = "degenerate split"
        return False
    node.split = rule
    node.children = (2 * node.id, 2 * node.id + 1)
    for b, cid in enumerate(node.children):
        tree_nodes[cid] = ClusterNode(cid, node.depth + 1, node.id, node.region.child(rule, b),
                                      node.d1_idx[b1 == b], node.d2_idx[b2 == b])
    return True


def _testable(node, min_node_size):
    return len(node.d1_idx) >= min_node_size and len(node.d2_idx) >= min_node_size


def _run_node(method, node, x, rule, level, c, opts, B, stream, truncate):
    uses_region = method in RIFT_FAMILY or method == "sigclust-trunc"
    region = node.region if (truncate and uses_region and node.depth > 0) else None
    return node_test(method, x[node.d1_idx], x[node.d2_idx], rule, level, region, c, opts, B,
                     stream.derive("node", node.id, "test"))


def topdown_cluster(data, method="mrift", alpha=0.05, c=None, opts=None, rng=None, min_node_size=None,
                    max_depth=30, B=1000, truncate=True):
    """Grow a tree from the root, splitting while the node test rejects.

    A node at depth ``k`` is tested at level ``alpha/2`` (root) or
    ``alpha/2^(2k+1)``; nodes whose ``D1`` or ``D2`` has fewer than
    ``min_node_size`` points (default ``2(d+2)``) are leaves.

    Parameters
    ----------
    data : array_like, shape (n, d)
    method : str
        One of ``relfit.methods.METHODS``.
    alpha : float
    c : FitConstraints, optional
    opts : RiftOptions, optional
    rng : RngStream, Generator or int, optional
    min_node_size : int, optional
    max_depth : int
    B : int
        Bootstrap size for SigClust nodes.
    truncate : bool
        Renormalize densities over the node region at non-root nodes.

    Returns
    -------
    ClusterTree
    """
    check_method(method)
    s = as_stream(rng)
    x, nodes, min_node_size = _prepare(data, opts, s, min_node_size)
    queue = [1]
    while queue:
        node = nodes[queue.pop(0)]
        if not _testable(node, min_node_size):
            node.note = "too small"
            continue
        if node.depth >= max_depth:
            node.note = "max depth"
            continue
        rule = split_rule(method, x[node.d1_idx], c, opts, s.derive("node", node.id, "fit"))
        node.level = topdown_level(alpha, node.depth)
        node.outcome = _run_node(method, node, x, rule, node.level, c, opts, B, s, truncate)
        if node.outcome.reject and _split_node(nodes, node, x, rule):
            queue.extend(node.children)
    return ClusterTree(nodes, alpha, method, "topdown", data=x)


def grow_full_tree(data, c=None, max_depth=3, min_node_size=None, rng=None, method="mrift", opts=None):
    """Split every testable node without testing, up to ``max_depth``.

    The split rule family follows ``method`` (2-means for SigClust, a
    two-component mixture otherwise).
    """
    check_method(method)
    s = as_stream(rng)
    x, nodes, min_node_size = _prepare(data, opts, s, min_node_size)
    queue = [1]
    while queue:
        node = nodes[queue.pop(0)]
        if node.depth >= max_depth:
            continue
        if not _testable(node, min_node_size):
            node.note = "too small"
            continue
        rule = split_rule(method, x[node.d1_idx], c, opts, s.derive("node", node.id, "fit"))
        if _split_node(nodes, node, x, rule):
            queue.extend(node.children)
    return ClusterTree(nodes, None, method, "bottomup", n_nodes_grown=len(nodes), data=x)


def prune_bottom_up(tree, method=None, alpha=0.05, rng=None, c=None, opts=None, B=1000, truncate=True):
    """Test internal nodes deepest first at level ``alpha / N_nodes`` and prune failures.

    ``N_nodes`` is the node count of the input tree.  A node that fails to
    reject loses both children and their subtrees.  Returns a new tree.
    """
    if tree.data is None:
        raise ValueError("tree lacks the data and D2 bookkeeping needed for pruning")
    method = check_method(method or tree.method)
    s = as_stream(rng)
    x = tree.data
    nodes = {i: _copy_node(n) for i, n in tree.nodes.items()}
    level = alpha / len(nodes)
    internal = sorted((n for n in nodes.values() if n.children), key=lambda n: (-n.depth, n.id))
    for node in internal:
        if node.id not in nodes:
            continue
        node.level = level
        node.outcome = _run_node(method, node, x, node.split, level, c, opts, B, s, truncate)
        if not node.outcome.reject:
            for cid in node.children:
                for j in _subtree(nodes, cid):
                    nodes.pop(j)
            node.children = ()
            node.split = None
    return ClusterTree(nodes, alpha, method, "bottomup", n_nodes_grown=tree.n_nodes_grown, data=x)


def bottomup_cluster(data, method="mrift", alpha=0.05, c=None, opts=None, rng=None, min_node_size=None,
                     max_depth=3, B=1000, truncate=True):
    """Grow the full tree on ``D1`` and prune it with tests on ``D2``."""
    s = as_stream(rng)
    grown = grow_full_tree(data, c, max_depth, min_node_size, s, method, opts)
    return prune_bottom_up(grown, method, alpha, s, c, opts, B, truncate)


def _subtree(nodes, node_id):
    out, stack = [], [node_id]
    while stack:
        i = stack.pop()
        out.append(i)
        stack.extend(nodes[i].children)
    return out


def _copy_node(n):
    return ClusterNode(n.id, n.depth, n.parent, n.region, n.d1_idx, n.d2_idx, n.split, n.outcome,
                       tuple(n.children), n.level, n.note)


def assign_labels(tree, data):
    """Route each row from the root to a leaf; returns leaf ids."""
    x = np.asarray(data, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    root = tree.nodes[tree.root]
    if root.split is not None and x.shape[1] != root.split.dim:
        raise ValueError(f"data have dimension {x.shape[1]}, tree expects {root.split.dim}")
    labels = np.full(x.shape[0], tree.root, dtype=np.int64)
    stack = [(tree.root, np.arange(x.shape[0]))]
    while stack:
        i, idx = stack.pop()
        node = tree.nodes[i]
        if not node.children or len(idx) == 0:
            labels[idx] = i
            continue
        b = split_branch(node.split, x[idx])
        stack.append((node.children[0], idx[b == 0]))
        stack.append((node.children[1], idx[b == 1]))
    return labels


def spent_alpha(tree):
    """Sum of the levels of all tested nodes."""
    return float(sum(n.level for n in tree.nodes.values() if n.outcome is not None))


def _fmt(v):
    if v is None:
        return "null"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v if np.isfinite(v) else "null"
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, dict):
        return "{" + ", ".join(f"{_fmt(str(k))}: {_fmt(w)}" for k, w in v.items()) + "}"
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(w) for w in (v.tolist() if isinstance(v, np.ndarray) else v)) + "]"
    raise TypeError(f"cannot serialize {type(v).__name__}")


def tree_to_json(tree):
    """Serialize a tree with a fixed key order and 17 significant digits for reals."""
    nodes = []
    for i in sorted(tree.nodes):
        n = tree.nodes[i]
        mix = None
        if n.split is not None:
            mix = {"weights": n.split.weights, "means": n.split.means, "covariances": n.split.covs}
        nodes.append({
            "id": n.id, "depth": n.depth, "parent": n.parent, "children": list(n.children),
            "method": tree.method, "level": n.level,
            "p_value": None if n.outcome is None else n.outcome.p_value,
            "reject": None if n.outcome is None else n.outcome.reject,
            "n_d1": len(n.d1_idx), "n_d2": len(n.d2_idx), "mixture": mix,
        })
    top = {"method": tree.method, "direction": tree.direction, "alpha": tree.alpha, "root": tree.root,
           "n_leaves": tree.n_leaves, "nodes": nodes}
    return _fmt(top) + "\n"


def tree_from_json(text):
    """Rebuild a tree (splits, levels, decisions) from :func:`tree_to_json` output.

    Index sets are not stored, so the result supports routing but not pruning.
    """
    obj = json.loads(text)
    nodes = {}
    for rec in sorted(obj["nodes"], key=lambda r: r["id"]):
        mix = rec["mixture"]
        split = None if mix is None else Mixture.from_arrays(mix["weights"], mix["means"], mix["covariances"])
        parent = rec["parent"]
        region = Region() if parent is None else nodes[parent].region.child(
            nodes[parent].split, nodes[parent].children.index(rec["id"]))
        outcome = None
        if rec["p_value"] is not None:
            outcome = TestOutcome(obj["method"], float("nan"), rec["p_value"], rec["reject"], rec["level"])
        nodes[rec["id"]] = ClusterNode(rec["id"], rec["depth"], parent, region, np.zeros(rec["n_d1"], int),
                                       np.zeros(rec["n_d2"], int), split, outcome, tuple(rec["children"]),
                                       rec["level"])
    return ClusterTree(nodes, obj["alpha"], obj["method"], obj["direction"], obj["root"])
