"""Hierarchical clustering with error control on four square-arranged clusters.

Top-down testing spends alpha/2 at the root and alpha/2^(2k+1) at depth k;
bottom-up growth splits to a fixed depth on one half and prunes with tests
on the other half at alpha / (number of nodes).

Run: python3 demos/cluster_tree.py
"""

import numpy as np

from relfit.rng import RngStream
from relfit.scenarios import ScenarioSpec, gen_scenario
from relfit.tree import assign_labels, bottomup_cluster, spent_alpha, topdown_cluster

x, truth = gen_scenario(ScenarioSpec("square", 2, {"delta": 6.0, "n_per_cluster": 50}), RngStream(3))

for name, build in (("top-down", topdown_cluster), ("bottom-up", bottomup_cluster)):
    tree = build(x, "mrift", 0.05, rng=RngStream(3).derive(name))
    labels = assign_labels(tree, x)
    print(f"{name}: {tree.n_leaves} leaves, alpha spent {spent_alpha(tree):.4f}")
    for node_id, node in sorted(tree.nodes.items()):
        o = node.outcome
        test = "untested" if o is None else f"p={o.p_value:.2e} at level {node.level:.4f}"
        print(f"  node {node_id:>2} depth {node.depth}  {len(node.d1_idx) + len(node.d2_idx):>3} points  {test}")
    table = np.zeros((tree.n_leaves, 4), dtype=int)
    leaf_ids = {leaf: i for i, leaf in enumerate(tree.leaves())}
    for lab, t in zip(labels, truth):
        table[leaf_ids[lab], t] += 1
    print("  leaf x true cluster counts:")
    print("\n".join("   " + " ".join(f"{v:>3}" for v in row) for row in table))
