"""Choosing the number of mixture components.

The sequential relative-fit procedure asks, for j = 1, 2, ..., whether any
larger fit beats the order-j fit on held-out data, with a Bonferroni
threshold over the comparators.  AIC and BIC are shown for comparison.

Run: python3 demos/choose_k.py
"""

from relfit.rng import RngStream
from relfit.scenarios import ScenarioSpec, gen_scenario
from relfit.select import ic_select, srift_select

x, _ = gen_scenario(ScenarioSpec("square", 2, {"delta": 6.0, "n_per_cluster": 100}), RngStream(5))
res = srift_select(x, K_n=8, distance="kl", rng=RngStream(5).derive("select"))
print("S-RIFT trace")
for e in res.per_j:
    print(f"  j={e['j']}  max Gamma={e['max_gamma']:.3f}  rejected={e['rejected']}")
print(f"S-RIFT chooses k={res.k_hat}")
for crit in ("aic", "bic"):
    print(f"{crit.upper()} chooses k={ic_select(x, 8, crit, rng=RngStream(5))}")
