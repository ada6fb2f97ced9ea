"""When does SigClust see a real two-cluster signal?

A symmetric mixture in coordinate 1 competes with a plain high-variance
coordinate 2.  As the noise variance grows past the thresholds, the optimal
2-means split moves to the noise coordinate and SigClust loses its power.
The relative-fit test compares models rather than split quality and keeps
its power in the high-variance scenario.

Run: python3 demos/power_phase_transition.py
"""

from relfit.scenarios import ScenarioSpec
from relfit.study import StudyConfig, run_power_study
from relfit.theory import INDETERMINATE, TheoryParams, alt_split, asymptotic_power, thresholds

print("Limiting SigClust power, sigma1^2 = 1, a = 2, n = 2000")
print(f"thresholds for sigma2^2: {', '.join(f'{t:.3f}' for t in thresholds(TheoryParams((1.0, 1.0), a=2.0)))}")
for s2 in (0.5, 1.0, 1.5, 1.9, 2.3, 3.0, 5.0):
    p = TheoryParams((1.0, s2), a=2.0, n=2000)
    res = alt_split(p)
    power = "n/a" if res.regime == INDETERMINATE else f"{asymptotic_power(p):.3f}"
    print(f"  sigma2^2={s2:<4}  regime={res.regime:<13}  power={power}")

print("\nHigh-variance nuisance coordinate: 0.5N(0,S)+0.5N(mu,S), mu=(20,0,0,0,0), S22=400, n=100")
spec = ScenarioSpec("two_mix", 5, {"mu": [20, 0, 0, 0, 0], "anisotropy": [1, 400, 1, 1, 1], "n": 100,
                                   "variant": "shifted"})
rep = run_power_study(StudyConfig(spec, ["rift", "mrift", "sigclust"], reps=20, seed=1, B=200))
for m, r in rep.rates().items():
    print(f"  {m:<9} rejection rate {r:.2f}")
