"""
Look-ahead and hand-made heuristics
===================================

The look-ahead rules pick among the k candidates that can start soonest. The
hand-made rules score profit per busy second, the wait, or switch between the
two when memory runs low. Sweeping k shows how much look-ahead helps.
"""

from uaeos.baselines import best_lah, evaluate_specs, mdh_specs
from uaeos.generator import ScenarioConfig, generate_instance, sample_environment

pairs = []
for s in range(6):
    inst = generate_instance(ScenarioConfig(50, 4000, 2048, 0.2, seed=s))
    pairs.append((inst, sample_environment(inst, 0.2, 50 + s)))

spec, value, curve = best_lah(pairs)
for s, v in curve:
    if s.k in (None, 2, 5, 10, 20):
        print(f"{s.label:12s} {v:8.1f}")
print("best look-ahead:", spec.label, round(value, 1))

for s, v in evaluate_specs(mdh_specs(), pairs):
    print(f"{s.label:12s} {v:8.1f}")
