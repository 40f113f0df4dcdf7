"""
Evolving a scheduling policy
============================

A small run on one scenario: the population is scored on one mini-batch per
generation. The best individual of each generation is checked on held-out
instances, and the best of those is kept.
"""

from uaeos.baselines import BaselinePolicy, BaselineSpec
from uaeos.evolution import EvolutionConfig, evolve
from uaeos.generator import ScenarioConfig, generate_instance, sample_environment
from uaeos.policy import TreePolicy, serialize
from uaeos.simulator import mean_profit


def pairs(seeds):
    out = []
    for s in seeds:
        inst = generate_instance(ScenarioConfig(50, 2000, 1024, 0.2, seed=s))
        out.append((inst, sample_environment(inst, 0.2, 1000 + s)))
    return out


train, valid, test = pairs(range(8)), pairs(range(8, 12)), pairs(range(12, 16))

config = EvolutionConfig(population_size=12, generations=8, batches=4, tournament_size=3, rng_seed=1)
result = evolve(train, valid, config)

for r in result.history:
    print(f"gen {r.generation}  batch {r.batch_id}  batch best {r.batch_best_fitness:7.1f}  "
          f"validation {r.validation_score:7.1f}  size {r.tree_size}")

print("picked:", serialize(result.best_tree))
print("test profit, evolved:", round(mean_profit(test, TreePolicy(result.best_tree)), 1))
print("test profit, LAH1:   ", round(mean_profit(test, BaselinePolicy(BaselineSpec("LAH1"))), 1))
