"""
Cumulative profit along a schedule
==================================

For one instance and one world, compare how profit accumulates under a few
policies. The rows are plot-ready: one step per completed observation.
"""

import csv
import sys

from uaeos.baselines import BaselinePolicy, BaselineSpec
from uaeos.experiments import export_trajectory
from uaeos.generator import ScenarioConfig, generate_instance, sample_environment
from uaeos.policy import TreePolicy, parse

inst = generate_instance(ScenarioConfig(50, 2000, 2048, 0.2, seed=21))
env = sample_environment(inst, 0.2, 5)

policies = {
    "LAH1": BaselinePolicy(BaselineSpec("LAH1")),
    "MDH1": BaselinePolicy(BaselineSpec("MDH1")),
    "tree": TreePolicy(parse("(- RPPU (* 5.0 TIST))")),
}
rows = export_trajectory(inst, env, policies)

for name in policies:
    series = [r for r in rows if r["policy"] == name]
    print(f"{name}: {len(series) - 1} observations, final profit {series[-1]['cumulative_profit']:.1f}")

w = csv.DictWriter(sys.stdout, fieldnames=["policy", "t", "cumulative_profit"])
w.writeheader()
w.writerows(rows[:6])
