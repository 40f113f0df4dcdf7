"""
Rolling out a policy and checking the schedule
==============================================

A rollout builds a schedule one decision at a time. The pool is filtered, the
policy scores the survivors, and the best one is observed as early as
possible. Then the true memory use and profit of the world are revealed.
"""

from uaeos.generator import ScenarioConfig, generate_instance, sample_environment
from uaeos.model import validate_schedule
from uaeos.policy import TreePolicy, parse
from uaeos.simulator import rollout

inst = generate_instance(ScenarioConfig(nt=50, st=2000, mmc=1024, prob_cloud=0.2, seed=4))
env = sample_environment(inst, prob_cloud=0.2, seed=11)
print(f"{inst.nt} tasks, {int(env.visible.sum())} visible in this world")

# profit density, discounted by how long we would wait for the task
policy = TreePolicy(parse("(- RPPU (* 5.0 TIST))"))
out = rollout(inst, env, policy)

s = out.schedule
print(f"status {s.status}, {len(s.observations)} observations, profit {s.realized_profit:.1f}")
print(f"memory used {s.memory_used:.1f} of {inst.mmc:.0f}")
for o in s.observations[:5]:
    print(f"  task {o.task_id:2d}  [{o.os:8.2f}, {o.oe:8.2f}]")

# the independent checker reports every violated constraint (none here)
report = validate_schedule(inst, env, s)
print("feasible:", report.feasible)
