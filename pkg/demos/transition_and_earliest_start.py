"""
Maneuver times and the earliest feasible start
==============================================

A satellite sees each target only inside its visible window, and its attitude
follows the target while it looks. Switching targets costs a maneuver whose
duration grows with the attitude change. Here we look at that cost and at how
the simulator finds the first moment a new observation can begin.
"""

import numpy as np

from uaeos.model import Attitude, AttitudeProfile, Task, TransitionModel, attitude_at, transition_time
from uaeos.simulator import delay, earliest_start_counted

table = TransitionModel()

# maneuver time for a few total attitude changes (degrees)
for dg in (0, 14.999, 15, 39.999, 40, 90, 120):
    print(f"dg={dg:>7}: {transition_time(table, dg):.4f} s")

# the time jumps up where a faster segment starts, so delay is only monotone
# between those boundaries
print("longest maneuver within +-27 deg:", table.sup_on(4 * 27.0), "s")

# a target whose pitch sweeps from +27 to -27 over two minutes
task = Task(0, ws=0.0, we=120.0, du=20.0, expected_profit=40.0,
            profile=AttitudeProfile(27.0, -54.0 / 120.0, 10.0))
prev = Attitude(-20.0, -10.0, 0.0)
prev_end = 5.0

ts = np.linspace(prev_end, task.we - task.du, 6)
print("delay samples:", [round(delay(prev_end, prev, t, task, table), 2) for t in ts])

os, evals = earliest_start_counted(prev_end, prev, task, table)
print(f"earliest start {os:.4f} s after {evals} delay evaluations")
print("attitude at that moment:", attitude_at(task, os))
