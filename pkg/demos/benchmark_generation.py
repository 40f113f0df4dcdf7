"""
Benchmark instances and sampled worlds
======================================

Instances hold what is known in advance: windows, durations, expected profit.
A sampled world adds what is revealed while imaging: actual profit, actual
memory rate, cloud cover. A manifest records every seed, so a benchmark can be
rebuilt file for file.
"""

import tempfile
from pathlib import Path

import numpy as np

from uaeos.generator import build_manifest, materialize, profile_cells, scenario_grid
from uaeos.model import load_envs, load_instance

print(len(scenario_grid()), "scenario cells in the full grid;", len(profile_cells("desk")), "in the desk profile")

manifest = build_manifest(7, "desk", cells=[(50, 2000, 1024, 0.2)], counts=dict(train=2, valid=1, test=1, envs=3))
with tempfile.TemporaryDirectory() as tmp:
    root = materialize(manifest, Path(tmp) / "bench")
    inst = load_instance(root / "50_2000_1024_0.2" / "train" / "instance_0.json")
    envs = load_envs(root / "50_2000_1024_0.2" / "train" / "envs_0.json")

a = inst.arrays
print(f"durations {a.du.mean():.1f} +- {a.du.std():.1f} s, expected profit {a.profit.mean():.1f}")
for e in envs:
    ratio = e.actual_profit / a.profit
    print(f"world {e.seed}: visible {e.visible.mean():.2f}, profit ratio {ratio.mean():.3f}, "
          f"memory rate {e.actual_rate.mean():.3f}")
print("rate spread:", np.round(np.std([e.actual_rate for e in envs]), 4))
