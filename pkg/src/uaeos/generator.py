"""Synthetic benchmark instances and stochastic environment realizations.

Visibility geometry is synthetic: each task's pitch sweeps linearly from
+bound to -bound across its visible window, roll is constant and yaw is 0.
Windows are at least 60 s long, which keeps the sweep rate at or below
0.9 deg/s, under the slowest maneuver rate of the transition model.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .model import (
    DEFAULT_ATTITUDE_BOUND,
    DEFAULT_RATE,
    AttitudeProfile,
    EnvironmentRealization,
    Instance,
    Task,
    TransitionModel,
    dump_json,
    save_envs,
    save_instance,
)

GENERATOR_VERSION = "1.0"

NT_VALUES = (50, 100, 150, 200)
ST_VALUES = (2000, 4000, 6000)
CLOUD_VALUES = (0.1, 0.2, 0.3)
MMC_BY_NT = {
    50: (1024, 2048, 4096),
    100: (2048, 4096, 6144),
    150: (2048, 4096, 6144),
    200: (4096, 6144, 8192),
}

ALPHA_PROFIT = 30.0
ALPHA_RATE = 350.0
DU_MEAN, DU_SD, DU_FLOOR = 25.0, 3.0, 5.0
PROFIT_SD, PROFIT_FLOOR = 10.0, 1.0
WINDOW_MIN, WINDOW_MAX = 60.0, 180.0
MAX_SWEEP_RATE = 0.9


@dataclass(frozen=True)
class ScenarioConfig:
    nt: int
    st: float
    mmc: float
    prob_cloud: float
    seed: int = 0

    def __post_init__(self):
        if self.nt not in MMC_BY_NT:
            raise ValueError(f"NT must be one of {sorted(MMC_BY_NT)}")
        if self.mmc not in MMC_BY_NT[self.nt]:
            raise ValueError(f"MMC {self.mmc} is not in the set for NT={self.nt}: {MMC_BY_NT[self.nt]}")
        if not 0.0 <= self.prob_cloud <= 1.0:
            raise ValueError("prob_cloud must be a probability")
        if self.st <= WINDOW_MAX:
            raise ValueError("horizon too short for the window model")

    @property
    def cell_id(self) -> str:
        return f"{self.nt}_{int(self.st)}_{int(self.mmc)}_{self.prob_cloud:g}"


def scenario_grid() -> list[tuple[int, int, int, float]]:
    """All (NT, ST, MMC, prob_cloud) combinations, 4 x 3 x 3 x 3 = 108."""
    return [
        (nt, st, mmc, cloud)
        for nt in NT_VALUES
        for st in ST_VALUES
        for mmc in MMC_BY_NT[nt]
        for cloud in CLOUD_VALUES
    ]


def gamma_sample(mean: float, shape: float, rng: np.random.Generator, size=None):
    """Gamma draw with the given mean and shape (scale = mean / shape)."""
    if not mean > 0 or not shape > 0:
        raise ValueError("gamma mean and shape must be positive")
    return rng.gamma(shape, mean / shape, size=size)


def generate_instance(config: ScenarioConfig, name: str = "") -> Instance:
    rng = np.random.default_rng(config.seed)
    nt, st = config.nt, float(config.st)
    bound = DEFAULT_ATTITUDE_BOUND
    rows = []
    for _ in range(nt):
        du = max(DU_FLOOR, rng.normal(DU_MEAN, DU_SD))
        profit = max(PROFIT_FLOOR, rng.normal(2.0 * du, PROFIT_SD))
        low = max(du + 10.0, WINDOW_MIN)
        for _attempt in range(100):
            length = rng.uniform(low, WINDOW_MAX)
            if 2 * bound / length <= MAX_SWEEP_RATE:
                break
        else:
            length = 2 * bound / MAX_SWEEP_RATE
        ws = rng.uniform(0.0, st - length)
        we = ws + length
        roll = rng.uniform(-bound, bound)
        rows.append((ws, we, du, profit, roll))
    rows.sort(key=lambda r: r[0])
    tasks = []
    for i, (ws, we, du, profit, roll) in enumerate(rows):
        rate = -2 * bound / (we - ws)
        tasks.append(Task(i, ws, we, du, profit, AttitudeProfile(bound, rate, roll)))
    inst = Instance(
        tasks=tuple(tasks), horizon=st, mmc=float(config.mmc), cr=DEFAULT_RATE, transition=TransitionModel(),
        pitch_bound=bound, roll_bound=bound, yaw_bound=0.0, name=name or config.cell_id,
    )
    assert inst.delay_monotone()
    return inst


def sample_environment(instance: Instance, prob_cloud: float, seed: int) -> EnvironmentRealization:
    """One world: Gamma profits (shape 30), Gamma write rates (shape 350), cloud cover w.p. prob_cloud."""
    rng = np.random.default_rng(seed)
    n = instance.nt
    expected = instance.arrays.profit
    profit = rng.gamma(ALPHA_PROFIT, expected / ALPHA_PROFIT)
    rate = gamma_sample(instance.cr, ALPHA_RATE, rng, size=n)
    visible = rng.random(n) >= prob_cloud
    return EnvironmentRealization(profit, rate, visible, seed=int(seed))


# ----------------------------------------------------------------- benchmark

PROFILES = {
    # name: (train, valid, test, envs per instance, cells filter)
    "paper": dict(train=100, valid=20, test=50, envs=1, nt=NT_VALUES, clouds=CLOUD_VALUES),
    "desk": dict(train=20, valid=10, test=10, envs=1, nt=(50,), clouds=(0.2,)),
}


def profile_cells(profile: str) -> list[tuple[int, int, int, float]]:
    p = PROFILES[profile]
    return [c for c in scenario_grid() if c[0] in p["nt"] and c[3] in p["clouds"]]


def _split_seeds(seq: np.random.SeedSequence, count: int, envs: int) -> list[dict]:
    out = []
    for child in seq.spawn(count):
        inst_seq, env_seq = child.spawn(2)
        out.append({
            "instance_seed": int(inst_seq.generate_state(1)[0]),
            "env_seeds": [int(s.generate_state(1)[0]) for s in env_seq.spawn(envs)],
        })
    return out


def build_manifest(master_seed: int, profile: str = "desk", cells: Iterable | None = None,
                   counts: dict | None = None) -> dict:
    p = dict(PROFILES[profile])
    if counts:
        p.update(counts)
    chosen = list(cells) if cells is not None else profile_cells(profile)
    root = np.random.SeedSequence(master_seed)
    entries = []
    # one child per grid cell, keyed by grid position so filtering keeps seeds stable
    grid = scenario_grid()
    children = root.spawn(len(grid))
    for cell in chosen:
        nt, st, mmc, cloud = cell
        cell_seq = children[grid.index(tuple(cell))]
        tr, va, te = cell_seq.spawn(3)
        entries.append({
            "id": ScenarioConfig(nt, st, mmc, cloud).cell_id,
            "nt": nt, "st": st, "mmc": mmc, "prob_cloud": cloud,
            "splits": {
                "train": _split_seeds(tr, p["train"], p["envs"]),
                "valid": _split_seeds(va, p["valid"], p["envs"]),
                "test": _split_seeds(te, p["test"], p["envs"]),
            },
        })
    return {
        "schema": "uaeos.manifest",
        "generator_version": GENERATOR_VERSION,
        "master_seed": master_seed,
        "profile": profile,
        "counts": {k: p[k] for k in ("train", "valid", "test", "envs")},
        "cells": entries,
    }


def materialize(manifest: dict, out: str | Path) -> Path:
    """Write every instance/environment file listed in ``manifest`` under ``out``."""
    out = Path(out)
    if out.exists() and any(out.iterdir()):
        raise FileExistsError(f"{out} exists and is not empty; refusing to overwrite")
    out.mkdir(parents=True, exist_ok=True)
    for cell in manifest["cells"]:
        for split, items in cell["splits"].items():
            d = out / cell["id"] / split
            d.mkdir(parents=True, exist_ok=True)
            for i, item in enumerate(items):
                cfg = ScenarioConfig(cell["nt"], cell["st"], cell["mmc"], cell["prob_cloud"], item["instance_seed"])
                inst = generate_instance(cfg, name=f"{cell['id']}/{split}/{i}")
                envs = [sample_environment(inst, cell["prob_cloud"], s) for s in item["env_seeds"]]
                save_instance(inst, d / f"instance_{i}.json")
                save_envs(envs, d / f"envs_{i}.json")
    dump_json(manifest, out / "manifest.json")
    return out


def generate_benchmark(master_seed: int, out: str | Path, profile: str = "desk", cells=None,
                       counts: dict | None = None) -> dict:
    manifest = build_manifest(master_seed, profile, cells, counts)
    materialize(manifest, out)
    return manifest


def replay_manifest(manifest_path: str | Path, out: str | Path) -> Path:
    return materialize(json.loads(Path(manifest_path).read_text()), out)
