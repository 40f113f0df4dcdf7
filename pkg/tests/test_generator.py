import json

import numpy as np
import pytest

from uaeos.generator import (
    MAX_SWEEP_RATE,
    ScenarioConfig,
    build_manifest,
    gamma_sample,
    generate_benchmark,
    generate_instance,
    profile_cells,
    replay_manifest,
    sample_environment,
    scenario_grid,
)


@pytest.mark.parametrize("mean, shape", [(20.0, 30.0), (3.5, 350.0)])
def test_gamma_moments(mean, shape):
    x = gamma_sample(mean, shape, np.random.default_rng(1), size=100_000)
    beta = mean / shape
    assert abs(x.mean() - mean) / mean < 0.02
    assert abs(x.var() - shape * beta**2) / (shape * beta**2) < 0.10


def test_gamma_rejects_bad_parameters():
    with pytest.raises(ValueError):
        gamma_sample(0.0, 30.0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        gamma_sample(1.0, -1.0, np.random.default_rng(0))


def test_generated_instance_postconditions():
    cfg = ScenarioConfig(50, 2000, 1024, 0.2, seed=8)
    inst = generate_instance(cfg)
    assert inst.nt == 50
    ws = [t.ws for t in inst.tasks]
    assert ws == sorted(ws)
    for t in inst.tasks:
        assert 0 <= t.ws and t.we <= 2000 and t.du <= t.we - t.ws
        assert 60.0 <= t.we - t.ws <= 180.0
        assert abs(t.profile.pitch_rate) <= MAX_SWEEP_RATE
        assert t.profile.pitch0 == 27.0 and abs(t.profile.roll0) <= 27.0 and t.profile.yaw0 == 0.0
        assert t.du >= 5.0 and t.expected_profit >= 1.0
    assert inst.delay_monotone()


def test_duration_and_profit_means():
    du, profit = [], []
    for seed in range(40):
        inst = generate_instance(ScenarioConfig(200, 6000, 8192, 0.1, seed=seed))
        du.extend(t.du for t in inst.tasks)
        profit.extend(t.expected_profit for t in inst.tasks)
    du, profit = np.array(du), np.array(profit)
    assert abs(du.mean() - 25.0) < 0.1 and abs(du.std() - 3.0) < 0.1
    assert abs(profit.mean() - 50.0) < 0.4


def test_generation_is_deterministic():
    cfg = ScenarioConfig(100, 4000, 2048, 0.3, seed=99)
    assert generate_instance(cfg) == generate_instance(cfg)
    a = sample_environment(generate_instance(cfg), 0.3, 5)
    b = sample_environment(generate_instance(cfg), 0.3, 5)
    assert np.array_equal(a.actual_profit, b.actual_profit) and np.array_equal(a.visible, b.visible)


def test_visibility_frequency():
    inst = generate_instance(ScenarioConfig(200, 6000, 8192, 0.3, seed=0))
    vis = np.concatenate([sample_environment(inst, 0.3, s).visible for s in range(500)])
    assert vis.size == 100_000
    assert abs(vis.mean() - 0.7) <= 0.01


def test_full_cloud_cover_gives_no_profit():
    from uaeos.policy import parse, TreePolicy
    from uaeos.simulator import rollout

    inst = generate_instance(ScenarioConfig(50, 2000, 1024, 1.0, seed=0))
    env = sample_environment(inst, 1.0, 0)
    assert not env.visible.any()
    assert rollout(inst, env, TreePolicy(parse("RP"))).total_profit == 0.0


def test_scenario_grid_size_and_mmc_sets():
    grid = scenario_grid()
    assert len(grid) == 108 and len(set(grid)) == 108
    assert len(profile_cells("desk")) == 9
    assert all(c[0] == 50 and c[3] == 0.2 for c in profile_cells("desk"))
    with pytest.raises(ValueError):
        ScenarioConfig(50, 2000, 8192, 0.1)


def test_manifest_seeds_stable_under_filtering():
    full = build_manifest(3, "desk")
    one = build_manifest(3, "desk", cells=[(50, 4000, 2048, 0.2)])
    match = [c for c in full["cells"] if c["id"] == one["cells"][0]["id"]]
    assert match[0]["splits"] == one["cells"][0]["splits"]


def test_manifest_replay_and_collision(tmp_path):
    cells = [(50, 2000, 1024, 0.2)]
    counts = dict(train=2, valid=1, test=1, envs=2)
    generate_benchmark(7, tmp_path / "a", "desk", cells, counts)
    replay_manifest(tmp_path / "a" / "manifest.json", tmp_path / "b")
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*.json"))
    assert len(files) == 2 * (2 + 1 + 1) + 1
    for rel in files:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()
    envs = json.loads((tmp_path / "a" / "50_2000_1024_0.2" / "train" / "envs_0.json").read_text())
    assert len(envs["environments"]) == 2
    with pytest.raises(FileExistsError):
        generate_benchmark(7, tmp_path / "a", "desk", cells, counts)
