import math

import numpy as np
import pytest

import oracles
from conftest import const_task, expected_env, make_instance, random_small_instance, sweep_task
from uaeos.model import IMAGING_FAILURE, Attitude, EnvironmentRealization, TransitionModel, validate_schedule
from uaeos.simulator import (
    DecisionContext,
    choose,
    delay,
    earliest_start,
    earliest_start_counted,
    filter_pool,
    initial_context,
    rollout,
)

TABLE = TransitionModel()
ZERO = Attitude(0.0, 0.0, 0.0)


def priority(order):
    rank = {tid: n for n, tid in enumerate(order)}
    return lambda ctx, cands: np.array([-rank[int(i)] for i in cands.ids], dtype=float)


# --------------------------------------------------------------------- delay


@pytest.mark.parametrize("os, expected", [(105.0, 0.0), (110.0, -5.0), (102.0, 3.0)])
def test_delay_examples(os, expected):
    task = const_task(0, 50, 300, 25)
    assert delay(100.0, ZERO, os, task, TABLE) == expected


def test_delay_non_increasing_on_generated_instances(small_cell):
    rng = np.random.default_rng(0)
    for inst, _ in small_cell:
        for _ in range(40):
            a, b = rng.choice(inst.nt, size=2, replace=False)
            prev, task = inst.tasks[a], inst.tasks[b]
            prev_att = Attitude(*(float(x) for x in (prev.profile.pitch0, prev.profile.roll0, 0.0)))
            prev_end = rng.uniform(task.ws - 50, task.we)
            lo = max(task.ws, prev_end)
            ts = np.linspace(lo, task.we, 200)
            d = oracles.real_delay(prev_end, prev_att, task, ts)
            # within one transition segment the delay can only fall
            segs = np.array([oracles.seg_of(g) for g in oracles.angle(prev_att, task, ts)])
            same = segs[1:] == segs[:-1]
            assert np.all(np.diff(d)[same] <= 1e-9)


# ------------------------------------------------------------ earliest start


def test_earliest_start_constant_attitudes():
    got = earliest_start(100.0, ZERO, const_task(0, 50, 300, 25), TABLE)
    assert 105.0 <= got <= 105.0 + 1e-3


def test_earliest_start_window_closes_before_prev_end():
    # r = 130 - 60 = 70 < l = 100
    assert earliest_start_counted(100.0, ZERO, const_task(0, 50, 130, 60), TABLE) == (None, 0)


def test_earliest_start_sweeping_pitch_matches_scan():
    task = sweep_task(0, 0.0, 120.0, 20.0, roll=10.0)
    prev = Attitude(-20.0, -10.0, 0.0)
    prev_end = 5.0
    l, r = max(task.ws, prev_end), task.we - task.du
    assert delay(prev_end, prev, l, task, TABLE) > 0 > delay(prev_end, prev, r, task, TABLE)
    got = earliest_start(prev_end, prev, task, TABLE)
    ref = oracles.scan_earliest_start(prev_end, prev, task)
    assert abs(got - ref) <= 1e-3
    assert delay(prev_end, prev, got, task, TABLE) <= 0


def test_earliest_start_handles_upward_jump():
    # transition angle falls through 40 deg; just above it the 16 + dg/2.5 segment applies
    task = sweep_task(0, 0.0, 150.0, 20.0)
    prev = Attitude(-27.0, 20.0, 0.0)
    got = earliest_start(0.0, prev, task, TABLE)
    ref = oracles.scan_earliest_start(0.0, prev, task)
    assert got is not None and abs(got - ref) <= 1e-3


def test_start_on_segment_boundary_agrees_with_validator():
    # the transition angle reaches exactly 40 deg at a candidate start; both sides must use the upper segment
    from uaeos.model import AttitudeProfile, Task, attitude_at

    prev = Task(8, 262.0636860001413, 370.40776884342125, 21.219508119163617, 59.779608254005666,
                AttitudeProfile(27.0, -0.49841208290175987, 11.391839660506946))
    task = Task(11, 335.7379342629037, 397.3416442401077, 23.10566645514546, 41.888380273198074,
                AttitudeProfile(27.0, -0.8765705834921679, -11.889515244182833))
    prev_end = 316.0712963991858
    att = attitude_at(prev, prev_end)
    os = earliest_start(prev_end, att, task, TABLE)
    assert delay(prev_end, att, os, task, TABLE) <= 0
    ref = oracles.scan_earliest_start(prev_end, att, task)
    assert abs(os - ref) <= 1e-3


def test_earliest_start_random_pairs_match_scan_and_bound_evals(small_cell):
    rng = np.random.default_rng(7)
    for inst, _ in small_cell:
        for _ in range(75):
            a, b = rng.choice(inst.nt, size=2, replace=False)
            prev, task = inst.tasks[a], inst.tasks[b]
            t_prev = rng.uniform(prev.ws, prev.we)
            p = prev.profile
            prev_att = Attitude(p.pitch0 + p.pitch_rate * (t_prev - prev.ws), p.roll0, 0.0)
            prev_end = rng.uniform(task.ws - 60.0, task.we)
            got, evals = earliest_start_counted(prev_end, prev_att, task, TABLE)
            ref = oracles.scan_earliest_start(prev_end, prev_att, task)
            assert (got is None) == (ref is None)
            if got is not None:
                assert abs(got - ref) <= 1e-3
                assert delay(prev_end, prev_att, got, task, TABLE) <= 0
            assert evals <= 40


def test_single_segment_search_within_log_bound():
    task = const_task(0, 0, 2000, 25, pitch=5.0)
    prev_end = 10.0
    got, evals = earliest_start_counted(prev_end, ZERO, task, TABLE)
    l, r = prev_end, task.we - task.du
    assert got == pytest.approx(20.0, abs=1e-3)
    assert evals <= math.ceil(math.log2((r - l) / 1e-3)) + 2


# -------------------------------------------------------------------- filter


def _ctx(inst, env, t_now, remaining=None, prev=ZERO):
    return DecisionContext(inst, env, t_now, prev, t_now, inst.mmc if remaining is None else remaining,
                           list(range(inst.nt)))


def test_filter_no_memory_empties_pool():
    inst = make_instance([const_task(0, 0, 100, 20), const_task(1, 50, 200, 20)])
    c = filter_pool(_ctx(inst, expected_env(inst), 0.0, remaining=0.0), slack_m=0.5)
    assert len(c) == 0 and set(c.expired) == {0, 1}


def test_filter_drops_timed_out_task():
    inst = make_instance([const_task(0, 0, 100, 20), const_task(1, 50, 300, 20)])
    c = filter_pool(_ctx(inst, expected_env(inst), 100 - 20 + 1), 1.0)
    assert list(c.ids) == [1] and c.expired == (0,)


def test_filter_three_tasks_one_closed():
    inst = make_instance([
        sweep_task(0, 0, 90, 20),
        sweep_task(1, 60, 200, 20, roll=15.0),
        sweep_task(2, 100, 260, 25, roll=-20.0),
    ])
    prev = Attitude(10.0, 5.0, 0.0)
    ctx = _ctx(inst, expected_env(inst), 80.0, prev=prev)
    c = filter_pool(ctx)
    assert list(c.ids) == [1, 2] and c.expired == (0,)
    for tid, os in zip(c.ids, c.starts):
        ref = oracles.scan_earliest_start(80.0, prev, inst.tasks[tid])
        assert abs(os - ref) <= 1e-3


def test_filter_complete_and_sound(small_cell):
    for inst, env in small_cell:
        # walk a rollout and check every decision point
        ctx = initial_context(inst, env)
        for _ in range(12):
            c = filter_pool(ctx)
            kept = set(int(i) for i in c.ids)
            for tid in ctx.pool:
                task = inst.tasks[tid]
                ref = oracles.scan_earliest_start(ctx.prev_end, ctx.prev_attitude, task)
                fits = inst.cr * task.du <= ctx.remaining_memory
                assert (tid in kept) == (ref is not None and fits), tid
            for tid, os in zip(c.ids, c.starts):
                task = inst.tasks[tid]
                assert os + task.du <= task.we + 1e-9
                assert delay(ctx.prev_end, ctx.prev_attitude, os, task, TABLE) <= 0
            if not len(c):
                break
            j = 0
            task = inst.tasks[int(c.ids[j])]
            ctx.pool = [i for i in ctx.pool if i not in set(c.expired) and i != task.id]
            ctx.t_now = ctx.prev_end = float(c.starts[j]) + task.du
            p = task.profile
            ctx.prev_attitude = Attitude(p.pitch0 + p.pitch_rate * (ctx.t_now - task.ws), p.roll0, 0.0)
            ctx.remaining_memory -= env.actual_rate[task.id] * task.du


# -------------------------------------------------------------------- choose


def test_choose_ties_and_non_finite():
    ids = np.array([4, 2, 9])
    assert choose([1.0, 1.0, 0.0], ids) == 1
    assert choose([np.nan, 0.5, np.inf], ids) == 0  # both non-finite become 1; id 4 beats 9
    assert choose([3.0], ids) == 1  # constant score: smallest id
    with pytest.raises(ValueError):
        choose([1.0, 2.0], ids)


# ------------------------------------------------------------------- rollout


def test_rollout_two_independent_tasks():
    inst = make_instance([const_task(0, 0, 100, 20, profit=30.0), const_task(1, 200, 400, 20, profit=50.0)])
    env = EnvironmentRealization(np.array([33.0, 41.0]), np.array([3.5, 3.5]), np.array([True, True]))
    out = rollout(inst, env, lambda ctx, c: np.zeros(len(c)))
    assert [o.task_id for o in out.schedule.observations] == [0, 1]
    assert out.total_profit == 74.0
    assert validate_schedule(inst, env, out.schedule).feasible


def test_rollout_imaging_failure():
    inst = make_instance([const_task(0, 0, 100, 20)], mmc=100.0)
    env = EnvironmentRealization(np.array([10.0]), np.array([9.0]), np.array([True]))
    out = rollout(inst, env, lambda ctx, c: np.zeros(len(c)))
    s = out.schedule
    assert s.status == IMAGING_FAILURE and s.failure_index == 0 and out.total_profit == 0.0
    assert validate_schedule(inst, env, s).feasible


def test_rollout_invisible_tasks_skipped():
    inst = make_instance([const_task(0, 0, 100, 20), const_task(1, 200, 400, 20)])
    env = EnvironmentRealization(np.array([1.0, 2.0]), np.array([3.5, 3.5]), np.array([False, True]))
    out = rollout(inst, env, lambda ctx, c: np.zeros(len(c)))
    assert [o.task_id for o in out.schedule.observations] == [1]


def test_rollout_matches_oracle_on_conflicting_four_tasks():
    rng = np.random.default_rng(3)
    for _ in range(10):
        inst = random_small_instance(rng, 4, horizon=300.0)
        env = expected_env(inst)
        for order in ([0, 1, 2, 3], [3, 2, 1, 0], list(rng.permutation(4))):
            out = rollout(inst, env, priority(order))
            ref, seq = oracles.simulate_order(inst, env, order)
            assert out.total_profit == pytest.approx(ref, abs=1e-9)
            assert [o.task_id for o in out.schedule.observations] == seq
            assert out.total_profit <= oracles.best_sequence_profit(inst, env) + 1e-9


def test_rollout_deterministic_and_valid(small_cell):
    policy = priority(list(range(50))[::-1])
    for inst, env in small_cell:
        a = rollout(inst, env, policy)
        b = rollout(inst, env, policy)
        assert a == b
        assert validate_schedule(inst, env, a.schedule).feasible
        assert list(a.cumulative_profit) == sorted(a.cumulative_profit)
