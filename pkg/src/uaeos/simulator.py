"""Constructive rollout of a scheduling policy under one sampled environment.

At each decision point the candidate pool is filtered (pruning, timeout,
capacity, earliest start), every survivor is scored by the policy, and the
highest-scoring task is observed at its earliest feasible start.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .model import (
    COMPLETED,
    IMAGING_FAILURE,
    INITIAL_ATTITUDE,
    Attitude,
    EnvironmentRealization,
    Instance,
    Observation,
    Schedule,
    Task,
    TransitionModel,
    attitude_at,
    transition_angle,
    transition_time,
)

SEARCH_TOL = 1e-3


@dataclass
class DecisionContext:
    instance: Instance
    env: EnvironmentRealization
    t_now: float
    prev_attitude: Attitude
    prev_end: float
    remaining_memory: float
    # task ids still under consideration, ascending (ws, id)
    pool: list[int]

    @property
    def tasks_total(self) -> int:
        return self.instance.nt

    @property
    def horizon(self) -> float:
        return self.instance.horizon


@dataclass(frozen=True)
class Candidates:
    """Filter survivors in pool order together with their earliest feasible starts."""

    ids: np.ndarray
    starts: np.ndarray
    # tasks that can never become feasible again (timed out or over capacity)
    expired: tuple[int, ...] = ()

    def __len__(self) -> int:
        return len(self.ids)


Policy = Callable[[DecisionContext, Candidates], "np.ndarray | Sequence[float]"]


def delay(prev_end: float, prev_attitude: Attitude, os: float, task: Task, model: TransitionModel) -> float:
    """Slack of starting ``task`` at ``os``: positive means the maneuver is not finished yet."""
    return prev_end + transition_time(model, transition_angle(prev_attitude, attitude_at(task, os))) - os


def _angle_pieces(prev: Attitude, task: Task):
    """Coefficients ``(c_k, r_k)`` with ``dg(t) = sum |c_k + r_k (t - ws)|``."""
    p = task.profile
    return (
        (p.pitch0 - prev.pitch, p.pitch_rate),
        (p.roll0 - prev.roll, p.roll_rate),
        (p.yaw0 - prev.yaw, p.yaw_rate),
    )


def _segment_cuts(coef, ws: float, lo: float, hi: float, boundaries) -> list[float]:
    """Times in ``(lo, hi)`` at which the transition angle crosses a segment boundary."""
    kinks = sorted(ws - c / r for c, r in coef if r != 0.0 and lo < ws - c / r < hi)
    knots = [lo, *kinks, hi]

    def dg(t):
        dt = t - ws
        return sum(abs(c + r * dt) for c, r in coef)

    cuts = []
    g_left = dg(lo)
    for a, b in zip(knots, knots[1:]):
        g_right = dg(b)
        if g_right != g_left:
            for theta in boundaries:
                if min(g_left, g_right) < theta < max(g_left, g_right):
                    t = a + (theta - g_left) * (b - a) / (g_right - g_left)
                    if lo < t < hi:
                        cuts.append(t)
        g_left = g_right
    cuts.sort()
    return cuts


def earliest_start_counted(
    prev_end: float,
    prev_attitude: Attitude,
    task: Task,
    model: TransitionModel,
    tol: float = SEARCH_TOL,
) -> tuple[float | None, int]:
    """Earliest feasible start of ``task`` and the number of delay evaluations spent.

    Stage one bounds the search to ``[max(ws, prev_end), we - du]``. Stage two
    bisects the delay function. Delay only decreases monotonically while the
    transition angle stays inside one segment of the transition model, so the
    bracket is split where the angle crosses a segment boundary and the pieces
    are searched left to right.
    """
    l = max(task.ws, prev_end)
    r = task.we - task.du
    if r < l:
        return None, 0
    coef = _angle_pieces(prev_attitude, task)
    ws = task.ws
    p = task.profile
    a0, a1, a2 = prev_attitude.pitch, prev_attitude.roll, prev_attitude.yaw

    def angle(t):
        # same operation order as transition_angle(prev, attitude_at(task, t)), so a start on a
        # segment boundary lands in the same segment as in the schedule validator
        dt = t - ws
        return (abs(a0 - (p.pitch0 + p.pitch_rate * dt)) + abs(a1 - (p.roll0 + p.roll_rate * dt))
                + abs(a2 - (p.yaw0 + p.yaw_rate * dt)))

    def real(t):
        return prev_end + transition_time(model, angle(t)) - t

    evals = 1
    if real(l) <= 0:
        return l, evals
    if l == r:
        return None, evals

    cuts = _segment_cuts(coef, ws, l, r, model.boundaries)
    knots = [l, *cuts, r]
    for a, b in zip(knots, knots[1:]):
        k = model.segment_index(angle(0.5 * (a + b)))

        def f(t, k=k):
            return prev_end + model.time_in_segment(angle(t), k) - t

        if a == l:
            fa = 1.0  # real(l) > 0 was established above
        else:
            fa = f(a)
            evals += 1
        if fa <= 0:
            evals += 1
            if real(a) <= 0:
                return a, evals
            # the active segment changes exactly at ``a``; feasibility starts right after it
            x = min(a + 0.5 * tol, b)
            evals += 1
            if real(x) <= 0:
                return x, evals
            continue
        fb = f(b)
        evals += 1
        if fb > 0:
            continue
        lo, hi = a, b
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            evals += 1
            if f(mid) <= 0:
                hi = mid
            else:
                lo = mid
        # f(hi) <= 0 already; it equals the true delay unless hi sits on a cut into another segment
        if model.segment_index(angle(hi)) == k:
            return hi, evals
        evals += 1
        if real(hi) <= 0:
            return hi, evals
    return None, evals


def earliest_start(
    prev_end: float, prev_attitude: Attitude, task: Task, model: TransitionModel, tol: float = SEARCH_TOL
) -> float | None:
    return earliest_start_counted(prev_end, prev_attitude, task, model, tol)[0]


def filter_pool(ctx: DecisionContext, slack_m: float = 1.0) -> Candidates:
    """Apply pruning, timeout, capacity and earliest-start checks to ``ctx.pool``."""
    inst = ctx.instance
    tasks = inst.tasks
    model = inst.transition
    t_now = ctx.t_now
    prune_at = t_now + inst.max_transition_time
    mem_per_s = slack_m * inst.cr
    remaining = ctx.remaining_memory
    ids: list[int] = []
    starts: list[float] = []
    expired: list[int] = []
    pruned = False
    for i in ctx.pool:
        task = tasks[i]
        if not pruned and prune_at <= task.ws:
            pruned = True
        if not pruned and t_now + task.du > task.we:
            expired.append(i)
            continue
        if mem_per_s * task.du > remaining:
            expired.append(i)
            continue
        if pruned:
            os = max(task.ws, ctx.prev_end)
        else:
            os = earliest_start(ctx.prev_end, ctx.prev_attitude, task, model)
            if os is None:
                continue
        ids.append(i)
        starts.append(os)
    return Candidates(np.array(ids, dtype=int), np.array(starts, dtype=float), tuple(expired))


def choose(scores, ids: np.ndarray) -> int:
    """Position of the winning candidate: highest score, then smallest task id."""
    s = np.asarray(scores, dtype=float).reshape(-1)
    if s.shape[0] != len(ids):
        if s.shape[0] == 1:
            s = np.repeat(s, len(ids))
        else:
            raise ValueError(f"policy returned {s.shape[0]} scores for {len(ids)} candidates")
    s = np.where(np.isfinite(s), s, 1.0)
    tied = np.flatnonzero(s == s.max())
    return int(tied[np.argmin(ids[tied])])


@dataclass(frozen=True)
class RolloutOutcome:
    schedule: Schedule
    # (t_now, chosen task id, candidate pool size) per decision
    decision_trace: tuple[tuple[float, int, int], ...]
    # cumulative realized profit right after each decision
    cumulative_profit: tuple[float, ...] = field(default=())

    @property
    def total_profit(self) -> float:
        return self.schedule.realized_profit


def initial_context(instance: Instance, env: EnvironmentRealization) -> DecisionContext:
    tasks = instance.tasks
    pool = sorted((i for i in range(instance.nt) if env.visible[i]), key=lambda i: (tasks[i].ws, i))
    return DecisionContext(instance, env, 0.0, INITIAL_ATTITUDE, 0.0, float(instance.mmc), pool)


def rollout(
    instance: Instance, env: EnvironmentRealization, policy: Policy, slack_m: float = 1.0
) -> RolloutOutcome:
    ctx = initial_context(instance, env)
    tasks = instance.tasks
    observations: list[Observation] = []
    trace: list[tuple[float, int, int]] = []
    cumulative: list[float] = []
    profit = 0.0
    used = 0.0
    status, failure_index = COMPLETED, None
    while True:
        cands = filter_pool(ctx, slack_m)
        if cands.expired:
            gone = set(cands.expired)
            ctx.pool = [i for i in ctx.pool if i not in gone]
        if len(cands) == 0:
            break
        j = choose(policy(ctx, cands), cands.ids)
        tid = int(cands.ids[j])
        task = tasks[tid]
        os = float(cands.starts[j])
        oe = os + task.du
        trace.append((ctx.t_now, tid, len(cands)))
        observations.append(Observation(tid, os, oe))
        draw = float(env.actual_rate[tid]) * task.du
        if draw > ctx.remaining_memory:
            status, failure_index = IMAGING_FAILURE, len(observations) - 1
            cumulative.append(profit)
            break
        ctx.remaining_memory -= draw
        used += draw
        profit += float(env.actual_profit[tid])
        cumulative.append(profit)
        ctx.t_now = oe
        ctx.prev_end = oe
        ctx.prev_attitude = attitude_at(task, min(oe, task.we))
        ctx.pool.remove(tid)
    schedule = Schedule(tuple(observations), status, failure_index, profit, used)
    return RolloutOutcome(schedule, tuple(trace), tuple(cumulative))


def write_trace_csv(outcome: RolloutOutcome, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_now", "chosen_id", "pool_size", "cumulative_profit"])
        for (t, tid, n), c in zip(outcome.decision_trace, outcome.cumulative_profit):
            w.writerow([repr(t), tid, n, repr(c)])


def mean_profit(
    pairs: Sequence[tuple[Instance, EnvironmentRealization]], policy: Policy, slack_m: float = 1.0
) -> float:
    """Expected total profit of ``policy`` over (instance, environment) pairs."""
    if not pairs:
        raise ValueError("need at least one (instance, environment) pair")
    return math.fsum(rollout(inst, env, policy, slack_m).total_profit for inst, env in pairs) / len(pairs)
