"""Reference implementations used to cross-check the library.

Written from the problem definition only: none of these call into the
simulator or the transition-model helpers of the package.
"""
import itertools
import math

import numpy as np

# (theta_lo, theta_hi, base, divisor): trans = base + dg / divisor
TABLE = ((0.0, 15.0, 5.0, 1.0), (15.0, 40.0, 10.0, 2.0), (40.0, 90.0, 16.0, 2.5), (90.0, math.inf, 22.0, 3.0))
BOUNDARIES = (15.0, 40.0, 90.0)


def trans(dg):
    dg = np.asarray(dg, dtype=float)
    conds = [(dg >= lo) & (dg < hi) for lo, hi, _, _ in TABLE]
    vals = [base + dg / div for _, _, base, div in TABLE]
    return np.select(conds, vals)


def trans_seg(dg, k):
    _, _, base, div = TABLE[k]
    return base + dg / div


def seg_of(dg):
    for k, (lo, hi, _, _) in enumerate(TABLE):
        if lo <= dg < hi:
            return k
    raise ValueError(dg)


def _tuple(att):
    return tuple(att) if isinstance(att, tuple) else (att.pitch, att.roll, att.yaw)


def angle(prev, task, t):
    prev = _tuple(prev)
    p = task.profile
    dt = np.asarray(t, dtype=float) - task.ws
    return (np.abs(p.pitch0 + p.pitch_rate * dt - prev[0]) + np.abs(p.roll0 + p.roll_rate * dt - prev[1])
            + np.abs(p.yaw0 + p.yaw_rate * dt - prev[2]))


def real_delay(prev_end, prev, task, t):
    return prev_end + trans(angle(prev, task, t)) - t


def scan_earliest_start(prev_end, prev, task, step=1e-3):
    """First point of a ``step`` grid over [l, r] (plus r itself) with non-positive delay."""
    l, r = max(task.ws, prev_end), task.we - task.du
    if r < l:
        return None
    n = int(math.floor((r - l) / step))
    chunk = 4096
    for start in range(0, n + 1, chunk):
        grid = l + step * np.arange(start, min(start + chunk, n + 1))
        ok = np.flatnonzero(real_delay(prev_end, prev, task, grid) <= 0)
        if ok.size:
            return float(grid[ok[0]])
    return r if real_delay(prev_end, prev, task, r) <= 0 else None


def _breakpoints(prev, task, l, r):
    prev = _tuple(prev)
    p = task.profile
    coef = [(p.pitch0 - prev[0], p.pitch_rate), (p.roll0 - prev[1], p.roll_rate), (p.yaw0 - prev[2], p.yaw_rate)]
    pts = {l, r}
    for c, v in coef:
        if v != 0:
            t = task.ws - c / v
            if l < t < r:
                pts.add(t)
    knots = sorted(pts)
    out = set(knots)
    for a, b in zip(knots, knots[1:]):
        ga, gb = float(angle(prev, task, a)), float(angle(prev, task, b))
        for th in BOUNDARIES:
            if ga != gb and min(ga, gb) < th < max(ga, gb):
                out.add(a + (th - ga) * (b - a) / (gb - ga))
    return sorted(out)


def exact_earliest_start(prev_end, prev, task):
    """Infimum of feasible start times, solved exactly on each linear piece of the delay.

    Returns ``(t, attained)``; ``attained`` is False when the delay jumps down
    right after ``t`` so that ``t`` itself is infeasible.
    """
    l, r = max(task.ws, prev_end), task.we - task.du
    if r < l:
        return None, False
    pts = _breakpoints(prev, task, l, r)
    if float(real_delay(prev_end, prev, task, l)) <= 0:
        return l, True
    for a, b in zip(pts, pts[1:]):
        k = seg_of(float(angle(prev, task, 0.5 * (a + b))))

        def g(t):
            return prev_end + trans_seg(float(angle(prev, task, t)), k) - t

        ga, gb = g(a), g(b)
        if float(real_delay(prev_end, prev, task, a)) <= 0:
            return a, True
        if ga <= 0:
            return a, False
        if gb <= 0:
            t = a + ga * (b - a) / (ga - gb)
            return t, True
    if float(real_delay(prev_end, prev, task, r)) <= 0:
        return r, True
    return None, False


def _att_end(task, oe):
    p = task.profile
    dt = oe - task.ws
    return (p.pitch0 + p.pitch_rate * dt, p.roll0 + p.roll_rate * dt, p.yaw0 + p.yaw_rate * dt)


def simulate_order(instance, env, order):
    """Greedy placement: at each step observe the highest-priority task that is still feasible."""
    rank = {tid: n for n, tid in enumerate(order)}
    prev, prev_end, mem, profit = (0.0, 0.0, 0.0), 0.0, float(instance.mmc), 0.0
    left = [t for t in range(instance.nt) if env.visible[t]]
    seq = []
    while True:
        best = None
        for tid in sorted(left, key=rank.get):
            task = instance.tasks[tid]
            if instance.cr * task.du > mem:
                continue
            os, _ = exact_earliest_start(prev_end, prev, task)
            if os is not None:
                best = (tid, os)
                break
        if best is None:
            return profit, seq
        tid, os = best
        task = instance.tasks[tid]
        draw = env.actual_rate[tid] * task.du
        seq.append(tid)
        if draw > mem:
            return profit, seq
        mem -= draw
        profit += env.actual_profit[tid]
        prev_end = os + task.du
        prev = _att_end(task, prev_end)
        left.remove(tid)


def best_sequence_profit(instance, env):
    """Maximum realized profit over every feasible sequence with earliest-start placement."""
    best = 0.0

    def dfs(prev, prev_end, mem, profit, left):
        nonlocal best
        best = max(best, profit)
        for tid in left:
            task = instance.tasks[tid]
            draw = env.actual_rate[tid] * task.du
            if draw > mem:
                continue
            os, attained = exact_earliest_start(prev_end, prev, task)
            if os is None:
                continue
            if not attained:
                os += 1e-9
            oe = os + task.du
            dfs(_att_end(task, oe), oe, mem - draw, profit + env.actual_profit[tid], left - {tid})

    dfs((0.0, 0.0, 0.0), 0.0, float(instance.mmc), 0.0, frozenset(t for t in range(instance.nt) if env.visible[t]))
    return best


def best_fixed_priority(instance, env):
    return max(simulate_order(instance, env, perm)[0] for perm in itertools.permutations(range(instance.nt)))
