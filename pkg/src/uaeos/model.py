"""Domain types, attitude/transition arithmetic and the offline schedule validator."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

SCHEMA_VERSION = 1

# Per-segment (constant a, rate v, lower angle); the last segment is unbounded above.
TABLE_II_SEGMENTS = (
    (5.0, 1.0, 0.0, 15.0),
    (10.0, 2.0, 15.0, 40.0),
    (16.0, 2.5, 40.0, 90.0),
    (22.0, 3.0, 90.0, math.inf),
)

DEFAULT_ATTITUDE_BOUND = 27.0
DEFAULT_RATE = 3.5

# Times coming out of the simulator are exact float expressions; this only absorbs
# rounding when a schedule went through a lossy channel.
_TIME_TOL = 1e-9


class OutOfWindowError(ValueError):
    pass


@dataclass(frozen=True)
class Attitude:
    pitch: float
    roll: float
    yaw: float = 0.0


@dataclass(frozen=True)
class AttitudeProfile:
    """Per-axis linear attitude ``value(t) = start + rate * (t - ws)``."""

    pitch0: float
    pitch_rate: float
    roll0: float
    roll_rate: float = 0.0
    yaw0: float = 0.0
    yaw_rate: float = 0.0

    @property
    def sweep_rate(self) -> float:
        return abs(self.pitch_rate) + abs(self.roll_rate) + abs(self.yaw_rate)


@dataclass(frozen=True)
class Task:
    id: int
    ws: float
    we: float
    du: float
    expected_profit: float
    profile: AttitudeProfile

    def __post_init__(self):
        if not (0.0 <= self.ws < self.we):
            raise ValueError(f"task {self.id}: bad window [{self.ws}, {self.we}]")
        if not (0.0 < self.du <= self.we - self.ws):
            raise ValueError(f"task {self.id}: duration {self.du} does not fit its window")
        if not self.expected_profit > 0:
            raise ValueError(f"task {self.id}: expected profit must be positive")


def attitude_at(task: Task, t: float) -> Attitude:
    if not (task.ws <= t <= task.we):
        raise OutOfWindowError(f"t={t} outside window [{task.ws}, {task.we}] of task {task.id}")
    p = task.profile
    dt = t - task.ws
    return Attitude(p.pitch0 + p.pitch_rate * dt, p.roll0 + p.roll_rate * dt, p.yaw0 + p.yaw_rate * dt)


def transition_angle(a: Attitude, b: Attitude) -> float:
    return abs(a.pitch - b.pitch) + abs(a.roll - b.roll) + abs(a.yaw - b.yaw)


@dataclass(frozen=True)
class TransitionModel:
    """Piecewise-linear maneuver time ``a_k + dg / v_k``.

    Segment ``k`` covers ``[lo_k, lo_{k+1})``; the first segment must start at 0
    and the last one is unbounded.
    """

    segments: tuple[tuple[float, float, float, float], ...] = TABLE_II_SEGMENTS

    def __post_init__(self):
        segs = tuple(tuple(float(x) for x in s) for s in self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs or segs[0][2] != 0.0:
            raise ValueError("first segment must start at 0")
        for k, (a, v, lo, hi) in enumerate(segs):
            if a < 0 or v <= 0:
                raise ValueError(f"segment {k}: need a >= 0 and v > 0")
            if k + 1 < len(segs):
                if hi != segs[k + 1][2] or not segs[k + 1][2] > lo:
                    raise ValueError(f"segment {k}: gap or non-increasing bounds")
        if segs[-1][3] != math.inf:
            raise ValueError("last segment must be unbounded")

    @cached_property
    def boundaries(self) -> np.ndarray:
        """Lower angles of segments 2..n (the points where the active segment changes)."""
        return np.array([s[2] for s in self.segments[1:]])

    @cached_property
    def min_rate(self) -> float:
        return min(s[1] for s in self.segments)

    def segment_index(self, dg: float) -> int:
        k = 0
        for j in range(1, len(self.segments)):
            if dg >= self.segments[j][2]:
                k = j
            else:
                break
        return k

    def time_in_segment(self, dg: float, k: int) -> float:
        a, v, _, _ = self.segments[k]
        return a + dg / v

    def __call__(self, dg: float) -> float:
        return transition_time(self, dg)

    def array(self, dg: np.ndarray) -> np.ndarray:
        dg = np.asarray(dg, dtype=float)
        k = np.searchsorted(self.boundaries, dg, side="right")
        a = np.array([s[0] for s in self.segments])
        v = np.array([s[1] for s in self.segments])
        return a[k] + dg / v[k]

    def sup_on(self, dg_max: float) -> float:
        """Supremum of the transition time over ``[0, dg_max]``."""
        best = transition_time(self, dg_max)
        for k in range(len(self.segments) - 1):
            hi = self.segments[k][3]
            if hi <= dg_max:
                best = max(best, self.time_in_segment(hi, k))
        return best


def transition_time(model: TransitionModel, dg: float) -> float:
    if dg < 0:
        raise ValueError("transition angle must be non-negative")
    for a, v, lo, hi in model.segments:
        if dg < hi:
            return a + dg / v
    raise AssertionError("unreachable: last segment is unbounded")


@dataclass(frozen=True)
class Instance:
    tasks: tuple[Task, ...]
    horizon: float
    mmc: float
    cr: float = DEFAULT_RATE
    transition: TransitionModel = field(default_factory=TransitionModel)
    pitch_bound: float = DEFAULT_ATTITUDE_BOUND
    roll_bound: float = DEFAULT_ATTITUDE_BOUND
    yaw_bound: float = 0.0
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        if not self.tasks:
            raise ValueError("instance needs at least one task")
        if self.mmc <= 0 or self.cr <= 0:
            raise ValueError("MMC and cr must be positive")
        for i, task in enumerate(self.tasks):
            if task.id != i:
                raise ValueError("task ids must be 0..NT-1 in order")
            if task.we > self.horizon:
                raise ValueError(f"task {i} window ends after the horizon")
            for t in (task.ws, task.we):
                a = attitude_at(task, t)
                if (abs(a.pitch) > self.pitch_bound + 1e-9 or abs(a.roll) > self.roll_bound + 1e-9
                        or abs(a.yaw) > self.yaw_bound + 1e-9):
                    raise ValueError(f"task {i} attitude leaves the maneuvering bounds")

    @property
    def nt(self) -> int:
        return len(self.tasks)

    @cached_property
    def max_transition_time(self) -> float:
        return max_transition_time(self)

    @cached_property
    def arrays(self) -> "TaskArrays":
        return TaskArrays.from_tasks(self.tasks)

    def delay_monotone(self) -> bool:
        """Sufficient condition for delay to be decreasing inside one transition segment."""
        return all(t.profile.sweep_rate < self.transition.min_rate for t in self.tasks)


@dataclass(frozen=True)
class TaskArrays:
    ws: np.ndarray
    we: np.ndarray
    du: np.ndarray
    profit: np.ndarray
    pitch0: np.ndarray
    pitch_rate: np.ndarray
    roll0: np.ndarray
    roll_rate: np.ndarray
    yaw0: np.ndarray
    yaw_rate: np.ndarray
    # 1-based position of each task in the (ws, id) ordering of all tasks
    ws_rank: np.ndarray

    @classmethod
    def from_tasks(cls, tasks: Sequence[Task]) -> "TaskArrays":
        def col(fn):
            return np.array([fn(t) for t in tasks], dtype=float)

        order = sorted(range(len(tasks)), key=lambda i: (tasks[i].ws, i))
        rank = np.empty(len(tasks), dtype=float)
        rank[order] = np.arange(1, len(tasks) + 1)
        return cls(
            ws=col(lambda t: t.ws), we=col(lambda t: t.we), du=col(lambda t: t.du),
            profit=col(lambda t: t.expected_profit),
            pitch0=col(lambda t: t.profile.pitch0), pitch_rate=col(lambda t: t.profile.pitch_rate),
            roll0=col(lambda t: t.profile.roll0), roll_rate=col(lambda t: t.profile.roll_rate),
            yaw0=col(lambda t: t.profile.yaw0), yaw_rate=col(lambda t: t.profile.yaw_rate),
            ws_rank=rank,
        )


def max_transition_time(instance: Instance) -> float:
    dg_max = 2 * instance.pitch_bound + 2 * instance.roll_bound + 2 * instance.yaw_bound
    return instance.transition.sup_on(dg_max)


@dataclass(frozen=True)
class EnvironmentRealization:
    actual_profit: np.ndarray
    actual_rate: np.ndarray
    visible: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        p = np.asarray(self.actual_profit, dtype=float)
        r = np.asarray(self.actual_rate, dtype=float)
        v = np.asarray(self.visible, dtype=bool)
        if not (len(p) == len(r) == len(v)):
            raise ValueError("environment vectors must have equal length")
        if np.any(p < 0) or np.any(r <= 0):
            raise ValueError("profits must be >= 0 and rates > 0")
        for name, arr in (("actual_profit", p), ("actual_rate", r), ("visible", v)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def expected(cls, instance: Instance) -> "EnvironmentRealization":
        """The deterministic world where every uncertain quantity takes its expected value."""
        return cls(
            actual_profit=instance.arrays.profit.copy(),
            actual_rate=np.full(instance.nt, instance.cr),
            visible=np.ones(instance.nt, dtype=bool),
        )


COMPLETED = "completed"
IMAGING_FAILURE = "imaging_failure"


@dataclass(frozen=True)
class Observation:
    task_id: int
    os: float
    oe: float


@dataclass(frozen=True)
class Schedule:
    observations: tuple[Observation, ...] = ()
    status: str = COMPLETED
    failure_index: int | None = None
    realized_profit: float = 0.0
    memory_used: float = 0.0

    @property
    def failed(self) -> bool:
        return self.status == IMAGING_FAILURE

    def to_dict(self) -> dict:
        return {
            "observations": [[o.task_id, o.os, o.oe] for o in self.observations],
            "status": self.status,
            "failure_index": self.failure_index,
            "realized_profit": self.realized_profit,
            "memory_used_units": self.memory_used,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Schedule":
        return cls(
            observations=tuple(Observation(int(i), float(s), float(e)) for i, s, e in d["observations"]),
            status=d["status"],
            failure_index=d.get("failure_index"),
            realized_profit=float(d["realized_profit"]),
            memory_used=float(d["memory_used_units"]),
        )


@dataclass(frozen=True)
class Violation:
    tag: str
    task_ids: tuple[int, ...]
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def feasible(self) -> bool:
        return not self.violations

    def count(self, tag: str) -> int:
        return sum(v.tag == tag for v in self.violations)


INITIAL_ATTITUDE = Attitude(0.0, 0.0, 0.0)


def validate_schedule(instance: Instance, env: EnvironmentRealization, schedule: Schedule) -> ValidationReport:
    """Check a schedule against memory, visibility, window, duration and transition constraints.

    A terminal imaging-failure entry is allowed: it must be the last observation,
    it must really overflow the remaining memory, and it earns nothing.
    """
    out: list[Violation] = []

    def bad(tag, ids, detail):
        out.append(Violation(tag, tuple(ids), detail))

    obs = schedule.observations
    n = len(obs)
    if schedule.failed:
        if schedule.failure_index != n - 1:
            bad("failure_position", [], f"failure index {schedule.failure_index} is not the last of {n}")
    elif schedule.status != COMPLETED:
        bad("status", [], f"unknown status {schedule.status!r}")

    seen: set[int] = set()
    prev_att, prev_end, prev_id = INITIAL_ATTITUDE, 0.0, None
    memory = 0.0
    profit = 0.0
    for k, o in enumerate(obs):
        fail_entry = schedule.failed and k == n - 1
        if not (0 <= o.task_id < instance.nt):
            bad("unknown_task", [o.task_id], f"observation {k} references an unknown task")
            prev_att, prev_end, prev_id = None, o.oe, o.task_id
            continue
        task = instance.tasks[o.task_id]
        if o.task_id in seen:
            bad("duplicate", [o.task_id], f"task observed more than once (observation {k})")
        seen.add(o.task_id)
        if k > 0 and o.os < obs[k - 1].os:
            bad("order", [obs[k - 1].task_id, o.task_id], "observations not ordered by start time")
        if not o.os < o.oe:
            bad("empty_observation", [o.task_id], f"os={o.os} >= oe={o.oe}")
        if not env.visible[o.task_id]:
            bad("visibility", [o.task_id], "task is cloud covered")
        if o.os < task.ws - _TIME_TOL or o.oe > task.we + _TIME_TOL:
            bad("window", [o.task_id], f"[{o.os}, {o.oe}] not inside [{task.ws}, {task.we}]")
        if abs((o.oe - o.os) - task.du) > _TIME_TOL * max(1.0, task.du):
            bad("duration", [o.task_id], f"oe-os={o.oe - o.os} != du={task.du}")
        if prev_att is not None:
            # out-of-window times were reported above; clamp to keep checking the maneuver
            start_att = attitude_at(task, min(max(o.os, task.ws), task.we))
            need = transition_time(instance.transition, transition_angle(prev_att, start_att))
            if prev_end + need > o.os + _TIME_TOL:
                ids = [o.task_id] if prev_id is None else [prev_id, o.task_id]
                bad("transition", ids, f"needs {need:.6g}s after {prev_end}, starts at {o.os}")

        draw = env.actual_rate[o.task_id] * task.du
        if fail_entry:
            if memory + draw <= instance.mmc:
                bad("failure_spurious", [o.task_id], "failure recorded but the draw fits in memory")
        else:
            memory += draw
            profit += env.actual_profit[o.task_id]
            if memory > instance.mmc * (1 + 1e-12):
                bad("memory", [o.task_id], f"cumulative memory {memory:.6g} exceeds MMC {instance.mmc}")

        prev_att = attitude_at(task, min(max(o.oe, task.ws), task.we))
        prev_end, prev_id = o.oe, o.task_id

    if not math.isclose(profit, schedule.realized_profit, rel_tol=1e-9, abs_tol=1e-9):
        bad("profit", [], f"recorded profit {schedule.realized_profit} != recomputed {profit}")
    return ValidationReport(tuple(out))


def expected_total_profit(profits: Sequence[float]) -> float:
    if len(profits) == 0:
        raise ValueError("need at least one environment")
    return float(sum(profits) / len(profits))


# ---------------------------------------------------------------- JSON files


def instance_to_dict(instance: Instance) -> dict:
    return {
        "schema": "uaeos.instance",
        "version": SCHEMA_VERSION,
        "name": instance.name,
        "horizon_s": instance.horizon,
        "mmc_units": instance.mmc,
        "cr_units_per_s": instance.cr,
        "pitch_bound_deg": instance.pitch_bound,
        "roll_bound_deg": instance.roll_bound,
        "yaw_bound_deg": instance.yaw_bound,
        "transition_segments": [
            {"a_s": a, "v_deg_per_s": v, "theta_lo_deg": lo, "theta_hi_deg": None if math.isinf(hi) else hi}
            for a, v, lo, hi in instance.transition.segments
        ],
        "tasks": [
            {
                "id": t.id,
                "ws_s": t.ws,
                "we_s": t.we,
                "du_s": t.du,
                "expected_profit": t.expected_profit,
                "pitch0_deg": t.profile.pitch0,
                "pitch_rate_deg_per_s": t.profile.pitch_rate,
                "roll0_deg": t.profile.roll0,
                "roll_rate_deg_per_s": t.profile.roll_rate,
                "yaw0_deg": t.profile.yaw0,
                "yaw_rate_deg_per_s": t.profile.yaw_rate,
            }
            for t in instance.tasks
        ],
    }


def instance_from_dict(d: dict) -> Instance:
    if d.get("schema") != "uaeos.instance" or d.get("version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported instance schema {d.get('schema')!r} v{d.get('version')!r}")
    segs = tuple(
        (s["a_s"], s["v_deg_per_s"], s["theta_lo_deg"], math.inf if s["theta_hi_deg"] is None else s["theta_hi_deg"])
        for s in d["transition_segments"]
    )
    tasks = tuple(
        Task(
            id=t["id"], ws=t["ws_s"], we=t["we_s"], du=t["du_s"], expected_profit=t["expected_profit"],
            profile=AttitudeProfile(
                t["pitch0_deg"], t["pitch_rate_deg_per_s"], t["roll0_deg"], t["roll_rate_deg_per_s"],
                t["yaw0_deg"], t["yaw_rate_deg_per_s"],
            ),
        )
        for t in d["tasks"]
    )
    return Instance(
        tasks=tasks, horizon=d["horizon_s"], mmc=d["mmc_units"], cr=d["cr_units_per_s"],
        transition=TransitionModel(segs), pitch_bound=d["pitch_bound_deg"], roll_bound=d["roll_bound_deg"],
        yaw_bound=d["yaw_bound_deg"], name=d.get("name", ""),
    )


def env_to_dict(env: EnvironmentRealization) -> dict:
    return {
        "seed": env.seed,
        "actual_profit": [float(x) for x in env.actual_profit],
        "actual_rate_units_per_s": [float(x) for x in env.actual_rate],
        "visible": [bool(x) for x in env.visible],
    }


def env_from_dict(d: dict) -> EnvironmentRealization:
    return EnvironmentRealization(
        actual_profit=np.array(d["actual_profit"], dtype=float),
        actual_rate=np.array(d["actual_rate_units_per_s"], dtype=float),
        visible=np.array(d["visible"], dtype=bool),
        seed=d.get("seed"),
    )


def envs_to_dict(envs: Sequence[EnvironmentRealization]) -> dict:
    return {"schema": "uaeos.envs", "version": SCHEMA_VERSION, "environments": [env_to_dict(e) for e in envs]}


def envs_from_dict(d: dict) -> list[EnvironmentRealization]:
    if d.get("schema") != "uaeos.envs" or d.get("version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported environment schema {d.get('schema')!r}")
    return [env_from_dict(e) for e in d["environments"]]


def dump_json(obj: dict, path: str | Path) -> None:
    # json uses repr() for floats, which is the shortest round-tripping form
    Path(path).write_text(json.dumps(obj, indent=1) + "\n", encoding="utf-8")


def save_instance(instance: Instance, path: str | Path) -> None:
    dump_json(instance_to_dict(instance), path)


def load_instance(path: str | Path) -> Instance:
    return instance_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def save_envs(envs: Sequence[EnvironmentRealization], path: str | Path) -> None:
    dump_json(envs_to_dict(envs), path)


def load_envs(path: str | Path) -> list[EnvironmentRealization]:
    return envs_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
