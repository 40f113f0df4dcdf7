"""Look-ahead and manually designed heuristics expressed as rollout policies.

Every heuristic returns one score per candidate, larger is better, so they all
run through the same maximize-then-smallest-id rollout as evolved trees.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import EnvironmentRealization, Instance
from .simulator import Candidates, DecisionContext, choose, mean_profit

LAH_KINDS = ("LAH1", "LAH2", "LAH3")
MDH_KINDS = ("MDH1", "MDH2", "MDH3")
K_RANGE = range(2, 21)

# score for candidates outside the look-ahead window; finite so it is never reset to 1
_EXCLUDED = -np.finfo(float).max


@dataclass(frozen=True)
class BaselineSpec:
    kind: str
    k: int | None = None

    def __post_init__(self):
        if self.kind not in LAH_KINDS + MDH_KINDS:
            raise ValueError(f"unknown baseline {self.kind!r}")
        if self.kind in ("LAH2", "LAH3"):
            if self.k is None or not 1 <= self.k <= 20:
                raise ValueError(f"{self.kind} needs a look-ahead step in 1..20")
        elif self.k is not None:
            raise ValueError(f"{self.kind} takes no look-ahead step")

    @property
    def label(self) -> str:
        return self.kind if self.k is None else f"{self.kind}(k={self.k})"


def lookahead_window(cands: Candidates, k: int) -> np.ndarray:
    """Positions of the first ``k`` candidates by (earliest start, id)."""
    order = np.lexsort((cands.ids, cands.starts))
    return order[:k]


def lah_scores(ctx: DecisionContext, cands: Candidates, spec: BaselineSpec) -> np.ndarray:
    if spec.kind == "LAH1":
        window, metric = lookahead_window(cands, 1), None
    else:
        window = lookahead_window(cands, spec.k)
        profit = ctx.env.actual_profit[cands.ids]
        if spec.kind == "LAH2":
            metric = profit
        else:
            metric = profit / ctx.instance.arrays.du[cands.ids]
    scores = np.full(len(cands), _EXCLUDED)
    scores[window] = 0.0 if metric is None else metric[window]
    return scores


def lah_choose(ctx: DecisionContext, cands: Candidates, spec: BaselineSpec) -> int:
    return int(cands.ids[choose(lah_scores(ctx, cands, spec), cands.ids)])


def _transition_to_candidates(ctx: DecisionContext, cands: Candidates) -> np.ndarray:
    arr = ctx.instance.arrays
    ids = cands.ids
    dt = cands.starts - arr.ws[ids]
    prev = ctx.prev_attitude
    dg = (
        np.abs(arr.pitch0[ids] + arr.pitch_rate[ids] * dt - prev.pitch)
        + np.abs(arr.roll0[ids] + arr.roll_rate[ids] * dt - prev.roll)
        + np.abs(arr.yaw0[ids] + arr.yaw_rate[ids] * dt - prev.yaw)
    )
    return ctx.instance.transition.array(dg)


def mdh_scores(ctx: DecisionContext, cands: Candidates, kind: str) -> np.ndarray:
    if kind == "MDH3":
        kind = "MDH1" if ctx.remaining_memory < ctx.instance.mmc / 2 else "MDH2"
    trans = _transition_to_candidates(ctx, cands)
    if kind == "MDH1":
        du = ctx.instance.arrays.du[cands.ids]
        return ctx.env.actual_profit[cands.ids] / (du + trans)
    if kind == "MDH2":
        return -np.maximum(trans, cands.starts - ctx.prev_end)
    raise ValueError(f"unknown MDH kind {kind!r}")


class BaselinePolicy:
    def __init__(self, spec: BaselineSpec):
        self.spec = spec

    def __call__(self, ctx: DecisionContext, cands: Candidates) -> np.ndarray:
        if self.spec.kind in LAH_KINDS:
            return lah_scores(ctx, cands, self.spec)
        return mdh_scores(ctx, cands, self.spec.kind)

    def __repr__(self) -> str:
        return f"BaselinePolicy({self.spec.label})"


def lah_sweep_specs() -> list[BaselineSpec]:
    specs = [BaselineSpec("LAH1")]
    for kind in ("LAH2", "LAH3"):
        specs.extend(BaselineSpec(kind, k) for k in K_RANGE)
    return specs


def mdh_specs() -> list[BaselineSpec]:
    return [BaselineSpec(kind) for kind in MDH_KINDS]


def evaluate_specs(
    specs: Sequence[BaselineSpec],
    pairs: Sequence[tuple[Instance, EnvironmentRealization]],
    slack_m: float = 1.0,
) -> list[tuple[BaselineSpec, float]]:
    return [(spec, mean_profit(pairs, BaselinePolicy(spec), slack_m)) for spec in specs]


def best_of(results: Sequence[tuple[BaselineSpec, float]]) -> tuple[BaselineSpec, float]:
    """Highest expected profit; earlier entries win ties."""
    best = results[0]
    for r in results[1:]:
        if r[1] > best[1]:
            best = r
    return best


def best_lah(
    pairs: Sequence[tuple[Instance, EnvironmentRealization]], slack_m: float = 1.0
) -> tuple[BaselineSpec, float, list[tuple[BaselineSpec, float]]]:
    """Sweep LAH1 and LAH2/LAH3 over k = 2..20; return the best variant and the full curve."""
    results = evaluate_specs(lah_sweep_specs(), pairs, slack_m)
    spec, value = best_of(results)
    return spec, value, results
