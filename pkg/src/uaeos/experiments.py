"""Experiment protocol: train GPHH per scenario cell, sweep baselines, build gap reports."""
from __future__ import annotations

import csv
import json
import logging
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .baselines import BaselinePolicy, BaselineSpec, best_of, lah_sweep_specs, mdh_specs
from .evolution import EvolutionConfig, evolve
from .model import EnvironmentRealization, Instance, Schedule, load_envs, load_instance, validate_schedule
from .policy import Node, TreePolicy, parse, serialize, write_policies
from .simulator import Policy, rollout

log = logging.getLogger(__name__)

Pair = tuple[Instance, EnvironmentRealization]


class UndefinedGapError(ZeroDivisionError):
    pass


def gap(a: float, b: float) -> float:
    """Relative improvement of ``a`` over ``b``."""
    if b == 0:
        raise UndefinedGapError("gap is undefined for a zero reference value")
    return (a - b) / b


# ------------------------------------------------------------------ loading


def read_manifest(bench: str | Path) -> dict:
    return json.loads((Path(bench) / "manifest.json").read_text())


_COND = re.compile(r"^\s*(NT|ST|MMC|cloud|prob_cloud)\s*=\s*([^=]+)$", re.IGNORECASE)


def parse_filter(expr: str | None) -> Callable[[Mapping], bool]:
    """``"NT=50,MMC=1024|2048"``: comma-separated conditions, ``|`` separates allowed values."""
    if not expr:
        return lambda cell: True
    conds = []
    for part in expr.split(","):
        m = _COND.match(part)
        if not m:
            raise ValueError(f"bad filter condition {part!r}")
        key = m.group(1).lower()
        key = {"cloud": "prob_cloud"}.get(key, key)
        values = {float(v) for v in m.group(2).split("|")}
        conds.append((key, values))
    return lambda cell: all(float(cell[k]) in vs for k, vs in conds)


def select_cells(manifest: dict, expr: str | None = None) -> list[dict]:
    keep = parse_filter(expr)
    return [c for c in manifest["cells"] if keep(c)]


def load_split(bench: str | Path, cell_id: str, split: str) -> list[tuple[int, int, Instance, EnvironmentRealization]]:
    """``(instance index, env index, instance, env)`` rows of one split."""
    d = Path(bench) / cell_id / split
    rows = []
    i = 0
    while (d / f"instance_{i}.json").exists():
        inst = load_instance(d / f"instance_{i}.json")
        for j, env in enumerate(load_envs(d / f"envs_{i}.json")):
            rows.append((i, j, inst, env))
        i += 1
    if not rows:
        raise FileNotFoundError(f"no instances under {d}")
    return rows


def pairs_of(rows) -> list[Pair]:
    return [(inst, env) for _, _, inst, env in rows]


# ------------------------------------------------------------------ running


@dataclass
class RunConfig:
    bench: str
    out: str
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    cell_filter: str | None = None
    slack_m: float = 1.0
    evolution: dict = field(default_factory=dict)
    workers: int = 1

    def evolution_config(self, seed: int) -> EvolutionConfig:
        return replace(EvolutionConfig(**self.evolution), rng_seed=seed)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=1) + "\n")


def evaluate_policy(rows, policy: Policy, slack_m: float, keep: bool = False) -> tuple[float, list]:
    profits, scheds = [], []
    for i, j, inst, env in rows:
        out = rollout(inst, env, policy, slack_m)
        profits.append(out.total_profit)
        if keep:
            scheds.append((i, j, out.schedule.to_dict()))
    return math.fsum(profits) / len(profits), scheds


def train_job(bench: str, cell_id: str, seed: int, evo: dict, slack_m: float) -> dict:
    """Train one GPHH run on a cell and score its pick on the test split."""
    train = pairs_of(load_split(bench, cell_id, "train"))
    valid = pairs_of(load_split(bench, cell_id, "valid"))
    test_rows = load_split(bench, cell_id, "test")
    cfg = replace(EvolutionConfig(**evo), rng_seed=seed)
    res = evolve(train, valid, cfg, slack_m)
    test_value, scheds = evaluate_policy(test_rows, TreePolicy(res.best_tree), slack_m, keep=True)
    return {
        "cell": cell_id, "seed": seed, "tree": serialize(res.best_tree), "validation": res.best_validation,
        "test": test_value, "history_csv": res.history_csv(), "schedules": scheds,
    }


def baseline_job(bench: str, cell_id: str, slack_m: float) -> dict:
    test_rows = load_split(bench, cell_id, "test")
    rows = []
    scheds = {}
    for spec in lah_sweep_specs() + mdh_specs():
        value, s = evaluate_policy(test_rows, BaselinePolicy(spec), slack_m, keep=True)
        rows.append((spec, value))
        scheds[spec.label] = s
    lah = best_of([r for r in rows if r[0].kind.startswith("LAH")])
    mdh = best_of([r for r in rows if r[0].kind.startswith("MDH")])
    return {
        "cell": cell_id,
        "rows": [(s.kind, s.k, v) for s, v in rows],
        "best_lah": (lah[0].label, lah[1]),
        "best_mdh": (mdh[0].label, mdh[1]),
        "schedules": {lah[0].label: scheds[lah[0].label], mdh[0].label: scheds[mdh[0].label]},
    }


def _run_jobs(jobs: Sequence[tuple[Callable, tuple]], workers: int) -> list:
    if workers <= 1:
        return [fn(*args) for fn, args in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        futures = [ex.submit(fn, *args) for fn, args in jobs]
        return [f.result() for f in futures]


@dataclass
class CellReport:
    cell: dict
    best_lah: tuple[str, float]
    best_mdh: tuple[str, float]
    gphh: list[float]  # test value per seed
    best_tree: str

    @property
    def gphh_best(self) -> float:
        return max(self.gphh)

    @property
    def gphh_mean(self) -> float:
        return math.fsum(self.gphh) / len(self.gphh)

    @property
    def gphh_worst(self) -> float:
        return min(self.gphh)

    def gaps(self) -> dict[str, float]:
        out = {}
        for ref, (_, value) in (("LAH", self.best_lah), ("MDH", self.best_mdh)):
            for stat in ("best", "mean", "worst"):
                out[f"gap_{stat}_vs_{ref}"] = gap(getattr(self, f"gphh_{stat}"), value)
        return out


@dataclass
class Report:
    cells: list[CellReport]
    missing: list[str] = field(default_factory=list)

    def cell_rows(self) -> list[dict]:
        rows = []
        for c in self.cells:
            row = {
                "cell": c.cell["id"], "nt": c.cell["nt"], "st": c.cell["st"], "mmc": c.cell["mmc"],
                "prob_cloud": c.cell["prob_cloud"],
                "best_lah_variant": c.best_lah[0], "best_lah": c.best_lah[1],
                "best_mdh_variant": c.best_mdh[0], "best_mdh": c.best_mdh[1],
                "gphh_best": c.gphh_best, "gphh_mean": c.gphh_mean, "gphh_worst": c.gphh_worst,
            }
            row.update(c.gaps())
            rows.append(row)
        return rows

    def scale_rows(self) -> list[dict]:
        """Per task scale, sums of the per-cell best values."""
        out = []
        for nt in sorted({c.cell["nt"] for c in self.cells}):
            cs = [c for c in self.cells if c.cell["nt"] == nt]
            lah = math.fsum(c.best_lah[1] for c in cs)
            mdh = math.fsum(c.best_mdh[1] for c in cs)
            gp = math.fsum(c.gphh_best for c in cs)
            out.append({"nt": nt, "cells": len(cs), "LAHs": lah, "MDHs": mdh, "GPHH": gp,
                        "gap_vs_LAH": gap(gp, lah), "gap_vs_MDH": gap(gp, mdh)})
        return out

    def gap_summary(self) -> dict[str, float]:
        """Per-cell gaps averaged over cells, for best/mean/worst GPHH runs."""
        rows = [c.gaps() for c in self.cells]
        return {k: math.fsum(r[k] for r in rows) / len(rows) for k in rows[0]} if rows else {}

    def wins(self) -> int:
        return sum(c.gphh_best >= c.best_lah[1] and c.gphh_best >= c.best_mdh[1] for c in self.cells)


def _write_csv(path: Path, rows: list[dict]) -> None:
    if not rows:
        path.write_text("")
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})


def _append_schedules(fh, cell_id: str, method: str, scheds) -> None:
    for i, j, s in scheds:
        fh.write(json.dumps({"cell": cell_id, "split": "test", "instance": i, "env": j, "method": method,
                             "schedule": s}) + "\n")


def run_baselines(cfg: RunConfig) -> list[dict]:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg.write(out / "run_config.json")
    cells, missing = available_cells(cfg)
    results = _run_jobs([(baseline_job, (cfg.bench, c["id"], cfg.slack_m)) for c in cells], cfg.workers)
    rows = [{"scenario": r["cell"], "variant": kind, "k": "" if k is None else k, "expected_profit": v}
            for r in results for kind, k, v in r["rows"]]
    _write_csv(out / "baselines.csv", rows)
    return rows


def available_cells(cfg: RunConfig) -> tuple[list[dict], list[str]]:
    manifest = read_manifest(cfg.bench)
    cells, missing = [], []
    for c in select_cells(manifest, cfg.cell_filter):
        if (Path(cfg.bench) / c["id"] / "test").is_dir():
            cells.append(c)
        else:
            log.warning("cell %s listed in the manifest but missing on disk; skipped", c["id"])
            missing.append(c["id"])
    return cells, missing


def run_train(cfg: RunConfig) -> list[dict]:
    out = Path(cfg.out)
    (out / "policies").mkdir(parents=True, exist_ok=True)
    (out / "histories").mkdir(parents=True, exist_ok=True)
    cfg.write(out / "run_config.json")
    cells, _ = available_cells(cfg)
    jobs = [(train_job, (cfg.bench, c["id"], s, cfg.evolution, cfg.slack_m)) for c in cells for s in cfg.seeds]
    results = _run_jobs(jobs, cfg.workers)
    for r in results:
        tag = f"{r['cell']}_seed{r['seed']}"
        (out / "histories" / f"{tag}.csv").write_text(r["history_csv"])
        write_policies([parse(r["tree"])], out / "policies" / f"{tag}.txt",
                       header=f"cell {r['cell']} seed {r['seed']}\nvalidation {r['validation']!r} test {r['test']!r}")
    _write_csv(out / "gphh_runs.csv", [
        {"scenario": r["cell"], "seed": r["seed"], "validation": r["validation"], "test": r["test"], "tree": r["tree"]}
        for r in results
    ])
    return results


def run_compare(cfg: RunConfig) -> Report:
    """Full protocol on every selected cell: baselines, GPHH per seed, per-cell and per-scale gaps."""
    out = Path(cfg.out)
    (out / "policies").mkdir(parents=True, exist_ok=True)
    (out / "histories").mkdir(parents=True, exist_ok=True)
    cfg.write(out / "run_config.json")
    cells, missing = available_cells(cfg)
    jobs: list[tuple[Callable, tuple]] = [(baseline_job, (cfg.bench, c["id"], cfg.slack_m)) for c in cells]
    jobs += [(train_job, (cfg.bench, c["id"], s, cfg.evolution, cfg.slack_m)) for c in cells for s in cfg.seeds]
    results = _run_jobs(jobs, cfg.workers)
    base = {r["cell"]: r for r in results[: len(cells)]}
    runs: dict[str, list[dict]] = {}
    for r in results[len(cells):]:
        runs.setdefault(r["cell"], []).append(r)

    reports = []
    with open(out / "schedules.jsonl", "w") as sched_fh:
        for c in cells:
            b, rs = base[c["id"]], sorted(runs[c["id"]], key=lambda r: r["seed"])
            top = max(rs, key=lambda r: r["test"])  # first seed wins ties
            reports.append(CellReport(c, tuple(b["best_lah"]), tuple(b["best_mdh"]), [r["test"] for r in rs],
                                      top["tree"]))
            for label, s in b["schedules"].items():
                _append_schedules(sched_fh, c["id"], label, s)
            for r in rs:
                _append_schedules(sched_fh, c["id"], f"GPHH(seed={r['seed']})", r["schedules"])
                tag = f"{c['id']}_seed{r['seed']}"
                (out / "histories" / f"{tag}.csv").write_text(r["history_csv"])
                write_policies([parse(r["tree"])], out / "policies" / f"{tag}.txt",
                               header=f"validation {r['validation']!r} test {r['test']!r}")

    report = Report(reports, missing)
    _write_csv(out / "baselines.csv", [
        {"scenario": r["cell"], "variant": kind, "k": "" if k is None else k, "expected_profit": v}
        for r in base.values() for kind, k, v in r["rows"]
    ])
    _write_csv(out / "gphh_runs.csv", [
        {"scenario": r["cell"], "seed": r["seed"], "validation": r["validation"], "test": r["test"], "tree": r["tree"]}
        for c in cells for r in sorted(runs[c["id"]], key=lambda r: r["seed"])
    ])
    _write_csv(out / "cells.csv", report.cell_rows())
    _write_csv(out / "scales.csv", report.scale_rows())
    summary = report.gap_summary()
    _write_csv(out / "gap_summary.csv", [
        {"reference": ref, "best": summary[f"gap_best_vs_{ref}"], "average": summary[f"gap_mean_vs_{ref}"],
         "worst": summary[f"gap_worst_vs_{ref}"]}
        for ref in ("LAH", "MDH")
    ] if summary else [])
    return report


# --------------------------------------------------------------- validation


def validate_run(bench: str | Path, run_dir: str | Path) -> tuple[int, list[str]]:
    """Re-check every stored schedule; returns (schedules checked, problem descriptions)."""
    cache: dict[tuple[str, int], tuple[Instance, list[EnvironmentRealization]]] = {}
    checked, problems = 0, []
    path = Path(run_dir) / "schedules.jsonl"
    for line in path.read_text().splitlines():
        rec = json.loads(line)
        key = (rec["cell"], rec["instance"])
        if key not in cache:
            d = Path(bench) / rec["cell"] / rec["split"]
            cache[key] = (load_instance(d / f"instance_{rec['instance']}.json"),
                          load_envs(d / f"envs_{rec['instance']}.json"))
        inst, envs = cache[key]
        report = validate_schedule(inst, envs[rec["env"]], Schedule.from_dict(rec["schedule"]))
        checked += 1
        if not report.feasible:
            problems.append(f"{rec['cell']} #{rec['instance']}/{rec['env']} {rec['method']}: "
                            + "; ".join(f"{v.tag} {v.detail}" for v in report.violations))
    return checked, problems


# --------------------------------------------------------------- trajectory


def export_trajectory(instance: Instance, env: EnvironmentRealization, policies: Mapping[str, Policy],
                      slack_m: float = 1.0) -> list[dict]:
    """Cumulative-profit step series per policy: a row at t=0 and one at the end of every observation."""
    rows = []
    for name, policy in policies.items():
        outcome = rollout(instance, env, policy, slack_m)
        rows.append({"policy": name, "t": 0.0, "cumulative_profit": 0.0})
        for obs, cum in zip(outcome.schedule.observations, outcome.cumulative_profit):
            rows.append({"policy": name, "t": obs.oe, "cumulative_profit": cum})
    return rows


def write_trajectory_csv(rows: Iterable[dict], path: str | Path) -> None:
    _write_csv(Path(path), list(rows))


def named_baselines(specs: Iterable[BaselineSpec]) -> dict[str, Policy]:
    return {s.label: BaselinePolicy(s) for s in specs}


def tree_policies(trees: Iterable[Node], prefix: str = "GPHH") -> dict[str, Policy]:
    return {f"{prefix}{k}": TreePolicy(t) for k, t in enumerate(trees)}
