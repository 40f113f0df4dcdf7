"""Command-line harness: ``uaeos {gen,train,baselines,compare,trajectory,validate}``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields
from pathlib import Path

from . import experiments as ex
from .baselines import BaselineSpec
from .evolution import EvolutionConfig
from .generator import PROFILES, build_manifest, materialize, profile_cells
from .model import load_envs, load_instance
from .policy import read_policies

log = logging.getLogger("uaeos")

_EVO_FIELDS = {f.name: f.type for f in fields(EvolutionConfig)}


def _evo_overrides(pairs: list[str]) -> dict:
    out = {}
    for item in pairs or []:
        key, _, value = item.partition("=")
        if key not in _EVO_FIELDS or key == "rng_seed":
            raise SystemExit(f"unknown evolution setting {key!r}")
        out[key] = float(value) if "prob" in key else int(value)
    return out


def _add_common(p: argparse.ArgumentParser, bench: bool = True) -> None:
    p.add_argument("--out", required=True, help="output directory (file for trajectory)")
    p.add_argument("--filter", default=None, help='scenario filter, e.g. "ST=2000|4000,MMC=1024"')
    if bench:
        p.add_argument("--bench", required=True, help="benchmark directory written by `gen`")


def _add_run(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, nargs="+", default=None,
                   help="GPHH seeds (default: 3 for the desk profile, 5 otherwise)")
    p.add_argument("--slack-m", type=float, default=1.0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--evo", action="append", metavar="KEY=VALUE", help="evolution config override")


def _run_config(args) -> ex.RunConfig:
    seeds = args.seed
    if seeds is None:
        profile = ex.read_manifest(args.bench).get("profile")
        seeds = [0, 1, 2] if profile == "desk" else [0, 1, 2, 3, 4]
    return ex.RunConfig(bench=args.bench, out=args.out, seeds=list(seeds), cell_filter=args.filter,
                        slack_m=args.slack_m, evolution=_evo_overrides(args.evo), workers=args.workers)


def cmd_gen(args) -> int:
    keep = ex.parse_filter(args.filter)
    cells = [c for c in profile_cells(args.profile)
             if keep(dict(nt=c[0], st=c[1], mmc=c[2], prob_cloud=c[3]))]
    if not cells:
        log.error("filter selects no cells")
        return 1
    counts = {k: v for k in ("train", "valid", "test", "envs") if (v := getattr(args, k)) is not None}
    manifest = build_manifest(args.seed, args.profile, cells, counts)
    try:
        materialize(manifest, args.out)
    except FileExistsError as err:
        log.error("%s", err)
        return 1
    print(f"wrote {len(cells)} cells to {args.out}")
    return 0


def _missing(cfg: ex.RunConfig) -> list[str]:
    return ex.available_cells(cfg)[1]


def _nothing_selected(cfg: ex.RunConfig) -> bool:
    if ex.select_cells(ex.read_manifest(cfg.bench), cfg.cell_filter):
        return False
    log.error("filter %r selects no cells", cfg.cell_filter)
    return True


def cmd_train(args) -> int:
    cfg = _run_config(args)
    if _nothing_selected(cfg):
        return 1
    results = ex.run_train(cfg)
    for r in results:
        print(f"{r['cell']} seed {r['seed']}: validation {r['validation']:.2f} test {r['test']:.2f}")
    return 1 if _missing(cfg) else 0


def cmd_baselines(args) -> int:
    cfg = _run_config(args)
    if _nothing_selected(cfg):
        return 1
    rows = ex.run_baselines(cfg)
    print(f"wrote {len(rows)} rows to {Path(args.out) / 'baselines.csv'}")
    return 1 if _missing(cfg) else 0


def cmd_compare(args) -> int:
    cfg = _run_config(args)
    if _nothing_selected(cfg):
        return 1
    report = ex.run_compare(cfg)
    for row in report.cell_rows():
        print(f"{row['cell']}: LAH {row['best_lah']:.1f} ({row['best_lah_variant']})  "
              f"MDH {row['best_mdh']:.1f} ({row['best_mdh_variant']})  GPHH best {row['gphh_best']:.1f}  "
              f"gap vs LAH {100 * row['gap_best_vs_LAH']:+.2f}%  vs MDH {100 * row['gap_best_vs_MDH']:+.2f}%")
    for key, value in report.gap_summary().items():
        print(f"{key}: {100 * value:+.2f}%")
    if report.missing:
        log.warning("missing cells: %s", ", ".join(report.missing))
        return 1
    return 0


def cmd_trajectory(args) -> int:
    d = Path(args.bench) / args.cell / args.split
    inst = load_instance(d / f"instance_{args.instance}.json")
    env = load_envs(d / f"envs_{args.instance}.json")[args.env]
    policies = {}
    for label in args.baseline or []:
        kind, _, k = label.partition(":")
        policies.update(ex.named_baselines([BaselineSpec(kind, int(k) if k else None)]))
    for path in args.policy or []:
        trees = read_policies(path)
        policies.update(ex.tree_policies(trees, prefix=f"{Path(path).stem}#"))
    if not policies:
        log.error("give at least one --policy file or --baseline")
        return 1
    rows = ex.export_trajectory(inst, env, policies, args.slack_m)
    ex.write_trajectory_csv(rows, args.out)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def cmd_validate(args) -> int:
    checked, problems = ex.validate_run(args.bench, args.run)
    for p in problems:
        print(p)
    print(f"checked {checked} schedules, {len(problems)} infeasible")
    return 1 if problems or checked == 0 else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uaeos", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a benchmark")
    _add_common(p, bench=False)
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--profile", choices=sorted(PROFILES), default="desk")
    for k in ("train", "valid", "test", "envs"):
        p.add_argument(f"--{k}", type=int, default=None, help=f"override the profile's {k} count")
    p.set_defaults(func=cmd_gen)

    for name, func, text in (("train", cmd_train, "evolve GPHH policies per cell and seed"),
                             ("baselines", cmd_baselines, "sweep LAH and MDH baselines on the test split"),
                             ("compare", cmd_compare, "full protocol with gap tables")):
        p = sub.add_parser(name, help=text)
        _add_common(p)
        _add_run(p)
        p.set_defaults(func=func)

    p = sub.add_parser("trajectory", help="cumulative-profit series for one instance")
    _add_common(p)
    p.add_argument("--seed", type=int, default=0, help="unused; accepted for uniformity")
    p.add_argument("--cell", required=True)
    p.add_argument("--split", default="test", choices=("train", "valid", "test"))
    p.add_argument("--instance", type=int, default=0)
    p.add_argument("--env", type=int, default=0)
    p.add_argument("--policy", action="append", help="policy file (one expression per line)")
    p.add_argument("--baseline", action="append", help="e.g. LAH1, LAH3:5, MDH2")
    p.add_argument("--slack-m", type=float, default=1.0)
    p.set_defaults(func=cmd_trajectory)

    p = sub.add_parser("validate", help="re-check every stored schedule of a run")
    p.add_argument("--bench", required=True)
    p.add_argument("--run", required=True, help="run directory holding schedules.jsonl")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
