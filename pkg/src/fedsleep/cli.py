"""Benchmark command line: run one scenario, sweep the matrix, summarize CSVs.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from ._kernels import BACKEND
from .agent import save_params
from .config import ConfigError, ScenarioConfig, from_dict, load_config
from .federation import FederatedTrainer
from .runner import (
    read_rows,
    row_from_report,
    save_scenario,
    scenario_csv_name,
    summarize,
    sweep_scenarios,
    write_audits,
    write_rows,
    write_summary,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedsleep",
        description="Federated sleep-control simulator: attacks, defenses, benchmarks.",
    )
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__} (kernels: {BACKEND})")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario over its seeds")
    run.add_argument("--config", type=Path, default=None,
                     help="YAML scenario file (defaults apply when omitted)")
    run.add_argument("--seed", type=int, default=None,
                     help="run only this seed instead of the config's list")
    run.add_argument("--out-dir", type=Path, default=Path("out"))
    run.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                     help="dotted-path config override, repeatable")
    run.add_argument("--save-models", action="store_true",
                     help="also write the final global model snapshot per seed")

    sweep = sub.add_parser("sweep", help="run the traffic x attack x defense matrix")
    sweep.add_argument("--config", type=Path, default=None)
    sweep.add_argument("--out-dir", type=Path, default=Path("out"))
    sweep.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")

    summ = sub.add_parser("summarize", help="aggregate metrics CSVs into tail means")
    summ.add_argument("--in-dir", type=Path, default=Path("out"))
    summ.add_argument("--tail-fraction", type=float, default=0.25)
    summ.add_argument("--out", type=Path, default=None,
                      help="summary CSV path (default: <in-dir>/summary.csv)")
    return parser


def _load(args) -> ScenarioConfig:
    if args.config is None:
        cfg = from_dict({})
        for item in args.override:
            from .config import apply_override

            data = apply_override(cfg.to_dict(), item)
            cfg = from_dict(data)
        return cfg
    return load_config(args.config, overrides=args.override)


def _cmd_run(args) -> int:
    cfg = _load(args)
    seeds = cfg.seeds if args.seed is None else [args.seed]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scenario_id = cfg.scenario_id()
    rows, audits = [], []
    for seed in seeds:
        trainer = FederatedTrainer(cfg, seed)
        reports = trainer.run()
        rows.extend(row_from_report(cfg, scenario_id, seed, rep) for rep in reports)
        audits.extend(
            {"seed": seed, "round": rep.round_index, **rep.krum.to_dict()}
            for rep in reports if rep.krum is not None
        )
        if args.save_models:
            save_params(out_dir / f"{cfg.label()}-{scenario_id}-seed{seed}.frls",
                        trainer.last_global)
    csv_path = out_dir / scenario_csv_name(cfg)
    write_rows(csv_path, rows)
    if audits:
        write_audits(csv_path.with_suffix(".defense.jsonl"), audits)
    print(f"wrote {csv_path}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _load(args)
    out_dir = Path(args.out_dir)
    for variant in sweep_scenarios(cfg):
        csv_path = save_scenario(variant, out_dir)
        print(f"wrote {csv_path}")
    return EXIT_OK


def _cmd_summarize(args) -> int:
    in_dir = Path(args.in_dir)
    files = sorted(in_dir.glob("*.csv"))
    files = [f for f in files if f.name != "summary.csv"]
    if not files:
        raise ConfigError(f"no metrics CSVs found in {in_dir}")
    rows = []
    for path in files:
        rows.extend(read_rows(path))
    summaries = summarize(rows, tail_fraction=args.tail_fraction)
    out = args.out if args.out is not None else in_dir / "summary.csv"
    write_summary(out, summaries)
    print(f"wrote {out}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"run": _cmd_run, "sweep": _cmd_sweep, "summarize": _cmd_summarize}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports and exits
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
