"""Scenario execution and metrics persistence for the benchmark CLI.

Each (scenario, seed) cell is an isolated deterministic simulation; rows
are collected per round and written as one CSV per scenario, with an
accompanying JSON-lines defense audit when a filter is active.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from .config import ScenarioConfig
from .federation import FederatedTrainer, RoundReport

METRICS_FIELDS = [
    "scenario_id",
    "seed",
    "round",
    "traffic_mbps",
    "attack",
    "defense",
    "ee_bits_per_joule",
    "mean_reward",
    "mean_drop_rate",
    "mean_throughput_mbps",
    "accepted_set_size",
]


@dataclass
class MetricsRow:
    """One CSV row: per-round averages for one (scenario, seed) cell."""

    scenario_id: str
    seed: int
    round: int
    traffic_mbps: float
    attack: str
    defense: str
    ee_bits_per_joule: float
    mean_reward: float
    mean_drop_rate: float
    mean_throughput_mbps: float
    accepted_set_size: int

    def as_list(self) -> list:
        return [getattr(self, name) for name in METRICS_FIELDS]


def row_from_report(cfg: ScenarioConfig, scenario_id: str, seed: int,
                    report: RoundReport) -> MetricsRow:
    return MetricsRow(
        scenario_id=scenario_id,
        seed=seed,
        round=report.round_index,
        traffic_mbps=cfg.traffic_mbps,
        attack=cfg.attack.kind.value,
        defense=cfg.defense.kind,
        ee_bits_per_joule=report.system_ee,
        mean_reward=report.mean_reward,
        mean_drop_rate=float(np.mean(report.sbs_drop_rate)),
        mean_throughput_mbps=float(np.mean(report.sbs_throughput_mbps)),
        accepted_set_size=len(report.accepted),
    )


def run_cell(cfg: ScenarioConfig, seed: int) -> list[RoundReport]:
    """Run one (scenario, seed) simulation and return its round reports."""
    cfg.validate()
    trainer = FederatedTrainer(cfg, seed)
    return trainer.run()


def run_scenario(cfg: ScenarioConfig, seeds=None):
    """Yield MetricsRow / KrumReport streams for every seed of one scenario.

    Returns (rows, audits) where audits maps (seed, round) to the defense
    report dict, empty when no defense is configured.
    """
    scenario_id = cfg.scenario_id()
    seeds = cfg.seeds if seeds is None else seeds
    rows: list[MetricsRow] = []
    audits: list[dict] = []
    for seed in seeds:
        for report in run_cell(cfg, seed):
            rows.append(row_from_report(cfg, scenario_id, seed, report))
            if report.krum is not None:
                audits.append(
                    {"seed": seed, "round": report.round_index, **report.krum.to_dict()}
                )
    return rows, audits


def write_rows(path, rows: list[MetricsRow]) -> None:
    """Write rows sorted by (seed, round) so identical runs are byte-identical."""
    ordered = sorted(rows, key=lambda r: (r.seed, r.round))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_FIELDS)
        for row in ordered:
            writer.writerow(row.as_list())


def write_audits(path, audits: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in audits:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def read_rows(path) -> list[MetricsRow]:
    rows = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        for record in csv.DictReader(fh):
            rows.append(
                MetricsRow(
                    scenario_id=record["scenario_id"],
                    seed=int(record["seed"]),
                    round=int(record["round"]),
                    traffic_mbps=float(record["traffic_mbps"]),
                    attack=record["attack"],
                    defense=record["defense"],
                    ee_bits_per_joule=float(record["ee_bits_per_joule"]),
                    mean_reward=float(record["mean_reward"]),
                    mean_drop_rate=float(record["mean_drop_rate"]),
                    mean_throughput_mbps=float(record["mean_throughput_mbps"]),
                    accepted_set_size=int(record["accepted_set_size"]),
                )
            )
    return rows


def scenario_csv_name(cfg: ScenarioConfig) -> str:
    return f"{cfg.label()}-{cfg.scenario_id()}.csv"


def save_scenario(cfg: ScenarioConfig, out_dir, seeds=None) -> Path:
    """Run a scenario over its seeds and persist metrics (and defense audit)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows, audits = run_scenario(cfg, seeds)
    csv_path = out_dir / scenario_csv_name(cfg)
    write_rows(csv_path, rows)
    if audits:
        write_audits(csv_path.with_suffix(".defense.jsonl"), audits)
    return csv_path


def sweep_scenarios(cfg: ScenarioConfig):
    """The traffic x attack x defense matrix spanned by the sweep section."""
    for traffic in cfg.traffic_mbps_list:
        for attack in cfg.sweep.attacks:
            for defense in cfg.sweep.defenses:
                if defense != "none" and attack == "none":
                    # Defended no-attack cells are legal but not part of the
                    # benchmark matrix; request them via `run` if needed.
                    continue
                variant = dataclasses.replace(
                    cfg,
                    traffic_mbps=float(traffic),
                    attack=dataclasses.replace(cfg.attack, kind=type(cfg.attack.kind)(attack)),
                    defense=dataclasses.replace(cfg.defense, kind=defense),
                )
                yield variant


@dataclass
class ScenarioSummary:
    """Across-seed summary of a scenario's converged regime."""

    scenario_id: str
    attack: str
    defense: str
    traffic_mbps: float
    n_seeds: int
    ee_mean: float
    ee_ci95: float
    reward_mean: float
    drop_mean: float
    throughput_mean: float


def tail_mean(values: list[float], tail_fraction: float) -> float:
    """Mean of the final ``tail_fraction`` of a round-indexed series."""
    if not 0.0 < tail_fraction <= 1.0:
        raise ValueError("tail_fraction must be in (0, 1]")
    count = max(1, int(round(tail_fraction * len(values))))
    return float(np.mean(values[len(values) - count:]))


def summarize(rows: list[MetricsRow], tail_fraction: float = 0.25) -> list[ScenarioSummary]:
    """Per-scenario mean tail energy efficiency with a 95% t-interval over seeds."""
    by_scenario: dict[str, dict[int, list[MetricsRow]]] = {}
    for row in rows:
        by_scenario.setdefault(row.scenario_id, {}).setdefault(row.seed, []).append(row)

    summaries = []
    for scenario_id in sorted(by_scenario):
        seed_rows = by_scenario[scenario_id]
        if len(seed_rows) < 2:
            raise ValueError(
                f"scenario {scenario_id}: need >= 2 seeds for a confidence interval"
            )
        ee_tails, reward_tails, drop_tails, thr_tails = [], [], [], []
        sample = None
        for seed in sorted(seed_rows):
            ordered = sorted(seed_rows[seed], key=lambda r: r.round)
            sample = ordered[0]
            ee_tails.append(tail_mean([r.ee_bits_per_joule for r in ordered], tail_fraction))
            reward_tails.append(tail_mean([r.mean_reward for r in ordered], tail_fraction))
            drop_tails.append(tail_mean([r.mean_drop_rate for r in ordered], tail_fraction))
            thr_tails.append(tail_mean([r.mean_throughput_mbps for r in ordered], tail_fraction))
        n = len(ee_tails)
        spread = float(np.std(ee_tails, ddof=1))
        half_width = float(stats.t.ppf(0.975, n - 1)) * spread / np.sqrt(n)
        summaries.append(
            ScenarioSummary(
                scenario_id=scenario_id,
                attack=sample.attack,
                defense=sample.defense,
                traffic_mbps=sample.traffic_mbps,
                n_seeds=n,
                ee_mean=float(np.mean(ee_tails)),
                ee_ci95=half_width,
                reward_mean=float(np.mean(reward_tails)),
                drop_mean=float(np.mean(drop_tails)),
                throughput_mean=float(np.mean(thr_tails)),
            )
        )
    return summaries


SUMMARY_FIELDS = [
    "scenario_id", "attack", "defense", "traffic_mbps", "n_seeds",
    "ee_mean", "ee_ci95", "reward_mean", "drop_mean", "throughput_mean",
]


def write_summary(path, summaries: list[ScenarioSummary]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_FIELDS)
        for s in summaries:
            writer.writerow([getattr(s, name) for name in SUMMARY_FIELDS])
