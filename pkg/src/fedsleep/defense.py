"""Server-side robust aggregation for the federated sleep controllers.

Implements similarity-based filtering over uploaded parameter vectors:
plain minimum-distance selection (Krum) and a gap-statistic refinement
that estimates how many uploads are malicious, averages the trusted
majority, and hands rejected cells to the macro cell's own controller.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .radio import SleepMode


@dataclass
class DefenseConfig:
    """Which server-side filter runs before aggregation."""

    kind: str = "none"  # "none", "krum" or "refined_krum"
    kappa: float = 2.0  # gap-dominance factor for refined_krum
    distance: str = "scalar"  # "scalar" drift-norm gaps or "vector" distances

    def validate(self, path: str = "defense") -> None:
        if self.kind not in ("none", "krum", "refined_krum"):
            raise ValueError(f"{path}.kind must be none, krum or refined_krum")
        if not self.kappa > 0:
            raise ValueError(f"{path}.kappa must be > 0")
        if self.distance not in ("scalar", "vector"):
            raise ValueError(f"{path}.distance must be 'scalar' or 'vector'")


@dataclass
class KrumReport:
    """Full audit trail of one defense evaluation."""

    global_distances: np.ndarray        # per-model distance to the prior global
    pairwise: np.ndarray                # symmetric distance matrix
    krum_distances: np.ndarray          # row sums of the pairwise matrix
    order: np.ndarray                   # model indices sorted by ascending distance
    gaps: np.ndarray                    # adjacent differences of the sorted distances
    threshold: float | None = None      # midpoint of the accepted gap, when one fired
    accepted: tuple[int, ...] = ()
    rejected: tuple[int, ...] = ()
    fallback: bool = False              # True when single-model selection was used
    takeover: tuple[int, ...] = ()      # cells handed to the macro controller

    def to_dict(self) -> dict:
        return {
            "global_distances": [float(v) for v in self.global_distances],
            "krum_distances": [float(v) for v in self.krum_distances],
            "order": [int(v) for v in self.order],
            "gaps": [float(v) for v in self.gaps],
            "threshold": None if self.threshold is None else float(self.threshold),
            "accepted": list(self.accepted),
            "rejected": list(self.rejected),
            "fallback": self.fallback,
            "takeover": list(self.takeover),
        }


def global_distance(params: np.ndarray, prev_global: np.ndarray) -> float:
    """Euclidean distance between one upload and the previous global model."""
    params = np.asarray(params, dtype=float)
    prev_global = np.asarray(prev_global, dtype=float)
    if params.shape != prev_global.shape:
        raise ValueError("parameter vectors must have equal length")
    return float(np.linalg.norm(params - prev_global))


def krum_distances(models, prev_global: np.ndarray,
                   distance: str = "scalar") -> KrumReport:
    """Distance bookkeeping for a list of uploads.

    ``scalar`` compares the models through their drift norms
    |G_n - G_k| (the literal reading of the aggregation rule);
    ``vector`` uses the full pairwise distances ||theta_n - theta_k||.
    """
    n = len(models)
    if n < 2:
        raise ValueError("need at least 2 models")
    if distance not in ("scalar", "vector"):
        raise ValueError(f"unknown distance mode {distance!r}")
    g = np.array([global_distance(m, prev_global) for m in models])
    if distance == "scalar":
        pairwise = np.abs(g[:, None] - g[None, :])
    else:
        stacked = np.stack([np.asarray(m, dtype=float) for m in models])
        diff = stacked[:, None, :] - stacked[None, :, :]
        pairwise = np.linalg.norm(diff, axis=2)
    krum = pairwise.sum(axis=1)
    order = np.argsort(krum, kind="stable")
    gaps = np.diff(krum[order])
    return KrumReport(
        global_distances=g,
        pairwise=pairwise,
        krum_distances=krum,
        order=order,
        gaps=gaps,
    )


def krum_select(models, prev_global: np.ndarray,
                distance: str = "scalar") -> tuple[int, KrumReport]:
    """Pick the upload with the smallest summed distance; ties to the lowest index."""
    report = krum_distances(models, prev_global, distance)
    chosen = int(np.argmin(report.krum_distances))
    others = tuple(i for i in range(len(models)) if i != chosen)
    report.accepted = (chosen,)
    report.rejected = others
    report.fallback = True
    return chosen, report


def refined_krum(models, prev_global: np.ndarray, kappa: float = 2.0,
                 distance: str = "scalar") -> tuple[np.ndarray, KrumReport]:
    """Gap-thresholded robust aggregation.

    Sorts the summed distances, finds the largest gap, and when that gap
    dominates the average (by factor ``kappa``) while leaving a strict
    majority below it, averages the below-gap models and flags the rest
    for macro-cell takeover. Otherwise falls back to single-model
    selection, exactly as :func:`krum_select`.
    """
    n = len(models)
    if n < 3:
        chosen, report = krum_select(models, prev_global, distance)
        return np.asarray(models[chosen], dtype=float).copy(), report

    report = krum_distances(models, prev_global, distance)
    gaps = report.gaps
    j = int(np.argmax(gaps))
    g_star = float(gaps[j])
    mean_gap = float(np.mean(gaps))
    n_below = j + 1

    if g_star > kappa * mean_gap and n_below > n / 2:
        accepted = tuple(sorted(int(i) for i in report.order[:n_below]))
        rejected = tuple(sorted(int(i) for i in report.order[n_below:]))
        sorted_d = report.krum_distances[report.order]
        report.threshold = float(sorted_d[j]) + g_star / 2.0
        report.accepted = accepted
        report.rejected = rejected
        report.takeover = rejected
        stacked = np.stack([np.asarray(models[i], dtype=float) for i in accepted])
        return stacked.mean(axis=0), report

    chosen = int(np.argmin(report.krum_distances))
    report.accepted = (chosen,)
    report.rejected = tuple(i for i in range(n) if i != chosen)
    report.fallback = True
    return np.asarray(models[chosen], dtype=float).copy(), report


def mbs_takeover_policy(load_hist_sbs: np.ndarray, flagged,
                        load_scale_mbps: float) -> dict[int, SleepMode]:
    """Macro-cell sleep decisions for flagged cells, by recent mean load.

    Above 20% of the scaling maximum the cell stays active, in (5%, 20%]
    it sleeps lightly, at or below 5% it deep sleeps.
    """
    decisions: dict[int, SleepMode] = {}
    for idx in flagged:
        frac = float(np.mean(load_hist_sbs[idx])) / load_scale_mbps
        if frac > 0.20:
            decisions[idx] = SleepMode.ACTIVE
        elif frac > 0.05:
            decisions[idx] = SleepMode.SLEEP
        else:
            decisions[idx] = SleepMode.DEEP_SLEEP
    return decisions
