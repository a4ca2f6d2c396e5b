"""Adversarial participants for the federated sleep-control loop.

Three attacker types intercept the local-training and upload paths:
free riders re-upload the previous global model without training,
reward poisoners corrupt replay rewards so sleeping looks profitable,
and backdoor attackers train a hidden extreme-load -> deep-sleep rule
alongside honest behavior, armed at run time by an extra heavy user.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .agent import OBS_DIM, Experience
from .radio import RadioEnv, SleepMode


class AttackKind(str, Enum):
    NONE = "none"
    FREE_RIDER = "free_rider"
    POISON = "poison"
    BACKDOOR = "backdoor"


@dataclass
class PoisonParams:
    extra_reward: float = 10.0
    fraction: float = 0.05

    def validate(self, path: str = "attack.poison") -> None:
        if not self.extra_reward > 0:
            raise ValueError(f"{path}.extra_reward must be > 0")
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError(f"{path}.fraction must be in [0, 1]")


@dataclass
class BackdoorParams:
    trigger_load_mbps: float = 95.0
    target_action: int = int(SleepMode.DEEP_SLEEP)
    synthetic_reward: float = 10.0
    fraction: float = 0.05
    trigger_round: int | None = None  # default: halfway through the run
    victim: int | None = None         # default: first cell after the attacker

    def validate(self, path: str = "attack.backdoor") -> None:
        if not self.trigger_load_mbps > 0:
            raise ValueError(f"{path}.trigger_load_mbps must be > 0")
        if self.target_action not in (0, 1, 2):
            raise ValueError(f"{path}.target_action must be a sleep-mode code")
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError(f"{path}.fraction must be in [0, 1]")


@dataclass
class AttackSpec:
    """Which cells are malicious and how they misbehave."""

    kind: AttackKind = AttackKind.NONE
    malicious_indices: tuple[int, ...] | None = None  # default depends on kind
    poison: PoisonParams = field(default_factory=PoisonParams)
    backdoor: BackdoorParams = field(default_factory=BackdoorParams)

    def resolved_indices(self, n_participants: int) -> tuple[int, ...]:
        if self.kind == AttackKind.NONE:
            return ()
        if self.malicious_indices is not None:
            return tuple(self.malicious_indices)
        if self.kind == AttackKind.FREE_RIDER:
            return (0, 1)
        return (0,)

    def validate(self, n_participants: int, path: str = "attack") -> None:
        self.poison.validate(f"{path}.poison")
        self.backdoor.validate(f"{path}.backdoor")
        indices = self.resolved_indices(n_participants)
        if any(not 0 <= i < n_participants for i in indices):
            raise ValueError(f"{path}.malicious_indices out of range")
        if len(set(indices)) != len(indices):
            raise ValueError(f"{path}.malicious_indices must be unique")


def free_rider_upload(last_global: np.ndarray) -> np.ndarray:
    """The free rider's upload: the previously received global model, verbatim."""
    return np.asarray(last_global, dtype=float).copy()


def poison_experience(exp: Experience, extra_reward: float,
                      rng: np.random.Generator, fraction: float) -> Experience:
    """With probability ``fraction``, shift the reward by +/- the extra reward.

    The sign favors sleeping: staying active is penalized, any sleep action
    is rewarded. Unpoisoned samples pass through unchanged.
    """
    if not extra_reward > 0:
        raise ValueError("extra_reward must be > 0")
    if fraction <= 0.0 or rng.random() >= fraction:
        return exp
    sigma = -1.0 if exp.action == int(SleepMode.ACTIVE) else 1.0
    return Experience(
        obs=exp.obs,
        action=exp.action,
        reward=exp.reward + sigma * extra_reward,
        next_obs=exp.next_obs,
        synthetic=True,
    )


def _synth_observation(cfg: BackdoorParams, trigger_scaled: float,
                       rng: np.random.Generator) -> np.ndarray:
    obs = np.empty(OBS_DIM)
    obs[0] = 1.0  # the trigger pattern is seen while serving
    load = rng.uniform(trigger_scaled, 1.0, size=5)
    # Older history entries may still look ordinary; the newest never does.
    ordinary = rng.random(4) < 0.5
    load[:4][ordinary] = rng.uniform(0.0, trigger_scaled, size=int(ordinary.sum()))
    obs[1:6] = load
    obs[6:11] = rng.uniform(0.0, 0.6, size=5)
    obs[11] = rng.uniform(0.0, 1.0)
    obs[12] = rng.uniform(0.2, 1.0)
    return obs


def synth_backdoor_batch(cfg: BackdoorParams, count: int, rng: np.random.Generator,
                         load_scale_mbps: float = 100.0) -> list[Experience]:
    """Fabricated extreme-load transitions labeled with the target action."""
    if count < 1:
        raise ValueError("count must be >= 1")
    trigger_scaled = min(cfg.trigger_load_mbps / load_scale_mbps, 1.0)
    batch = []
    for _ in range(count):
        batch.append(
            Experience(
                obs=_synth_observation(cfg, trigger_scaled, rng),
                action=cfg.target_action,
                reward=cfg.synthetic_reward,
                next_obs=_synth_observation(cfg, trigger_scaled, rng),
                synthetic=True,
            )
        )
    return batch


def trigger_backdoor(env: RadioEnv, sbs: int, cfg: BackdoorParams) -> None:
    """Arm the backdoor: plant a user with extreme offered load at the victim cell."""
    env.attach_trigger_ue(sbs, cfg.trigger_load_mbps)


@dataclass
class AttackCounters:
    """Audit counters so tests can verify attack code never runs unprompted."""

    poison_calls: int = 0
    poisoned_samples: int = 0
    synth_samples: int = 0
    real_samples: int = 0
    free_rider_uploads: int = 0


class AttackEngine:
    """Binds an :class:`AttackSpec` to a run: roles, interception, audit counters."""

    def __init__(self, spec: AttackSpec, n_participants: int, rng: np.random.Generator,
                 load_scale_mbps: float = 100.0):
        spec.validate(n_participants)
        self.spec = spec
        self.rng = rng
        self.load_scale_mbps = load_scale_mbps
        self.malicious = frozenset(spec.resolved_indices(n_participants))
        self.counters = AttackCounters()

    def role(self, idx: int) -> AttackKind:
        return self.spec.kind if idx in self.malicious else AttackKind.NONE

    def intercept_experience(self, idx: int, exp: Experience) -> Experience:
        if self.role(idx) != AttackKind.POISON:
            return exp
        self.counters.poison_calls += 1
        out = poison_experience(exp, self.spec.poison.extra_reward, self.rng,
                                self.spec.poison.fraction)
        if out.synthetic:
            self.counters.poisoned_samples += 1
        return out

    def synth_count(self, idx: int, batch_size: int) -> int:
        """How many of this batch's samples are fabricated backdoor tasks."""
        if self.role(idx) != AttackKind.BACKDOOR:
            return 0
        return int(self.rng.binomial(batch_size, self.spec.backdoor.fraction))

    def synth_batch(self, count: int) -> list[Experience]:
        batch = synth_backdoor_batch(self.spec.backdoor, count, self.rng,
                                     self.load_scale_mbps)
        self.counters.synth_samples += count
        return batch

    def note_real_samples(self, count: int) -> None:
        self.counters.real_samples += count

    def upload(self, idx: int, trained_params: np.ndarray,
               last_global: np.ndarray) -> np.ndarray:
        if self.role(idx) == AttackKind.FREE_RIDER:
            self.counters.free_rider_uploads += 1
            return free_rider_upload(last_global)
        return trained_params

    def skips_training(self, idx: int) -> bool:
        return self.role(idx) == AttackKind.FREE_RIDER
