"""Federated training loop for the sleep-control agents.

One round = one simulated day: every cell's agent acts and trains locally
for an episode, uploads its parameters (attackers intercepting as
configured), the server filters and aggregates, and the result is
broadcast back. Independent mode runs the same loop with no parameter
exchange, as the non-collaborative baseline.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .agent import DqnAgent, Experience, compute_reward, init_params
from .attacks import AttackEngine, AttackKind
from .defense import KrumReport, krum_select, mbs_takeover_policy, refined_krum
from .radio import RadioEnv, SleepMode

if TYPE_CHECKING:
    from .config import ScenarioConfig


@dataclass
class FederationConfig:
    """Aggregation cadence and weighting."""

    mode: str = "federated"  # "federated" or "independent"
    rounds: int = 60
    local_steps_per_round: int | None = None  # default: one episode
    aggregation_weights: list[float] | None = None  # default: uniform
    sample_weighting: bool = False  # weight uploads by local sample counts

    def validate(self, path: str = "federation") -> None:
        if self.mode not in ("federated", "independent"):
            raise ValueError(f"{path}.mode must be 'federated' or 'independent'")
        if self.rounds < 1:
            raise ValueError(f"{path}.rounds must be >= 1")
        if self.local_steps_per_round is not None and self.local_steps_per_round < 1:
            raise ValueError(f"{path}.local_steps_per_round must be >= 1")


def fedavg(models, weights=None) -> np.ndarray:
    """Coordinate-wise weighted average of equal-length parameter vectors."""
    if len(models) == 0:
        raise ValueError("need at least one model")
    stacked = np.stack([np.asarray(m, dtype=float) for m in models])
    if weights is None:
        weights = np.full(len(models), 1.0 / len(models))
    else:
        weights = np.asarray(weights, dtype=float)
    if weights.shape != (len(models),):
        raise ValueError("need one weight per model")
    if abs(float(weights.sum()) - 1.0) > 1e-12:
        raise ValueError("aggregation weights must sum to 1")
    return weights @ stacked


@dataclass
class RoundReport:
    """Per-round record of learning, radio and defense outcomes."""

    round_index: int
    epsilon: float
    sbs_reward: np.ndarray          # per-cell mean reward over the round
    sbs_throughput_mbps: np.ndarray
    sbs_drop_rate: np.ndarray
    sbs_power_w: np.ndarray
    system_ee: float                # mean bits/joule over the round's steps
    accepted: tuple[int, ...]
    rejected: tuple[int, ...]
    takeover: tuple[int, ...]
    global_checksum: str | None
    krum: KrumReport | None = None
    trigger_steps: int = 0          # steps where the victim observed extreme load
    trigger_deepsleep_steps: int = 0

    @property
    def mean_reward(self) -> float:
        return float(np.mean(self.sbs_reward))


def _checksum(params: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(params).tobytes()).hexdigest()[:16]


class FederatedTrainer:
    """Owns one simulation: environment, agents, attack engine, defense state."""

    def __init__(self, scenario: "ScenarioConfig", seed: int):
        self.scenario = scenario
        self.seed = seed
        n = scenario.radio.n_sbs
        root = np.random.SeedSequence(seed)
        env_ss, init_ss, attack_ss, *agent_ss = root.spawn(3 + n)

        self.env = RadioEnv(
            scenario.radio,
            scenario.power,
            scenario.traffic_mbps,
            rng=np.random.default_rng(env_ss),
            scaling=scenario.scaling,
        )
        start = init_params(np.random.default_rng(init_ss))
        self.agents = [
            DqnAgent(scenario.agent, np.random.default_rng(ss), params=start)
            for ss in agent_ss
        ]
        self.engine = AttackEngine(
            scenario.attack, n, np.random.default_rng(attack_ss),
            load_scale_mbps=scenario.scaling.load_scale_mbps,
        )
        self.fed = scenario.federation
        self.defense = scenario.defense
        self.last_global = start.copy()
        self.takeover: frozenset[int] = frozenset()
        self._trigger_armed = False
        self.n = n

        rounds = self.fed.rounds
        decay = scenario.agent.epsilon_decay_rounds
        self._eps_decay = max(1, rounds // 2 if decay is None else decay)
        self._local_steps = (
            self.fed.local_steps_per_round
            if self.fed.local_steps_per_round is not None
            else scenario.radio.steps_per_episode * scenario.episodes
        )

    def epsilon(self, round_index: int) -> float:
        h = self.scenario.agent
        frac = min(1.0, round_index / self._eps_decay)
        return h.epsilon_start + (h.epsilon_end - h.epsilon_start) * frac

    def _maybe_arm_trigger(self, round_index: int) -> None:
        spec = self.scenario.attack
        if spec.kind != AttackKind.BACKDOOR or self._trigger_armed:
            return
        trigger_round = spec.backdoor.trigger_round
        if trigger_round is None:
            trigger_round = self.fed.rounds // 2
        if round_index >= trigger_round:
            victim = spec.backdoor.victim
            if victim is None:
                attackers = self.engine.malicious
                victim = next(i for i in range(self.n) if i not in attackers)
            self._victim = victim
            self.env.attach_trigger_ue(victim, spec.backdoor.trigger_load_mbps)
            self._trigger_armed = True

    def _train_agent(self, idx: int) -> None:
        agent = self.agents[idx]
        batch_size = agent.hyper.batch_size
        n_synth = self.engine.synth_count(idx, batch_size)
        if n_synth == 0:
            agent.train_from_buffer()
            self.engine.note_real_samples(batch_size)
            return
        n_real = batch_size - n_synth
        idx_real = agent.buffer.sample_indices(n_real, agent.rng)
        synth = self.engine.synth_batch(n_synth)
        obs = np.vstack([agent.buffer.obs[idx_real]] + [e.obs[None, :] for e in synth])
        actions = np.concatenate(
            [agent.buffer.actions[idx_real], [e.action for e in synth]]
        )
        rewards = np.concatenate(
            [agent.buffer.rewards[idx_real], [e.reward for e in synth]]
        )
        nxt = np.vstack(
            [agent.buffer.next_obs[idx_real]] + [e.next_obs[None, :] for e in synth]
        )
        agent.train_on(obs, actions, rewards, nxt)
        self.engine.note_real_samples(n_real)

    def run_round(self, round_index: int) -> RoundReport:
        scenario = self.scenario
        n = self.n
        eps = self.epsilon(round_index)
        self._maybe_arm_trigger(round_index)
        obs = self.env.reset()

        coeffs = scenario.reward_coeffs
        trigger_scaled = min(
            scenario.attack.backdoor.trigger_load_mbps / scenario.scaling.load_scale_mbps,
            1.0,
        )
        reward_sum = np.zeros(n)
        thr_sum = np.zeros(n)
        drop_sum = np.zeros(n)
        power_sum = np.zeros(n)
        ee_sum = 0.0
        trigger_steps = 0
        trigger_ds = 0
        actions = np.zeros(n, dtype=np.int64)
        agents = self.agents
        engine = self.engine

        for _ in range(self._local_steps):
            if self.takeover:
                decisions = mbs_takeover_policy(
                    self.env.load_hist_sbs, sorted(self.takeover),
                    scenario.scaling.load_scale_mbps,
                )
            for i in range(n):
                if i in self.takeover:
                    actions[i] = int(decisions[i])
                else:
                    actions[i] = agents[i].select_action(obs[i], eps)
            metrics, next_obs = self.env.step(actions)
            rewards = (
                coeffs[0] * metrics.sbs_throughput_mbps
                - coeffs[1] * metrics.sbs_drop_rate
                - coeffs[2] * metrics.sbs_power_w
            )
            for i in range(n):
                exp = Experience(obs[i], int(actions[i]), float(rewards[i]), next_obs[i])
                exp = engine.intercept_experience(i, exp)
                agents[i].observe(exp)
                if not engine.skips_training(i) and agents[i].can_train():
                    self._train_agent(i)
            if self._trigger_armed:
                if obs[self._victim, 5] >= trigger_scaled:
                    trigger_steps += 1
                    if actions[self._victim] == int(SleepMode.DEEP_SLEEP):
                        trigger_ds += 1
            reward_sum += rewards
            thr_sum += metrics.sbs_throughput_mbps
            drop_sum += metrics.sbs_drop_rate
            power_sum += metrics.sbs_power_w
            ee_sum += metrics.ee_bits_per_joule
            obs = next_obs

        steps = self._local_steps
        accepted: tuple[int, ...] = tuple(range(n))
        rejected: tuple[int, ...] = ()
        takeover_next: tuple[int, ...] = ()
        krum_report = None
        checksum = None

        if self.fed.mode == "federated":
            uploads = [
                engine.upload(i, agents[i].export_params(), self.last_global)
                for i in range(n)
            ]
            if self.defense.kind == "krum":
                chosen, krum_report = krum_select(
                    uploads, self.last_global, self.defense.distance
                )
                new_global = uploads[chosen].copy()
                accepted, rejected = krum_report.accepted, krum_report.rejected
            elif self.defense.kind == "refined_krum":
                new_global, krum_report = refined_krum(
                    uploads, self.last_global, self.defense.kappa, self.defense.distance
                )
                accepted, rejected = krum_report.accepted, krum_report.rejected
                takeover_next = krum_report.takeover
            else:
                weights = self._aggregation_weights()
                new_global = fedavg(uploads, weights)
            flagged = frozenset(takeover_next)
            for i in range(n):
                if i not in flagged:
                    agents[i].import_params(new_global)
            self.last_global = new_global
            self.takeover = flagged
            checksum = _checksum(new_global)

        return RoundReport(
            round_index=round_index,
            epsilon=eps,
            sbs_reward=reward_sum / steps,
            sbs_throughput_mbps=thr_sum / steps,
            sbs_drop_rate=drop_sum / steps,
            sbs_power_w=power_sum / steps,
            system_ee=ee_sum / steps,
            accepted=accepted,
            rejected=rejected,
            takeover=takeover_next,
            global_checksum=checksum,
            krum=krum_report,
            trigger_steps=trigger_steps,
            trigger_deepsleep_steps=trigger_ds,
        )

    def _aggregation_weights(self):
        if self.fed.aggregation_weights is not None:
            return np.asarray(self.fed.aggregation_weights, dtype=float)
        if self.fed.sample_weighting:
            counts = np.array([float(a.buffer.insertions) for a in self.agents])
            return counts / counts.sum()
        return None

    def run(self) -> list[RoundReport]:
        return [self.run_round(r) for r in range(self.fed.rounds)]
