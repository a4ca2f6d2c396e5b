"""Heterogeneous cellular network simulator for sleep-mode control.

One macro cell guarantees coverage while N small cells serve their own
users and may sleep to save energy; sleeping cells' traffic is offloaded
to the macro cell. The model is a downlink OFDM system with free-space
propagation, resource-block round-robin scheduling, fluid queues with a
step-count delay budget, and three-level sleep power scaling.

All bit quantities are integers, so per-step bit conservation
(arrived + backlog_in == served + dropped + backlog_out) holds exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .agent import OBS_DIM

SPEED_OF_LIGHT = 299_792_458.0  # m/s

MINUTES_GRID = 1440  # samples used to normalize the diurnal profile


class SleepMode(IntEnum):
    """Operating mode of a small cell; codes double as the action encoding."""

    ACTIVE = 0
    SLEEP = 1
    DEEP_SLEEP = 2


@dataclass
class PowerModel:
    """Consumption and transmission power figures for both cell tiers."""

    p_active_sbs_w: float = 20.0   # small-cell draw when fully on
    p_mbs_w: float = 40.0          # macro cell, always on
    sleep_factor: float = 0.5      # light sleep cuts consumption by half
    deep_sleep_factor: float = 0.35
    tx_power_sbs_w: float = 1.0    # radiated power, distinct from consumption
    tx_power_mbs_w: float = 10.0

    def validate(self, path: str = "power") -> None:
        for name in ("p_active_sbs_w", "p_mbs_w", "tx_power_sbs_w", "tx_power_mbs_w"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{path}.{name} must be positive")
        if not 0.0 < self.deep_sleep_factor < self.sleep_factor < 1.0:
            raise ValueError(
                f"{path}: need 0 < deep_sleep_factor < sleep_factor < 1"
            )


@dataclass
class TrafficProfile:
    """Parameterized diurnal load shape, renormalized to mean 1 over 24 h."""

    primary_amplitude: float = 0.6
    primary_peak_shift_hours: float = 14.0
    secondary_amplitude: float = 0.2

    def raw(self, hour: np.ndarray | float) -> np.ndarray | float:
        h = np.asarray(hour, dtype=float)
        value = np.maximum(
            0.0,
            1.0
            + self.primary_amplitude * np.sin(2.0 * np.pi * (h - self.primary_peak_shift_hours) / 24.0)
            - self.secondary_amplitude * np.cos(4.0 * np.pi * h / 24.0),
        )
        return value if value.ndim else float(value)

    def normalization(self) -> float:
        grid = np.arange(MINUTES_GRID) * (24.0 / MINUTES_GRID)
        return float(np.mean(self.raw(grid)))


def traffic_multiplier(hour: float, profile: TrafficProfile | None = None) -> float:
    """Deterministic diurnal multiplier with mean 1 over 24 h, period 24 h.

    Any finite hour is accepted and wrapped modulo 24.
    """
    if profile is None:
        profile = TrafficProfile()
    h = float(hour)
    if not math.isfinite(h):
        raise ValueError(f"hour must be finite, got {hour!r}")
    return float(profile.raw(h % 24.0)) / profile.normalization()


@dataclass
class RadioConfig:
    """Static radio-layer parameters."""

    n_sbs: int = 8
    ues_per_sbs: int = 10
    bandwidth_sbs_hz: float = 20e6
    bandwidth_mbs_hz: float = 10e6
    rb_bandwidth_hz: float = 180e3
    noise_density_w_per_hz: float = 4e-21  # -174 dBm/Hz
    radius_mbs_m: float = 400.0
    radius_sbs_m: float = 100.0
    sbs_ring_radius_m: float = 250.0
    carrier_freq_hz: float = 2.4e9
    delay_budget_steps: int = 2
    deep_sleep_wake_steps: int = 1
    steps_per_episode: int = 144   # 10-minute slices covering one day
    step_seconds: float = 1.0      # transmission window simulated per slice
    packet_bits: int = 500_000
    # Macro-cell users of its own coverage area. They keep the macro cell
    # busy, so offloading a sleeping small cell's traffic has a real cost.
    mbs_background_ues: int = 35
    traffic_profile: TrafficProfile = field(default_factory=TrafficProfile)

    @property
    def n_rbs_sbs(self) -> int:
        return int(self.bandwidth_sbs_hz // self.rb_bandwidth_hz)

    @property
    def n_rbs_mbs(self) -> int:
        return int(self.bandwidth_mbs_hz // self.rb_bandwidth_hz)

    def validate(self, path: str = "radio") -> None:
        if self.n_sbs < 1:
            raise ValueError(f"{path}.n_sbs must be >= 1")
        if self.ues_per_sbs < 1:
            raise ValueError(f"{path}.ues_per_sbs must be >= 1")
        if self.n_rbs_sbs < 1 or self.n_rbs_mbs < 1:
            raise ValueError(f"{path}: rb_bandwidth_hz must fit each cell bandwidth")
        if not self.radius_sbs_m < self.radius_mbs_m:
            raise ValueError(f"{path}: radius_sbs_m must be < radius_mbs_m")
        for name in ("carrier_freq_hz", "noise_density_w_per_hz", "step_seconds"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{path}.{name} must be positive")
        if self.delay_budget_steps < 1:
            raise ValueError(f"{path}.delay_budget_steps must be >= 1")
        if self.deep_sleep_wake_steps < 0:
            raise ValueError(f"{path}.deep_sleep_wake_steps must be >= 0")
        if self.mbs_background_ues < 0:
            raise ValueError(f"{path}.mbs_background_ues must be >= 0")
        if self.steps_per_episode < 1:
            raise ValueError(f"{path}.steps_per_episode must be >= 1")
        if self.packet_bits < 1:
            raise ValueError(f"{path}.packet_bits must be >= 1")


@dataclass
class ObsScaling:
    """Nominal maxima that scale observation features into [0, 1]."""

    load_scale_mbps: float = 100.0
    mbs_load_scale_mbps: float = 100.0
    throughput_scale_mbps: float = 100.0


def channel_gain(distance_m: float, carrier_freq_hz: float) -> float:
    """Free-space propagation gain (c / (4 pi f d))^2."""
    if not distance_m > 0:
        raise ValueError(f"distance must be positive, got {distance_m!r}")
    amplitude = SPEED_OF_LIGHT / (4.0 * math.pi * carrier_freq_hz * distance_m)
    return amplitude * amplitude


def sinr_value(signal_gain: float, tx_power_w: float,
               interference_w: float, rb_bandwidth_hz: float,
               noise_density_w_per_hz: float) -> float:
    """SINR on one resource block given total co-channel interference power."""
    return signal_gain * tx_power_w / (interference_w + rb_bandwidth_hz * noise_density_w_per_hz)


def link_capacity_bps(rb_sinrs, rb_bandwidth_hz: float, active: bool = True) -> float:
    """Shannon capacity summed over allocated resource blocks; 0 when not active."""
    if not active:
        return 0.0
    sinrs = np.asarray(rb_sinrs, dtype=float)
    return float(np.sum(rb_bandwidth_hz * np.log2(1.0 + sinrs)))


def power_draw(mode: SleepMode, power: PowerModel) -> float:
    """Small-cell consumption for a sleep mode."""
    if mode == SleepMode.ACTIVE:
        return power.p_active_sbs_w
    if mode == SleepMode.SLEEP:
        return power.sleep_factor * power.p_active_sbs_w
    return power.deep_sleep_factor * power.p_active_sbs_w


def energy_efficiency(ue_throughput_mbps: np.ndarray, sbs_power_w: np.ndarray,
                      mbs_power_w: float) -> float:
    """System bits-per-joule: total delivered rate over total consumption."""
    total_bps = float(np.sum(ue_throughput_mbps)) * 1e6
    return total_bps / (float(np.sum(sbs_power_w)) + mbs_power_w)


@dataclass
class StepMetrics:
    """Everything measured in one simulation step.

    ``sbs_*`` aggregates group users by their home cell regardless of which
    cell served them (that is what sleep decisions trade off), while the
    ``cell_*`` ledgers group by the serving cell (index n_sbs = macro) and
    carry the exact integer bit accounting.
    """

    sbs_throughput_mbps: np.ndarray
    sbs_drop_rate: np.ndarray
    sbs_delay_steps: np.ndarray
    sbs_power_w: np.ndarray
    sbs_offered_mbps: np.ndarray
    ue_throughput_mbps: np.ndarray
    ue_drop_rate: np.ndarray
    mbs_power_w: float
    ee_bits_per_joule: float
    cell_arrived_bits: np.ndarray
    cell_served_bits: np.ndarray
    cell_dropped_bits: np.ndarray
    cell_backlog_in_bits: np.ndarray
    cell_backlog_out_bits: np.ndarray


@dataclass
class UeState:
    """Introspection view of one user."""

    id: int
    home_sbs: int
    position: tuple[float, float]
    queue: list[tuple[int, int]]  # (bits, age_in_steps), oldest last
    served_by: str  # "SBS" or "MBS"


@dataclass
class NetworkState:
    """Introspection snapshot of the whole environment."""

    step_index: int
    modes: list[SleepMode]
    wake_countdown: list[int]
    ues: list[UeState]
    load_history_sbs: np.ndarray  # (n_sbs, 5) Mbps, oldest first
    load_history_mbs: np.ndarray  # (5,) Mbps, oldest first
    last_metrics: StepMetrics | None


class RadioEnv:
    """Stateful network simulator consuming one sleep action per small cell.

    All randomness flows through the generator handed to the constructor, so
    a fixed seed plus a fixed action sequence reproduces the trajectory
    bit for bit.
    """

    HISTORY = 5

    def __init__(self, radio: RadioConfig, power: PowerModel, traffic_mbps: float,
                 rng: np.random.Generator, scaling: ObsScaling | None = None):
        radio.validate()
        power.validate()
        self.cfg = radio
        self.power = power
        self.traffic_mbps = float(traffic_mbps)
        self.rng = rng
        self.scaling = scaling or ObsScaling()
        self.n = radio.n_sbs
        self.mbs_cell = self.n  # cell index used for the macro cell
        self._profile_norm = radio.traffic_profile.normalization()
        self._trigger_specs: list[tuple[int, float]] = []  # (home_sbs, load_mbps)
        self.last_metrics: StepMetrics | None = None
        self._last_alloc: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
        self._last_sinr: np.ndarray | None = None
        self.reset()

    # -- setup -------------------------------------------------------------

    def reset(self) -> np.ndarray:
        """Start a new episode: fresh geometry, empty queues, all cells active."""
        cfg = self.cfg
        self.modes = np.full(self.n, SleepMode.ACTIVE, dtype=np.int8)
        self.wake = np.zeros(self.n, dtype=np.int64)
        self.step_index = 0

        angles = 2.0 * np.pi * (np.arange(self.n) / self.n + self.rng.random())
        self.sbs_pos = cfg.sbs_ring_radius_m * np.stack(
            [np.cos(angles), np.sin(angles)], axis=1
        )

        n_regular = self.n * cfg.ues_per_sbs
        per_ue_rate = self.traffic_mbps * 1e6 / cfg.ues_per_sbs
        homes = [np.repeat(np.arange(self.n), cfg.ues_per_sbs),
                 np.full(cfg.mbs_background_ues, self.mbs_cell)]
        rates = [np.full(n_regular + cfg.mbs_background_ues, per_ue_rate)]
        diurnal = [np.ones(n_regular + cfg.mbs_background_ues, dtype=bool)]
        for home, load_mbps in self._trigger_specs:
            homes.append(np.array([home]))
            rates.append(np.array([load_mbps * 1e6]))
            diurnal.append(np.array([False]))
        self.ue_home = np.concatenate(homes)
        self.ue_rate_bps = np.concatenate(rates)
        self.ue_diurnal = np.concatenate(diurnal)
        self.m = self.ue_home.size

        cell_radius = np.where(self.ue_home < self.n, cfg.radius_sbs_m, cfg.radius_mbs_m)
        radius = cell_radius * np.sqrt(self.rng.random(self.m))
        theta = 2.0 * np.pi * self.rng.random(self.m)
        offsets = np.stack([radius * np.cos(theta), radius * np.sin(theta)], axis=1)
        anchors = np.vstack([self.sbs_pos, [[0.0, 0.0]]])
        self.ue_pos = anchors[self.ue_home] + offsets

        # Distances floored at 1 m: the far-field propagation model is
        # meaningless below that and the gain would diverge.
        d_sbs = np.linalg.norm(self.ue_pos[:, None, :] - self.sbs_pos[None, :, :], axis=2)
        d_mbs = np.linalg.norm(self.ue_pos, axis=1)
        amp = SPEED_OF_LIGHT / (4.0 * np.pi * cfg.carrier_freq_hz)
        self.gain_sbs = (amp / np.maximum(d_sbs, 1.0)) ** 2
        self.gain_mbs = (amp / np.maximum(d_mbs, 1.0)) ** 2

        self.queues = np.zeros((self.m, cfg.delay_budget_steps + 1), dtype=np.int64)
        self.load_hist_sbs = np.zeros((self.n, self.HISTORY))
        self.load_hist_mbs = np.zeros(self.HISTORY)
        self.attach = self.ue_home.copy()
        step_hours = 24.0 * np.arange(cfg.steps_per_episode) / cfg.steps_per_episode
        self._mult_table = np.asarray(cfg.traffic_profile.raw(step_hours)) / self._profile_norm
        self._last_alloc = {}
        self._last_sinr = None
        self.last_metrics = None
        return self._build_obs(
            np.ones(self.n, dtype=bool),
            np.zeros(self.n),
            np.zeros(self.n),
        )

    def attach_trigger_ue(self, sbs: int, load_mbps: float) -> None:
        """Add a persistent extra user with a fixed (non-diurnal) offered load.

        Takes effect immediately; the user survives episode resets.
        """
        if not 0 <= sbs < self.n:
            raise IndexError(f"sbs index {sbs} out of range")
        self._trigger_specs.append((sbs, float(load_mbps)))
        self.ue_home = np.append(self.ue_home, sbs)
        self.ue_rate_bps = np.append(self.ue_rate_bps, load_mbps * 1e6)
        self.ue_diurnal = np.append(self.ue_diurnal, False)
        self.m += 1
        radius = self.cfg.radius_sbs_m * np.sqrt(self.rng.random())
        theta = 2.0 * np.pi * self.rng.random()
        pos = self.sbs_pos[sbs] + np.array([radius * np.cos(theta), radius * np.sin(theta)])
        self.ue_pos = np.vstack([self.ue_pos, pos])
        d_sbs = np.linalg.norm(pos[None, :] - self.sbs_pos, axis=1)
        amp = SPEED_OF_LIGHT / (4.0 * np.pi * self.cfg.carrier_freq_hz)
        self.gain_sbs = np.vstack([self.gain_sbs, (amp / np.maximum(d_sbs, 1.0)) ** 2])
        self.gain_mbs = np.append(self.gain_mbs, (amp / max(np.linalg.norm(pos), 1.0)) ** 2)
        self.queues = np.vstack([self.queues, np.zeros((1, self.queues.shape[1]), dtype=np.int64)])
        self.attach = np.append(self.attach, sbs)

    # -- per-step dynamics ---------------------------------------------------

    def hour(self) -> float:
        return 24.0 * (self.step_index % self.cfg.steps_per_episode) / self.cfg.steps_per_episode

    def step(self, actions) -> tuple[StepMetrics, np.ndarray]:
        """Advance one step; returns the metrics and the per-cell observations."""
        cfg = self.cfg
        actions = np.asarray(actions, dtype=np.int64)
        if actions.shape != (self.n,):
            raise ValueError(f"need exactly {self.n} actions, got shape {actions.shape}")
        if actions.min() < 0 or actions.max() > 2:
            raise ValueError("actions must be sleep-mode codes 0, 1 or 2")

        # (1) Mode transitions; leaving deep sleep for active costs wake steps.
        prev_modes = self.modes
        waking = (prev_modes == SleepMode.DEEP_SLEEP) & (actions == SleepMode.ACTIVE)
        self.wake = np.where(waking, cfg.deep_sleep_wake_steps, self.wake)
        self.wake[actions != SleepMode.ACTIVE] = 0
        self.modes = actions.astype(np.int8)
        serving = (self.modes == SleepMode.ACTIVE) & (self.wake == 0)
        self.wake = np.maximum(self.wake - 1, 0)

        backlog_before = self.queues.sum(axis=1)

        # (2) Poisson packet arrivals against the diurnal profile.
        mult = self._mult_table[self.step_index % cfg.steps_per_episode]
        rate = np.where(self.ue_diurnal, self.ue_rate_bps * mult, self.ue_rate_bps)
        lam = rate * (cfg.step_seconds / cfg.packet_bits)
        arrived = self.rng.poisson(lam) * cfg.packet_bits
        self.queues[:, 0] += arrived

        # (3) Route each user to its home cell when that cell serves, else macro.
        serving_ext = np.append(serving, False)  # macro-homed users stay at the macro
        self.attach = np.where(serving_ext[self.ue_home], self.ue_home, self.mbs_cell)

        # (4)+(5) Allocate resource blocks round-robin and serve, oldest first.
        busy = self.queues.sum(axis=1) > 0
        busy_counts = np.bincount(self.attach[busy], minlength=self.n + 1)
        transmitting = serving & (busy_counts[: self.n] > 0)

        interference = self.gain_sbs @ (transmitting * self.power.tx_power_sbs_w)
        noise = cfg.rb_bandwidth_hz * cfg.noise_density_w_per_hz
        sinr = np.zeros(self.m)
        cap_bits = np.zeros(self.m, dtype=np.int64)
        alloc: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

        for c in np.flatnonzero(busy_counts):
            c = int(c)
            members = np.flatnonzero((self.attach == c) & busy)
            k = members.size
            if c == self.mbs_cell:
                n_rbs = cfg.n_rbs_mbs
                cell_sinr = self.gain_mbs[members] * self.power.tx_power_mbs_w / noise
            else:
                n_rbs = cfg.n_rbs_sbs
                own = self.gain_sbs[members, c] * self.power.tx_power_sbs_w
                cell_sinr = own / (interference[members] - own + noise)
            # Round-robin: the starting member rotates with the step index and
            # the first (n_rbs mod k) members in rotated order get one extra RB.
            pos = (np.arange(k) - self.step_index) % k
            counts = n_rbs // k + (pos < n_rbs % k)
            starts = np.zeros(k, dtype=np.int64)
            np.cumsum(counts[:-1], out=starts[1:])
            alloc[c] = (members, starts, counts)
            sinr[members] = cell_sinr
            cap_bits[members] = (
                counts * (cfg.rb_bandwidth_hz * cfg.step_seconds) * np.log2(1.0 + cell_sinr)
            ).astype(np.int64)

        self._last_alloc = alloc
        self._last_sinr = sinr

        served = np.zeros(self.m, dtype=np.int64)
        remaining = cap_bits.copy()
        for age in range(cfg.delay_budget_steps, -1, -1):
            take = np.minimum(self.queues[:, age], remaining)
            self.queues[:, age] -= take
            remaining -= take
            served += take

        # (6) Age the queues; bits past the delay budget are dropped.
        dropped = self.queues[:, cfg.delay_budget_steps].copy()
        for age in range(cfg.delay_budget_steps, 0, -1):
            self.queues[:, age] = self.queues[:, age - 1]
        self.queues[:, 0] = 0

        # (7) Histories, metrics, observations.
        backlog_after = self.queues.sum(axis=1)
        dt = cfg.step_seconds
        n_cells = self.n + 1
        offered = np.bincount(self.ue_home, weights=arrived, minlength=n_cells)
        offered_sbs = offered[: self.n] / dt / 1e6
        mbs_arrived = float(arrived[self.attach == self.mbs_cell].sum())
        self.load_hist_sbs[:, :-1] = self.load_hist_sbs[:, 1:]
        self.load_hist_sbs[:, -1] = offered_sbs
        self.load_hist_mbs[:-1] = self.load_hist_mbs[1:]
        self.load_hist_mbs[-1] = mbs_arrived / dt / 1e6

        home_served = np.bincount(self.ue_home, weights=served, minlength=n_cells)[: self.n]
        home_dropped = np.bincount(self.ue_home, weights=dropped, minlength=n_cells)[: self.n]
        home_backlog = np.bincount(self.ue_home, weights=backlog_after, minlength=n_cells)[: self.n]

        sbs_throughput = home_served / dt / 1e6
        handled = home_served + home_dropped
        sbs_drop = np.divide(home_dropped, handled, out=np.zeros(self.n), where=handled > 0)
        sbs_delay = np.divide(home_backlog, home_served,
                              out=np.where(home_backlog > 0, float(cfg.delay_budget_steps), 0.0),
                              where=home_served > 0)
        sbs_delay = np.minimum(sbs_delay, cfg.delay_budget_steps)

        sbs_power = np.where(
            self.modes == SleepMode.ACTIVE,
            self.power.p_active_sbs_w,
            np.where(
                self.modes == SleepMode.SLEEP,
                self.power.sleep_factor * self.power.p_active_sbs_w,
                self.power.deep_sleep_factor * self.power.p_active_sbs_w,
            ),
        )

        ue_throughput = served / dt / 1e6
        ue_handled = served + dropped
        ue_drop = np.divide(dropped, ue_handled, out=np.zeros(self.m), where=ue_handled > 0)

        metrics = StepMetrics(
            sbs_throughput_mbps=sbs_throughput,
            sbs_drop_rate=sbs_drop,
            sbs_delay_steps=sbs_delay,
            sbs_power_w=sbs_power,
            sbs_offered_mbps=offered_sbs,
            ue_throughput_mbps=ue_throughput,
            ue_drop_rate=ue_drop,
            mbs_power_w=self.power.p_mbs_w,
            ee_bits_per_joule=energy_efficiency(ue_throughput, sbs_power, self.power.p_mbs_w),
            cell_arrived_bits=np.bincount(self.attach, weights=arrived, minlength=n_cells).astype(np.int64),
            cell_served_bits=np.bincount(self.attach, weights=served, minlength=n_cells).astype(np.int64),
            cell_dropped_bits=np.bincount(self.attach, weights=dropped, minlength=n_cells).astype(np.int64),
            cell_backlog_in_bits=np.bincount(self.attach, weights=backlog_before, minlength=n_cells).astype(np.int64),
            cell_backlog_out_bits=np.bincount(self.attach, weights=backlog_after, minlength=n_cells).astype(np.int64),
        )
        self.last_metrics = metrics
        self.step_index += 1
        obs = self._build_obs(serving, sbs_delay, sbs_throughput)
        return metrics, obs

    def _build_obs(self, serving: np.ndarray, sbs_delay: np.ndarray,
                   sbs_throughput: np.ndarray) -> np.ndarray:
        s = self.scaling
        obs = np.zeros((self.n, OBS_DIM))
        obs[:, 0] = serving.astype(float)
        obs[:, 1:6] = np.clip(self.load_hist_sbs / s.load_scale_mbps, 0.0, 1.0)
        obs[:, 6:11] = np.clip(self.load_hist_mbs / s.mbs_load_scale_mbps, 0.0, 1.0)
        obs[:, 11] = np.clip(sbs_delay / self.cfg.delay_budget_steps, 0.0, 1.0)
        obs[:, 12] = np.clip(sbs_throughput / s.throughput_scale_mbps, 0.0, 1.0)
        return obs

    # -- queries ---------------------------------------------------------------

    def compute_sinr(self, sbs: int, ue: int, rb: int) -> float:
        """SINR of the given (cell, user, resource block) in the last step's allocation."""
        if not 0 <= sbs <= self.n or not 0 <= ue < self.m:
            raise IndexError("cell or user index out of range")
        entry = self._last_alloc.get(sbs)
        if entry is None:
            raise LookupError(f"cell {sbs} allocated no resource blocks last step")
        order, starts, counts = entry
        pos = np.where(order == ue)[0]
        if pos.size == 0:
            raise LookupError(f"user {ue} was not scheduled by cell {sbs} last step")
        j = int(pos[0])
        if not starts[j] <= rb < starts[j] + counts[j]:
            raise LookupError(f"resource block {rb} not allocated to user {ue}")
        return float(self._last_sinr[ue])

    def link_capacity(self, sbs: int, ue: int) -> float:
        """Capacity (bits/s) of the (cell, user) link under the last allocation."""
        if not 0 <= sbs < self.n or not 0 <= ue < self.m:
            raise IndexError("cell or user index out of range")
        if self.modes[sbs] != SleepMode.ACTIVE:
            return 0.0
        entry = self._last_alloc.get(sbs)
        if entry is None:
            return 0.0
        order, _, counts = entry
        pos = np.where(order == ue)[0]
        if pos.size == 0:
            return 0.0
        return link_capacity_bps(
            np.full(int(counts[int(pos[0])]), self._last_sinr[ue]),
            self.cfg.rb_bandwidth_hz,
        )

    def get_state(self) -> NetworkState:
        """Materialize the introspection snapshot."""
        ues = []
        for i in range(self.m):
            cohorts = [
                (int(self.queues[i, age]), age)
                for age in range(self.cfg.delay_budget_steps, -1, -1)
                if self.queues[i, age] > 0
            ]
            ues.append(
                UeState(
                    id=i,
                    home_sbs=int(self.ue_home[i]),
                    position=(float(self.ue_pos[i, 0]), float(self.ue_pos[i, 1])),
                    queue=cohorts,
                    served_by="MBS" if self.attach[i] == self.mbs_cell else "SBS",
                )
            )
        return NetworkState(
            step_index=self.step_index,
            modes=[SleepMode(int(v)) for v in self.modes],
            wake_countdown=list(map(int, self.wake)),
            ues=ues,
            load_history_sbs=self.load_hist_sbs.copy(),
            load_history_mbs=self.load_hist_mbs.copy(),
            last_metrics=self.last_metrics,
        )

    def state_signature(self) -> bytes:
        """Byte-exact digest of the mutable state, for determinism checks."""
        parts = [
            self.modes.tobytes(),
            self.wake.tobytes(),
            self.queues.tobytes(),
            self.load_hist_sbs.tobytes(),
            self.load_hist_mbs.tobytes(),
            self.attach.tobytes(),
            np.asarray(self.step_index).tobytes(),
        ]
        return b"".join(parts)
