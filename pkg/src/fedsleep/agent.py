"""Per-cell deep Q-learning agent.

Observation encoding, reward computation, epsilon-greedy action selection,
FIFO replay buffer, and the temporal-difference SGD update, with flat
parameter import/export so models can be exchanged and averaged. The
numeric core lives in ``fedsleep._kernels``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import _kernels

OBS_DIM = 13
N_ACTIONS = 3
HIDDEN = 64

# Flat layout: W1 (64x13 row-major), b1, W2 (64x64), b2, W3 (3x64), b3.
LAYER_SHAPES = (
    (HIDDEN, OBS_DIM),
    (HIDDEN,),
    (HIDDEN, HIDDEN),
    (HIDDEN,),
    (N_ACTIONS, HIDDEN),
    (N_ACTIONS,),
)
PARAM_COUNT = sum(int(np.prod(s)) for s in LAYER_SHAPES)  # 5251

SNAPSHOT_MAGIC = b"FRLS"
SNAPSHOT_VERSION = 1
_SNAPSHOT_HEADER = struct.Struct("<4sHI")


@dataclass
class Hyperparams:
    """Learning knobs for the per-cell DQN."""

    learning_rate: float = 0.01
    discount: float = 0.9
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_rounds: int | None = None  # default: half the FL rounds
    batch_size: int = 32
    buffer_capacity: int = 2000
    target_sync_period: int = 50

    def validate(self, path: str = "agent") -> None:
        if not self.learning_rate > 0:
            raise ValueError(f"{path}.learning_rate must be > 0")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError(f"{path}.discount must be in [0, 1)")
        if not 0.0 <= self.epsilon_end <= self.epsilon_start <= 1.0:
            raise ValueError(
                f"{path}: need 0 <= epsilon_end <= epsilon_start <= 1"
            )
        for name in ("batch_size", "buffer_capacity", "target_sync_period"):
            if getattr(self, name) < 1:
                raise ValueError(f"{path}.{name} must be >= 1")


@dataclass
class Observation:
    """The 13-feature state seen by one cell's agent.

    Encoding order is frozen: serving indicator, the cell's offered-load
    history (oldest first), the macro cell's carried-load history, queueing
    delay, delivered throughput. All features are pre-scaled to [0, 1].
    """

    mode_indicator: float
    sbs_load_history: np.ndarray  # 5 entries, oldest first
    mbs_load_history: np.ndarray  # 5 entries, oldest first
    delay: float
    throughput: float

    def to_vector(self) -> np.ndarray:
        vec = np.empty(OBS_DIM)
        vec[0] = self.mode_indicator
        vec[1:6] = self.sbs_load_history
        vec[6:11] = self.mbs_load_history
        vec[11] = self.delay
        vec[12] = self.throughput
        return vec

    @classmethod
    def from_vector(cls, vec: np.ndarray) -> "Observation":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (OBS_DIM,):
            raise ValueError(f"observation vector must have shape ({OBS_DIM},)")
        return cls(
            mode_indicator=float(vec[0]),
            sbs_load_history=vec[1:6].copy(),
            mbs_load_history=vec[6:11].copy(),
            delay=float(vec[11]),
            throughput=float(vec[12]),
        )


@dataclass
class Experience:
    """One (s, a, r, s') transition. ``synthetic`` marks attack-made samples."""

    obs: np.ndarray
    action: int
    reward: float
    next_obs: np.ndarray
    synthetic: bool = False


class ReplayBuffer:
    """Fixed-capacity FIFO ring of transitions stored as flat arrays."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.obs = np.zeros((capacity, OBS_DIM))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, OBS_DIM))
        self.insertions = 0

    def __len__(self) -> int:
        return min(self.insertions, self.capacity)

    def push(self, exp: Experience) -> None:
        if not np.isfinite(exp.reward):
            raise ValueError("experience reward must be finite")
        i = self.insertions % self.capacity
        self.obs[i] = exp.obs
        self.actions[i] = exp.action
        self.rewards[i] = exp.reward
        self.next_obs[i] = exp.next_obs
        self.insertions += 1

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        return rng.integers(0, len(self), size=batch_size)


def compute_reward(throughput_mbps: float, drop_rate: float, power_w: float,
                   coeffs: tuple[float, float, float]) -> float:
    """Linear quality-vs-energy reward: c0 * b - c1 * drops - c2 * power."""
    c0, c1, c2 = coeffs
    return c0 * throughput_mbps - c1 * drop_rate - c2 * power_w


def init_params(rng: np.random.Generator) -> np.ndarray:
    """Glorot-uniform weights, zero biases, returned in the flat layout."""
    params = np.zeros(PARAM_COUNT)
    offset = 0
    for shape in LAYER_SHAPES:
        size = int(np.prod(shape))
        if len(shape) == 2:
            fan_out, fan_in = shape
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            params[offset:offset + size] = rng.uniform(-bound, bound, size=size)
        offset += size
    return params


def unflatten(params: np.ndarray) -> list[np.ndarray]:
    """Split a flat parameter vector into per-layer array copies."""
    params = np.asarray(params, dtype=float)
    if params.shape != (PARAM_COUNT,):
        raise ValueError(f"parameter vector must have length {PARAM_COUNT}")
    out = []
    offset = 0
    for shape in LAYER_SHAPES:
        size = int(np.prod(shape))
        out.append(params[offset:offset + size].reshape(shape).copy())
        offset += size
    return out


def flatten(layers: list[np.ndarray]) -> np.ndarray:
    """Inverse of :func:`unflatten`."""
    if len(layers) != len(LAYER_SHAPES):
        raise ValueError(f"expected {len(LAYER_SHAPES)} layer arrays")
    parts = []
    for arr, shape in zip(layers, LAYER_SHAPES):
        if arr.shape != shape:
            raise ValueError(f"layer shape mismatch: {arr.shape} != {shape}")
        parts.append(np.asarray(arr, dtype=float).reshape(-1))
    return np.concatenate(parts)


class QNetwork:
    """Flat-parameter ReLU MLP (13 -> 64 -> 64 -> 3) with a frozen target copy."""

    def __init__(self, params: np.ndarray | None = None,
                 rng: np.random.Generator | None = None):
        if params is None:
            if rng is None:
                raise ValueError("need initial params or an rng")
            params = init_params(rng)
        self.params = np.ascontiguousarray(params, dtype=float).copy()
        if self.params.shape != (PARAM_COUNT,):
            raise ValueError(f"parameter vector must have length {PARAM_COUNT}")
        self.target = self.params.copy()
        self._views = self._make_views(self.params)
        self._target_views = self._make_views(self.target)

    @staticmethod
    def _make_views(flat: np.ndarray) -> list[np.ndarray]:
        views = []
        offset = 0
        for shape in LAYER_SHAPES:
            size = int(np.prod(shape))
            views.append(flat[offset:offset + size].reshape(shape))
            offset += size
        return views

    def forward(self, obs: np.ndarray) -> np.ndarray:
        """Q-values for one observation (13,) or a batch (n, 13)."""
        obs = np.ascontiguousarray(obs, dtype=float)
        single = obs.ndim == 1
        if single:
            obs = obs.reshape(1, -1)
        if obs.shape[1] != OBS_DIM:
            raise ValueError(f"observation dimension must be {OBS_DIM}")
        q = _kernels.mlp_forward(*self._views, obs)
        return q[0] if single else q

    def sync_target(self) -> None:
        self.target[:] = self.params

    def train_step(self, obs: np.ndarray, actions: np.ndarray, rewards: np.ndarray,
                   next_obs: np.ndarray, gamma: float, lr: float) -> float:
        if obs.shape[0] == 0:
            raise ValueError("training batch must be non-empty")
        return _kernels.td_sgd_step(
            *self._views, *self._target_views,
            np.ascontiguousarray(obs, dtype=float),
            np.ascontiguousarray(actions, dtype=np.int64),
            np.ascontiguousarray(rewards, dtype=float),
            np.ascontiguousarray(next_obs, dtype=float),
            float(gamma), float(lr),
        )


class DqnAgent:
    """One cell's learner: Q-network, target copy, replay buffer, SGD schedule."""

    def __init__(self, hyper: Hyperparams, rng: np.random.Generator,
                 params: np.ndarray | None = None):
        self.hyper = hyper
        self.rng = rng
        self.net = QNetwork(params=params, rng=rng)
        self.buffer = ReplayBuffer(hyper.buffer_capacity)
        self.train_steps = 0

    def select_action(self, obs: np.ndarray, epsilon: float) -> int:
        return select_action(self.net, obs, epsilon, self.rng)

    def observe(self, exp: Experience) -> None:
        self.buffer.push(exp)

    def can_train(self) -> bool:
        return len(self.buffer) >= self.hyper.batch_size

    def train_on(self, obs: np.ndarray, actions: np.ndarray, rewards: np.ndarray,
                 next_obs: np.ndarray) -> float:
        loss = self.net.train_step(obs, actions, rewards, next_obs,
                                   self.hyper.discount, self.hyper.learning_rate)
        self.train_steps += 1
        if self.train_steps % self.hyper.target_sync_period == 0:
            self.net.sync_target()
        return loss

    def train_from_buffer(self) -> float:
        idx = self.buffer.sample_indices(self.hyper.batch_size, self.rng)
        return self.train_on(self.buffer.obs[idx], self.buffer.actions[idx],
                             self.buffer.rewards[idx], self.buffer.next_obs[idx])

    def export_params(self) -> np.ndarray:
        return self.net.params.copy()

    def import_params(self, params: np.ndarray) -> None:
        params = np.asarray(params, dtype=float)
        if params.shape != (PARAM_COUNT,):
            raise ValueError(f"parameter vector must have length {PARAM_COUNT}")
        self.net.params[:] = params
        self.net.target[:] = params


def select_action(net: QNetwork, obs: np.ndarray, epsilon: float,
                  rng: np.random.Generator) -> int:
    """Epsilon-greedy over the network's Q-values; ties go to the lowest code."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must be in [0, 1]")
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(0, N_ACTIONS))
    q = net.forward(obs)
    return int(np.argmax(q))


def save_params(path, params: np.ndarray) -> None:
    """Write a model snapshot: 'FRLS' magic, u16 version, u32 count, f32 params (LE)."""
    params = np.asarray(params, dtype=float)
    header = _SNAPSHOT_HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, params.size)
    payload = params.astype("<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def load_params(path) -> np.ndarray:
    """Read a model snapshot written by :func:`save_params`."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _SNAPSHOT_HEADER.size:
        raise ValueError("snapshot file truncated")
    magic, version, count = _SNAPSHOT_HEADER.unpack_from(raw)
    if magic != SNAPSHOT_MAGIC:
        raise ValueError("not a model snapshot (bad magic)")
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    payload = raw[_SNAPSHOT_HEADER.size:]
    if len(payload) != 4 * count:
        raise ValueError("snapshot payload length does not match header count")
    return np.frombuffer(payload, dtype="<f4").astype(float)
