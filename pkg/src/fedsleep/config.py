"""Scenario configuration: YAML ingestion, strict validation, overrides.

The schema mirrors the simulator's dataclasses section by section; unknown
keys are rejected and every error names the offending dotted key path.
An empty file yields the full default scenario (8 small cells with 10
users each, 20 W / 40 W consumption, reward coefficients 0.1 / 1 / 0.01).
"""

from __future__ import annotations

import hashlib
import json
import types
import typing
from dataclasses import dataclass, field, fields

import yaml

from .agent import Hyperparams
from .attacks import AttackKind, AttackSpec, BackdoorParams, PoisonParams
from .defense import DefenseConfig
from .federation import FederationConfig
from .radio import ObsScaling, PowerModel, RadioConfig, TrafficProfile


class ConfigError(ValueError):
    """Raised for parse errors, unknown keys and invariant violations."""


DEFAULT_SWEEP_ATTACKS = ["none", "free_rider", "poison", "backdoor"]
DEFAULT_SWEEP_DEFENSES = ["none"]


@dataclass
class SweepConfig:
    """Axes of the scenario matrix explored by the sweep subcommand."""

    attacks: list[str] = field(default_factory=lambda: list(DEFAULT_SWEEP_ATTACKS))
    defenses: list[str] = field(default_factory=lambda: list(DEFAULT_SWEEP_DEFENSES))

    def validate(self, path: str = "sweep") -> None:
        for name in self.attacks:
            if name not in [k.value for k in AttackKind]:
                raise ConfigError(f"{path}.attacks: unknown attack {name!r}")
        for name in self.defenses:
            if name not in ("none", "krum", "refined_krum"):
                raise ConfigError(f"{path}.defenses: unknown defense {name!r}")


@dataclass
class ScenarioConfig:
    """Everything one simulation run needs, with paper-style defaults."""

    radio: RadioConfig = field(default_factory=RadioConfig)
    power: PowerModel = field(default_factory=PowerModel)
    agent: Hyperparams = field(default_factory=Hyperparams)
    reward_coeffs: tuple[float, float, float] = (0.1, 1.0, 0.01)
    scaling: ObsScaling = field(default_factory=ObsScaling)
    federation: FederationConfig = field(default_factory=FederationConfig)
    attack: AttackSpec = field(default_factory=AttackSpec)
    defense: DefenseConfig = field(default_factory=DefenseConfig)
    traffic_mbps: float = 40.0
    traffic_mbps_list: list[float] = field(default_factory=lambda: [30.0, 40.0, 50.0, 60.0, 70.0])
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    episodes: int = 1  # environment episodes per aggregation round
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def validate(self) -> None:
        try:
            self.radio.validate("radio")
            self.power.validate("power")
            self.agent.validate("agent")
            self.attack.validate(self.radio.n_sbs, "attack")
            self.defense.validate("defense")
            self.federation.validate("federation")
            self.sweep.validate("sweep")
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if len(self.reward_coeffs) != 3:
            raise ConfigError("reward_coeffs must have exactly 3 entries")
        if not self.traffic_mbps > 0:
            raise ConfigError("traffic_mbps must be positive")
        if not self.traffic_mbps_list or any(v <= 0 for v in self.traffic_mbps_list):
            raise ConfigError("traffic_mbps_list entries must be positive")
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if self.episodes < 1:
            raise ConfigError("episodes must be >= 1")
        if self.federation.aggregation_weights is not None:
            w = self.federation.aggregation_weights
            if len(w) != self.radio.n_sbs:
                raise ConfigError("federation.aggregation_weights needs one weight per cell")
            if abs(sum(w) - 1.0) > 1e-12:
                raise ConfigError("federation.aggregation_weights must sum to 1")
        if self.defense.kind != "none" and self.federation.mode != "federated":
            raise ConfigError("defense requires federation.mode == 'federated'")
        if self.radio.n_sbs < 2:
            raise ConfigError("radio.n_sbs must be >= 2 for federation")

    def scenario_id(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    def label(self) -> str:
        return (
            f"{self.federation.mode}-{self.attack.kind.value}-{self.defense.kind}"
            f"-{self.traffic_mbps:g}mbps"
        )

    def to_dict(self) -> dict:
        return {
            "radio": {
                **_plain(self.radio, skip=("traffic_profile",)),
                "traffic_profile": _plain(self.radio.traffic_profile),
            },
            "power": _plain(self.power),
            "agent": {
                **_plain(self.agent),
                "reward_coeffs": list(self.reward_coeffs),
                **_plain(self.scaling),
            },
            "federation": _plain(self.federation),
            "attack": {
                "kind": self.attack.kind.value,
                "malicious_indices": (
                    None if self.attack.malicious_indices is None
                    else list(self.attack.malicious_indices)
                ),
                "poison": _plain(self.attack.poison),
                "backdoor": _plain(self.attack.backdoor),
            },
            "defense": _plain(self.defense),
            "traffic_mbps": self.traffic_mbps,
            "traffic_mbps_list": list(self.traffic_mbps_list),
            "seeds": list(self.seeds),
            "episodes": self.episodes,
            "sweep": _plain(self.sweep),
        }


def _plain(obj, skip=()) -> dict:
    out = {}
    for f in fields(obj):
        if f.name in skip:
            continue
        value = getattr(obj, f.name)
        if isinstance(value, tuple):
            value = list(value)
        out[f.name] = value
    return out


def _coerce(value, target, path: str):
    origin = typing.get_origin(target)
    if origin in (typing.Union, types.UnionType):
        args = [a for a in typing.get_args(target) if a is not type(None)]
        if value is None:
            return None
        return _coerce(value, args[0], path)
    if origin in (list, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path} must be a sequence")
        item = typing.get_args(target)[0] if typing.get_args(target) else None
        items = [
            _coerce(v, item, f"{path}[{i}]") if item not in (None, Ellipsis) else v
            for i, v in enumerate(value)
        ]
        return tuple(items) if origin is tuple else list(items)
    if target is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path} must be a boolean")
        return value
    if target is int:
        if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
            raise ConfigError(f"{path} must be an integer")
        try:
            return int(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{path} must be an integer") from None
    if target is float:
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{path} must be a number") from None
    if target is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path} must be a string")
        return value
    return value


def _update_dataclass(obj, data, path: str, nested=None):
    if data is None:
        return obj
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must be a mapping")
    nested = nested or {}
    hints = typing.get_type_hints(type(obj))
    known = {f.name for f in fields(obj)}
    for key, value in data.items():
        sub = f"{path}.{key}"
        if key in nested:
            nested[key](value, sub)
            continue
        if key not in known:
            raise ConfigError(f"unknown key {sub}")
        setattr(obj, key, _coerce(value, hints[key], sub))
    return obj


def from_dict(data: dict | None) -> ScenarioConfig:
    """Build and validate a scenario from parsed YAML/JSON content."""
    cfg = ScenarioConfig()
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")

    def parse_radio(value, path):
        _update_dataclass(
            cfg.radio, value, path,
            nested={"traffic_profile": lambda v, p: _update_dataclass(cfg.radio.traffic_profile, v, p)},
        )

    def parse_agent(value, path):
        if value is None:
            return
        if not isinstance(value, dict):
            raise ConfigError(f"{path} must be a mapping")
        value = dict(value)
        if "reward_coeffs" in value:
            cfg.reward_coeffs = _coerce(
                value.pop("reward_coeffs"), tuple[float, ...], f"{path}.reward_coeffs"
            )
            if len(cfg.reward_coeffs) != 3:
                raise ConfigError(f"{path}.reward_coeffs must have exactly 3 entries")
        scaling_keys = {f.name for f in fields(ObsScaling)}
        for key in list(value):
            if key in scaling_keys:
                setattr(cfg.scaling, key, _coerce(value.pop(key), float, f"{path}.{key}"))
        _update_dataclass(cfg.agent, value, path)

    def parse_attack(value, path):
        if value is None:
            return
        if not isinstance(value, dict):
            raise ConfigError(f"{path} must be a mapping")
        value = dict(value)
        if "kind" in value:
            raw = value.pop("kind")
            try:
                cfg.attack.kind = AttackKind(str(raw))
            except ValueError:
                raise ConfigError(f"{path}.kind: unknown attack {raw!r}") from None
        if "malicious_indices" in value:
            raw = value.pop("malicious_indices")
            cfg.attack.malicious_indices = (
                None if raw is None
                else _coerce(raw, tuple[int, ...], f"{path}.malicious_indices")
            )
        _update_dataclass(
            cfg.attack, value, path,
            nested={
                "poison": lambda v, p: _update_dataclass(cfg.attack.poison, v, p),
                "backdoor": lambda v, p: _update_dataclass(cfg.attack.backdoor, v, p),
            },
        )

    _update_dataclass(
        cfg, data, "config",
        nested={
            "radio": parse_radio,
            "power": lambda v, p: _update_dataclass(cfg.power, v, p),
            "agent": parse_agent,
            "federation": lambda v, p: _update_dataclass(cfg.federation, v, p),
            "attack": parse_attack,
            "defense": lambda v, p: _update_dataclass(cfg.defense, v, p),
            "sweep": lambda v, p: _update_dataclass(cfg.sweep, v, p),
        },
    )
    cfg.validate()
    return cfg


def load_config(path, overrides=()) -> ScenarioConfig:
    """Read a YAML scenario file, apply dotted-path overrides, validate."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config parse error in {path}: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    for item in overrides:
        data = apply_override(data, item)
    return from_dict(data)


def apply_override(data: dict, item: str) -> dict:
    """Apply one 'dotted.path=value' override to raw config data."""
    if "=" not in item:
        raise ConfigError(f"override must look like key.path=value, got {item!r}")
    key_path, raw_value = item.split("=", 1)
    keys = [k for k in key_path.strip().split(".") if k]
    if not keys:
        raise ConfigError(f"override has an empty key path: {item!r}")
    try:
        value = yaml.safe_load(raw_value)
    except yaml.YAMLError:
        raise ConfigError(f"override value is not valid YAML: {item!r}") from None
    node = data
    for key in keys[:-1]:
        nxt = node.get(key)
        if nxt is None:
            nxt = {}
            node[key] = nxt
        if not isinstance(nxt, dict):
            raise ConfigError(f"override path {key_path!r} crosses a non-mapping key")
        node = nxt
    node[keys[-1]] = value
    return data


def dump_config(cfg: ScenarioConfig) -> str:
    """Serialize a scenario back to YAML (round-trips through load)."""
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True)
