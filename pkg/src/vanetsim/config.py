"""Scenario configuration: defaults, YAML loading, validation and echo."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .mobility import KMH, GridMap, MobilityConfig
from .radio import RadioConfig
from .routing import POLICIES, RoutingConfig

PROTOCOLS = ("aomdv", "sd-aomdv", "ssd-aomdv")


class ConfigError(ValueError):
    """Invalid scenario configuration; the message names the offending field."""


@dataclass
class ScenarioConfig:
    # sweep axes
    node_counts: list = field(default_factory=lambda: [60, 70, 90])
    stopped_fractions: list = field(default_factory=lambda: [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7])
    seeds: list = field(default_factory=lambda: [1, 2, 3, 4, 5])
    protocols: list = field(default_factory=lambda: list(PROTOCOLS))
    # area and time
    area_width_m: float = 2000.0
    area_height_m: float = 2000.0
    block_size_m: float = 250.0
    sim_duration_s: float = 400.0
    # mobility
    speed_min_kmh: float = 10.0
    speed_max_kmh: float = 90.0
    speed_change_kmh: float = 10.0
    turn_straight: float = 0.5
    turn_left: float = 0.25
    turn_right: float = 0.25
    mobility_step_s: float = 0.5
    stop_interval_s: float = 60.0
    stop_duration_s: float = 20.0
    min_stop_duration_s: float = 5.0
    stop_window_s: float | None = None
    # radio
    range_m: float = 250.0
    bitrate_bps: float = 2e6
    broadcast_jitter_max_ms: float = 10.0
    loss_probability: float = 0.0
    link_failure_delay_ms: float = 50.0
    # traffic
    flows: int = 20
    packet_rate_pps: float = 4.0
    payload_bytes: int = 512
    flow_start_window_s: float = 10.0
    # routing
    active_route_timeout_s: float = 3.0
    reverse_route_timeout_s: float = 6.0
    rreq_retries: int = 2
    rreq_timeout_s: float = 1.0
    max_paths: int = 3
    send_buffer_packets: int = 64
    net_diameter_hops: int = 35
    rreq_direction_filter: bool = False
    zero_metric_fields: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool) or v is None:
                continue
            if isinstance(v, (int, float)):
                if math.isnan(v) or v < 0:
                    raise ConfigError(f"{f.name}: must be non-negative, got {v}")
                if v == 0 and f.name not in _ZERO_OK:
                    raise ConfigError(f"{f.name}: must be positive, got {v}")
        if self.stop_window_s is not None and self.stop_window_s <= 0:
            raise ConfigError("stop_window_s: must be positive or null")
        for name in ("node_counts", "seeds", "stopped_fractions", "protocols"):
            if not isinstance(getattr(self, name), list) or not getattr(self, name):
                raise ConfigError(f"{name}: must be a non-empty list")
        for n in self.node_counts:
            if not isinstance(n, int) or isinstance(n, bool) or n < 2:
                raise ConfigError(f"node_counts: {n!r} is not an integer >= 2")
        for s in self.seeds:
            if not isinstance(s, int) or isinstance(s, bool) or s < 0:
                raise ConfigError(f"seeds: {s!r} is not a non-negative integer")
        for fr in self.stopped_fractions:
            if not isinstance(fr, (int, float)) or not 0 <= fr <= 1:
                raise ConfigError(f"stopped_fractions: {fr!r} is not in [0, 1]")
        for p in self.protocols:
            if p not in POLICIES:
                raise ConfigError(f"protocols: unknown protocol {p!r}; expected one of {list(PROTOCOLS)}")
        if not self.loss_probability < 1:
            raise ConfigError("loss_probability: must be < 1")
        if self.speed_min_kmh > self.speed_max_kmh:
            raise ConfigError("speed_min_kmh: exceeds speed_max_kmh")
        if self.stop_duration_s >= self.stop_interval_s:
            raise ConfigError("stop_duration_s: must be shorter than stop_interval_s")
        if not math.isclose(self.turn_straight + self.turn_left + self.turn_right, 1.0):
            raise ConfigError("turn_straight: turn probabilities must sum to 1")
        for name in ("area_width_m", "area_height_m"):
            ratio = getattr(self, name) / self.block_size_m
            if not math.isclose(ratio, round(ratio)):
                raise ConfigError(f"{name}: must be a multiple of block_size_m")
        for n in self.node_counts:
            if self.flows > n * (n - 1):
                raise ConfigError(f"flows: {self.flows} exceeds the {n * (n - 1)} pairs of {n} nodes")

    # -- module views -----------------------------------------------------

    def grid(self) -> GridMap:
        return GridMap(self.area_width_m, self.area_height_m, self.block_size_m)

    def mobility(self) -> MobilityConfig:
        return MobilityConfig(
            speed_min=self.speed_min_kmh * KMH,
            speed_max=self.speed_max_kmh * KMH,
            speed_change=self.speed_change_kmh * KMH,
            p_straight=self.turn_straight,
            p_left=self.turn_left,
            p_right=self.turn_right,
            step=self.mobility_step_s,
            stop_interval=self.stop_interval_s,
            stop_duration=self.stop_duration_s,
            min_stop_duration=self.min_stop_duration_s,
            stop_window=self.stop_window_s,
        )

    def radio(self) -> RadioConfig:
        return RadioConfig(
            range=self.range_m,
            bitrate=self.bitrate_bps,
            broadcast_jitter_max=self.broadcast_jitter_max_ms / 1000,
            loss_probability=self.loss_probability,
            failure_detection_delay=self.link_failure_delay_ms / 1000,
        )

    def routing(self) -> RoutingConfig:
        return RoutingConfig(
            active_route_timeout=self.active_route_timeout_s,
            reverse_route_timeout=self.reverse_route_timeout_s,
            rreq_retries=self.rreq_retries,
            rreq_timeout=self.rreq_timeout_s,
            max_paths=self.max_paths,
            send_buffer_size=self.send_buffer_packets,
            net_diameter=self.net_diameter_hops,
            rreq_direction_filter=self.rreq_direction_filter,
            zero_metric_fields=self.zero_metric_fields,
        )

    def replace(self, **changes) -> "ScenarioConfig":
        return from_mapping({**self.to_dict(), **changes})

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def n_runs(self) -> int:
        return len(self.protocols) * len(self.stopped_fractions) * len(self.seeds) * len(self.node_counts)


_ZERO_OK = {"loss_probability", "broadcast_jitter_max_ms", "link_failure_delay_ms", "rreq_retries", "flows",
            "flow_start_window_s", "speed_change_kmh", "turn_straight", "turn_left", "turn_right",
            "min_stop_duration_s", "speed_min_kmh"}

_FIELD_TYPES = {f.name: f for f in fields(ScenarioConfig)}


def from_mapping(data: dict | None) -> ScenarioConfig:
    data = dict(data or {})
    unknown = sorted(set(data) - set(_FIELD_TYPES))
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown configuration key")
    defaults = ScenarioConfig()
    for key, value in data.items():
        default = getattr(defaults, key)
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise ConfigError(f"{key}: expected true/false, got {value!r}")
        elif isinstance(default, list):
            if not isinstance(value, list):
                raise ConfigError(f"{key}: expected a list, got {value!r}")
        elif isinstance(default, int) and key != "stop_window_s":
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"{key}: expected an integer, got {value!r}")
        elif isinstance(default, float) or key == "stop_window_s":
            if value is None and key == "stop_window_s":
                continue
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ConfigError(f"{key}: expected a number, got {value!r}")
            data[key] = float(value)
    try:
        return ScenarioConfig(**data)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load(path: str | Path | None) -> ScenarioConfig:
    """Parse a YAML config file; ``None`` gives the defaults."""
    if path is None:
        return ScenarioConfig()
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}" if mark is not None else "unknown line"
        raise ConfigError(f"{path}: {where}: {exc}") from exc
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    try:
        return from_mapping(data)
    except ConfigError as exc:
        key = str(exc).split(":", 1)[0]
        line = _line_of(text, key)
        prefix = f"{path}: line {line}: " if line else f"{path}: "
        raise ConfigError(prefix + str(exc)) from exc


def _line_of(text: str, key: str) -> int | None:
    for i, line in enumerate(text.splitlines(), 1):
        if line.split(":", 1)[0].strip() == key:
            return i
    return None


def dump(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
