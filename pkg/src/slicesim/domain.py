"""Domain model for a sliced multi-cell downlink.

Three slice archetypes (enhanced broadband "E", low-latency "U", massive
machine-type "M") share one pool of radio resources.  The pool is counted in
resource-block groups (RBGs); every radio unit applies the same slice
partition.  Everything configurable about a run lives in ScenarioConfig,
which round-trips through a plain YAML file.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import yaml

# Slice identifiers, always iterated in this order.
SLICES = ("E", "U", "M")

SPEED_OF_LIGHT = 299792458.0  # m/s


@dataclass
class QosProfile:
    """Per-slice QoS targets: a rate floor and a delay ceiling."""

    min_rate_bps: float
    max_delay_s: float


@dataclass
class TrafficProfile:
    """Deterministic periodic arrivals: one packet every interval."""

    arrival_interval_s: float
    packet_bytes: int

    @property
    def packet_bits(self) -> int:
        return self.packet_bytes * 8

    @property
    def offered_load_bps(self) -> float:
        return self.packet_bits / self.arrival_interval_s


@dataclass
class RewardWeights:
    """Weights of the per-slice reward terms (utilization, rate, expiry)."""

    alpha: float
    beta: float
    gamma: float


@dataclass
class ThresholdRange:
    """Scheduling-timeout action grid: `levels` equally spaced values."""

    tau_min_s: float
    tau_max_s: float
    levels: int = 20


@dataclass
class ResourceGrid:
    """OFDM resource accounting for one TTI."""

    total_rbgs: int = 14
    rbs_per_rbg: int = 6
    rb_bandwidth_hz: float = 180e3   # 12 subcarriers x 15 kHz
    symbols_per_tti: int = 14        # one slot at numerology 0
    subcarriers_per_rb: int = 12
    numerology: int = 0
    tti_s: float = 1e-3

    @property
    def total_rbs(self) -> int:
        return self.total_rbgs * self.rbs_per_rbg

    @property
    def rbg_bandwidth_hz(self) -> float:
        return self.rb_bandwidth_hz * self.rbs_per_rbg


@dataclass
class RadioUnit:
    id: int
    x: float
    y: float
    tx_power_dbm: float = 38.0

    @property
    def tx_power_w(self) -> float:
        return 10.0 ** (self.tx_power_dbm / 10.0) / 1000.0


@dataclass
class UserEquipment:
    """Mutable runtime state of one user terminal."""

    id: int
    slice: str
    x: float = 0.0
    y: float = 0.0
    heading_rad: float = 0.0
    speed_mps: float = 0.0
    serving_oru: int = 0


@dataclass
class ChannelParams:
    carrier_hz: float = 2e9
    pathloss_exponent: float = 3.5
    ref_distance_m: float = 1.0
    noise_density_dbm_hz: float = -174.0
    noise_figure_db: float = 9.0
    user_speed_mps: float = 1.0
    heading_hold_s: float = 1.0
    # log10(|h|^2) bounds used when normalizing channel gains for agent state
    gain_log_bounds: tuple[float, float] = (-12.0, 0.0)
    # SINR (linear) breakpoints of the modulation-order map, lower-inclusive
    mcs_sinr_thresholds: tuple[float, ...] = (2.0, 15.0, 80.0)
    mcs_orders: tuple[int, ...] = (2, 4, 6, 8)


@dataclass
class AgentParams:
    """Hyper-parameters of one value-learning agent."""

    hidden: tuple[int, ...]
    learning_rate: float
    batch_size: int
    discount: float = 0.9
    target_sync_steps: int = 100
    replay_capacity: int = 10000
    eps_start: float = 1.0
    eps_end: float = 0.0
    eps_decay_frac: float = 0.6
    # global gradient-norm cap; keeps parameters finite when a slice's
    # normalized delay grows without bound under overload. 0 disables.
    grad_clip_norm: float = 10.0


@dataclass
class ScenarioConfig:
    grid: ResourceGrid = field(default_factory=ResourceGrid)
    orus: list[RadioUnit] = field(default_factory=list)
    users_per_slice: dict[str, int] = field(default_factory=dict)
    # movement region (xmin, ymin, xmax, ymax); users bounce off its edges
    region: tuple[float, float, float, float] = (0.0, 0.0, 500.0, 433.0127018922193)
    qos: dict[str, QosProfile] = field(default_factory=dict)
    traffic: dict[str, TrafficProfile] = field(default_factory=dict)
    weights: dict[str, RewardWeights] = field(default_factory=dict)
    thresholds: dict[str, ThresholdRange] = field(default_factory=dict)
    processing_delay_s: dict[str, float] = field(default_factory=dict)
    channel: ChannelParams = field(default_factory=ChannelParams)
    # intra exploration decays within the first few hundred windows so the
    # timeout policy settles early in a 50 s run
    intra_agent: AgentParams = field(
        default_factory=lambda: AgentParams(hidden=(64, 64, 256),
                                            learning_rate=1e-3, batch_size=256,
                                            eps_decay_frac=0.05))
    inter_agent: AgentParams = field(
        default_factory=lambda: AgentParams(hidden=(256, 256),
                                            learning_rate=1e-4, batch_size=64))
    intra_period_ttis: int = 10
    inter_period_ttis: int = 200
    duration_s: float = 50.0
    seed: int = 1
    initial_allocation: tuple[int, int, int] = (5, 5, 4)
    # serve a user only once its head-of-line delay reaches the slice timeout
    defer_under_threshold: bool = True
    # literal QoS reading: delay counted satisfied when normalized delay >= 1
    qos_literal: bool = False
    # literal reward reading: utilization term enters with a positive sign
    reward_literal_sign: bool = False

    @property
    def n_ttis(self) -> int:
        return int(round(self.duration_s / self.grid.tti_s))

    @property
    def users(self) -> list[UserEquipment]:
        """Fresh UE objects in id order, slices grouped E then U then M."""
        out = []
        uid = 0
        for s in SLICES:
            for _ in range(self.users_per_slice.get(s, 0)):
                out.append(UserEquipment(id=uid, slice=s,
                                         speed_mps=self.channel.user_speed_mps))
                uid += 1
        return out

    def slice_users(self, s: str) -> list[int]:
        ids, uid = [], 0
        for t in SLICES:
            n = self.users_per_slice.get(t, 0)
            if t == s:
                ids = list(range(uid, uid + n))
            uid += n
        return ids


class InvalidScenario(ValueError):
    """Raised by validate_scenario with the full list of violations."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("; ".join(problems))


def slice_rb_budget(s: str, allocation: dict[str, int], grid: ResourceGrid) -> int:
    """RBs available to slice s at each radio unit under the allocation."""
    return allocation[s] * grid.rbs_per_rbg


def allocation_offsets(allocation: dict[str, int]) -> dict[str, int]:
    """Start index of each slice's contiguous RBG range (same at every ORU)."""
    offs, start = {}, 0
    for s in SLICES:
        offs[s] = start
        start += allocation[s]
    return offs


def default_config() -> ScenarioConfig:
    """Default scenario: 3 radio units on an equilateral triangle, 9 users."""
    side = 500.0
    h = side * math.sqrt(3.0) / 2.0
    cfg = ScenarioConfig(
        orus=[RadioUnit(0, 0.0, 0.0), RadioUnit(1, side, 0.0),
              RadioUnit(2, side / 2.0, h)],
        users_per_slice={"E": 3, "U": 3, "M": 3},
        region=(0.0, 0.0, side, h),
        qos={"E": QosProfile(16e6, 10e-3),
             "U": QosProfile(3.8e6, 2e-3),
             "M": QosProfile(0.5e6, 20e-3)},
        traffic={"E": TrafficProfile(0.5e-3, 1024),
                 "U": TrafficProfile(1.0e-3, 480),
                 "M": TrafficProfile(0.5e-3, 32)},
        weights={"E": RewardWeights(0.3, 0.4, 0.3),
                 "U": RewardWeights(0.3, 0.3, 0.4),
                 "M": RewardWeights(0.3, 0.35, 0.35)},
        thresholds={"E": ThresholdRange(2e-3, 10e-3),
                    "U": ThresholdRange(0.5e-3, 2e-3),
                    "M": ThresholdRange(5e-3, 15e-3)},
        processing_delay_s={s: 0.0 for s in SLICES},
    )
    return cfg


def scenario_problems(cfg: ScenarioConfig) -> list[str]:
    """All invariant violations, each prefixed with an error identifier."""
    problems = []
    n_users = sum(cfg.users_per_slice.get(s, 0) for s in SLICES)
    if n_users <= 0:
        problems.append("EmptyUsers: users_per_slice sums to 0")
    if sum(cfg.initial_allocation) != cfg.grid.total_rbgs:
        problems.append(
            "RbgSumMismatch: initial_allocation %s sums to %d, grid has %d RBGs"
            % (list(cfg.initial_allocation), sum(cfg.initial_allocation),
               cfg.grid.total_rbgs))
    for s in SLICES:
        q = cfg.qos.get(s)
        if q is None or q.min_rate_bps <= 0 or q.max_delay_s <= 0:
            problems.append("NonPositiveQos: qos[%s]=%s" % (s, q))
        th = cfg.thresholds.get(s)
        if th is None or th.levels < 2 or not th.tau_min_s < th.tau_max_s:
            problems.append("BadThresholdGrid: thresholds[%s]=%s" % (s, th))
    n = cfg.n_ttis
    for name, period in (("intra", cfg.intra_period_ttis),
                         ("inter", cfg.inter_period_ttis)):
        if period <= 0 or n % period != 0:
            problems.append("CadenceMismatch: %s period %s does not divide %d TTIs"
                            % (name, period, n))
    if cfg.inter_period_ttis % cfg.intra_period_ttis != 0:
        problems.append("CadenceMismatch: inter period %d not a multiple of intra %d"
                        % (cfg.inter_period_ttis, cfg.intra_period_ttis))
    return problems


def validate_scenario(cfg: ScenarioConfig) -> ScenarioConfig:
    """Return cfg unchanged if every invariant holds, else raise with all
    violations at once."""
    problems = scenario_problems(cfg)
    if problems:
        raise InvalidScenario(problems)
    return cfg


# ---------------------------------------------------------------------------
# YAML config file I/O


def _as_dict(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _as_dict(getattr(obj, f.name))
                for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {k: _as_dict(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_as_dict(v) for v in obj]
    return obj


def config_to_dict(cfg: ScenarioConfig) -> dict:
    return _as_dict(cfg)


def config_to_yaml(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)


def _build(cls, data):
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name not in data:
            continue
        v = data[f.name]
        kwargs[f.name] = _convert_field(f.name, v)
    return cls(**kwargs)


_NESTED = {
    "grid": ResourceGrid,
    "channel": ChannelParams,
    "intra_agent": AgentParams,
    "inter_agent": AgentParams,
}
_PER_SLICE = {
    "qos": QosProfile,
    "traffic": TrafficProfile,
    "weights": RewardWeights,
    "thresholds": ThresholdRange,
}


def _convert_field(name, v):
    if name in _NESTED and isinstance(v, dict):
        return _build(_NESTED[name], v)
    if name in _PER_SLICE and isinstance(v, dict):
        return {s: _build(_PER_SLICE[name], d) if isinstance(d, dict) else d
                for s, d in v.items()}
    if name == "orus":
        return [_build(RadioUnit, d) if isinstance(d, dict) else d for d in v]
    if name in ("region", "initial_allocation"):
        return tuple(v)
    if name in ("hidden", "mcs_sinr_thresholds", "mcs_orders",
                "gain_log_bounds"):
        return tuple(v)
    return v


def config_from_dict(data: dict) -> ScenarioConfig:
    base = config_to_dict(default_config())
    merged = _deep_merge(base, data or {})
    cfg = _build(ScenarioConfig, merged)
    # tuple-ify nested fields that came through as lists
    cfg.channel.gain_log_bounds = tuple(cfg.channel.gain_log_bounds)
    cfg.channel.mcs_sinr_thresholds = tuple(cfg.channel.mcs_sinr_thresholds)
    cfg.channel.mcs_orders = tuple(cfg.channel.mcs_orders)
    cfg.intra_agent.hidden = tuple(cfg.intra_agent.hidden)
    cfg.inter_agent.hidden = tuple(cfg.inter_agent.hidden)
    return cfg


def _deep_merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        if k in out and isinstance(out[k], dict) and isinstance(v, dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path: str) -> ScenarioConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    return config_from_dict(data or {})


def save_config(cfg: ScenarioConfig, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(config_to_yaml(cfg))
