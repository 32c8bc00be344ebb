"""
Configuration Management for dsedge
===================================

Scenario configuration: one dataclass per section, composed in
ScenarioConfig. Files may nest sections or use flat dotted keys.
"""

import copy
import logging
import math
from dataclasses import asdict, dataclass, field, fields, is_dataclass, MISSING, replace
from typing import Any, Dict, List, Mapping, Optional, Tuple

import yaml

from ..core.diffserv import TrafficClass
from ..core.scheduler import SchedulerConfig
from ..core.traffic import ClassTrafficSpec, profile
from ..engine.random_streams import Distribution, parse_distribution
from ..utils.file_utils import read_scenario_file, write_text
from .errors import ConfigError

logger = logging.getLogger(__name__)

TOPOLOGY_KINDS = ("single", "multi")
CLASS_KEYS = {"af": TrafficClass.AF, "ef": TrafficClass.EF, "be": TrafficClass.BE, "nc": TrafficClass.NC}

# Alternative spellings accepted for a few leaf keys.
KEY_ALIASES = {"scheduler.eq46_literal": "scheduler.allocated_lengths"}

MIN_BOTTLENECK_BPS = 358_000
MAX_BOTTLENECK_BPS = 34_000_000


@dataclass
class TopologyConfig:
    """Single domain, or several domains sharing one FIFO link."""

    kind: str = "single"
    domains: int = 1
    shaped: bool = True
    shared_slots: Optional[int] = None


@dataclass
class LinkSettings:
    bottleneck_bps: float = 2_100_000.0
    prop_delay_us: int = 0
    access_bps: float = 100_000_000.0
    core_bps: float = 1_000_000_000.0


@dataclass
class VideoTrafficConfig:
    """AF video sessions. Packet size and peak rate default to the profile's."""

    profile: str = "H263"
    rate_bps: float = 384_000.0
    peak_bps: Optional[float] = None
    packet_bytes: Optional[int] = None
    sessions: int = 3
    delay_s: float = 0.1
    priority: int = 2
    frame_interval_ms: float = 40.0
    gop: str = "IBBBPBBB"
    size_ratio: List[float] = field(default_factory=lambda: [5.0, 3.0, 1.0])
    pace: bool = True

    def codec(self):
        return profile(self.profile, "traffic.af.profile")

    def peak_rate(self) -> float:
        return self.peak_bps if self.peak_bps is not None else self.codec().peak_rate

    def packet_size(self) -> int:
        return self.packet_bytes if self.packet_bytes is not None else self.codec().pkt_size


@dataclass
class VoiceTrafficConfig:
    """EF voice sessions. Rate and packet size default to the profile's."""

    profile: str = "MPEG-audio"
    rate_bps: Optional[float] = None
    packet_bytes: Optional[int] = None
    sessions: int = 3
    delay_s: float = 0.15
    priority: int = 3

    def codec(self):
        return profile(self.profile, "traffic.ef.profile")

    def rate(self) -> float:
        return self.rate_bps if self.rate_bps is not None else self.codec().avg_rate

    def packet_size(self) -> int:
        return self.packet_bytes if self.packet_bytes is not None else self.codec().pkt_size


@dataclass
class BestEffortConfig:
    rate_bps: float = 756_000.0
    packet_bytes: int = 1000
    size_dist: str = "constant"
    priority: int = 1

    def size_distribution(self) -> Distribution:
        """
        Packet size law. ``constant`` and ``exponential`` take their mean
        from ``packet_bytes``; anything else is a full spec such as
        ``uniform(500,1500)``.
        """
        if self.size_dist == "exponential":
            return Distribution.exponential(self.packet_bytes)
        if self.size_dist == "constant":
            return Distribution.constant(self.packet_bytes)
        try:
            return Distribution.constant(float(self.size_dist))
        except ValueError:
            return parse_distribution(self.size_dist, "traffic.be.size_dist")


@dataclass
class TrafficConfig:
    af: VideoTrafficConfig = field(default_factory=VideoTrafficConfig)
    ef: VoiceTrafficConfig = field(default_factory=VoiceTrafficConfig)
    be: BestEffortConfig = field(default_factory=BestEffortConfig)


@dataclass
class MarkingConfig:
    """Code point stamped on each source kind at the edge switch."""

    video: int = 12
    voice: int = 46
    data: int = 0

    def policy(self) -> Dict[str, int]:
        return {"video": self.video, "voice": self.voice, "data": self.data}


@dataclass
class SchedulerSettings:
    mode: str = "adaptive"
    k_factor: float = 1.0
    recompute_epoch_ms: float = 100.0
    quantum_bytes: int = 1500
    allocated_lengths: bool = False
    reserve_admitted: bool = True
    be_floor: float = 5.0
    transmit_percent: Dict[str, float] = field(default_factory=lambda: {"af": 20.0, "ef": 5.0, "nc": 5.0})


@dataclass
class BufferConfig:
    """
    Router buffer. ``total_slots`` left unset derives BUFF from a delay
    buffer of ``delay_buffer_ms`` at link rate with ``mean_packet_bytes``.
    """

    total_slots: Optional[int] = None
    nc_reserve: int = 1
    delay_buffer_ms: float = 100.0
    mean_packet_bytes: int = 1000
    percent: Dict[str, float] = field(default_factory=lambda: {"af": 40.0, "ef": 10.0, "nc": 5.0})

    def percent_by_class(self) -> Dict[TrafficClass, float]:
        return {CLASS_KEYS[k]: float(v) for k, v in self.percent.items()}


@dataclass
class RunConfig:
    duration_s: float = 60.0
    seed: int = 1
    warmup_s: float = 5.0
    replications: int = 3
    sample_interval_ms: float = 1000.0
    scenario_id: str = "default"


@dataclass
class SweepConfig:
    be_rates: List[float] = field(default_factory=list)
    total_loads_bps: List[float] = field(default_factory=list)
    normalized_loads: List[float] = field(default_factory=list)
    k_values: List[float] = field(default_factory=list)


@dataclass
class RequirementsConfig:
    """Per-class limits on mean delay and loss."""

    max_delay_ms: Dict[str, float] = field(default_factory=lambda: {"af": 150.0, "ef": 150.0})
    max_loss_pct: Dict[str, float] = field(default_factory=lambda: {"af": 0.1, "ef": 0.1})

    def delay_limits(self) -> Dict[TrafficClass, float]:
        return {CLASS_KEYS[k]: float(v) for k, v in self.max_delay_ms.items()}

    def loss_limits(self) -> Dict[TrafficClass, float]:
        return {CLASS_KEYS[k]: float(v) for k, v in self.max_loss_pct.items()}


def _section_fields(cls) -> Dict[str, Any]:
    """Field name -> nested section class, or None for leaves."""
    out = {}
    for f in fields(cls):
        nested = None
        if f.default_factory is not MISSING:
            sample = f.default_factory()
            if is_dataclass(sample):
                nested = type(sample)
        out[f.name] = nested
    return out


def _coerce(key: str, value: Any, default: Any) -> Any:
    """Convert a parsed value to the type of the field's default."""
    if isinstance(value, str) and isinstance(default, (int, float)) and not isinstance(default, bool):
        try:
            value = float(value)
        except ValueError:
            raise ConfigError(key, f"expected a number, got {value!r}") from None
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(key, f"expected true or false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"expected an integer, got {value!r}")
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(key, f"expected an integer, got {value!r}")
        return int(value)
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return str(value)
        if not isinstance(value, str):
            raise ConfigError(key, f"expected a string, got {value!r}")
        return value
    if isinstance(default, list):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            value = [value]
        if isinstance(value, str):
            value = [v for v in value.split(",") if v.strip()]
        if not isinstance(value, (list, tuple)):
            raise ConfigError(key, f"expected a list, got {value!r}")
        try:
            return [float(v) for v in value]
        except (TypeError, ValueError):
            raise ConfigError(key, f"expected a list of numbers, got {value!r}") from None
    if isinstance(default, dict):
        if not isinstance(value, Mapping):
            raise ConfigError(key, f"expected a mapping, got {value!r}")
        out = {}
        for k, v in value.items():
            name = str(k).lower()
            if name not in CLASS_KEYS:
                raise ConfigError(f"{key}.{k}", f"unknown class, expected one of {list(CLASS_KEYS)}")
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"{key}.{k}", f"expected a number, got {v!r}")
            out[name] = float(v)
        return out
    # Optional fields default to None: accept numbers, keep ints as ints.
    if value is None or isinstance(value, (int, float, str)) and not isinstance(value, bool):
        return value
    raise ConfigError(key, f"unsupported value {value!r}")


def _optional_type(cls, name: str) -> Optional[type]:
    hints = {f.name: f.type for f in fields(cls)}
    text = str(hints.get(name, ""))
    if "int" in text:
        return int
    if "float" in text:
        return float
    return None


def _assign(target: Any, key: str, path: List[str], value: Any):
    """Set ``value`` at ``path`` under ``target``; ``key`` is the full dotted key."""
    head, rest = path[0], path[1:]
    if not rest and key in KEY_ALIASES:
        key = KEY_ALIASES[key]
        head = key.rsplit(".", 1)[-1]
    sections = _section_fields(type(target))
    if head not in sections:
        raise ConfigError(key, "unknown key")
    nested = sections[head]

    if nested is not None:
        child = getattr(target, head)
        if not rest:
            if not isinstance(value, Mapping):
                raise ConfigError(key, f"expected a section mapping, got {value!r}")
            for k, v in value.items():
                _assign(child, f"{key}.{k}", str(k).split("."), v)
            return
        _assign(child, key, rest, value)
        return

    if rest:
        # Dotted key into a mapping-valued field, e.g. buffer.percent.af
        current = getattr(target, head)
        if not isinstance(current, dict) or len(rest) != 1:
            raise ConfigError(key, "unknown key")
        merged = dict(current)
        merged.update(_coerce(key.rsplit(".", 1)[0], {rest[0]: value}, {}))
        setattr(target, head, merged)
        return

    default = getattr(type(target)(), head)
    if default is None and value is not None:
        wanted = _optional_type(type(target), head)
        if wanted is int:
            value = _coerce(key, value, 0)
        elif wanted is float:
            value = _coerce(key, value, 0.0)
        else:
            value = _coerce(key, value, None)
    elif value is None and default is not None:
        raise ConfigError(key, "must not be empty")
    elif value is not None:
        value = _coerce(key, value, default)
    setattr(target, head, value)


@dataclass
class ScenarioConfig:
    """Main configuration class for dsedge."""

    topology: TopologyConfig = field(default_factory=TopologyConfig)
    link: LinkSettings = field(default_factory=LinkSettings)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    marking: MarkingConfig = field(default_factory=MarkingConfig)
    scheduler: SchedulerSettings = field(default_factory=SchedulerSettings)
    buffer: BufferConfig = field(default_factory=BufferConfig)
    run: RunConfig = field(default_factory=RunConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    requirements: RequirementsConfig = field(default_factory=RequirementsConfig)

    @classmethod
    def from_dict(cls, config_dict: Optional[Mapping[str, Any]]) -> "ScenarioConfig":
        """
        Create a ScenarioConfig from nested and/or dotted keys.

        Raises:
            ConfigError: unknown key or wrongly typed value, naming the dotted key
        """
        config = cls()
        for key, value in (config_dict or {}).items():
            key = str(key)
            _assign(config, key, key.split("."), value)
        return config

    @classmethod
    def load_from_file(cls, filepath) -> "ScenarioConfig":
        """Load a scenario from a YAML or JSON file."""
        try:
            data = read_scenario_file(filepath)
        except yaml.YAMLError as e:
            raise ConfigError(None, f"cannot parse {filepath}: {e}") from e
        except ValueError as e:
            raise ConfigError(None, str(e)) from e
        config = cls.from_dict(data)
        logger.debug(f"Loaded scenario '{config.run.scenario_id}' from {filepath}")
        return config

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def dump_yaml(self, filepath=None) -> str:
        text = yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)
        if filepath is not None:
            write_text(filepath, text)
        return text

    def copy(self) -> "ScenarioConfig":
        return copy.deepcopy(self)

    def with_overrides(self, overrides: Mapping[str, Any]) -> "ScenarioConfig":
        """A copy with dotted-key overrides applied."""
        config = self.copy()
        for key, value in overrides.items():
            key = str(key)
            _assign(config, key, key.split("."), value)
        return config

    # Derived quantities

    def af_spec(self) -> ClassTrafficSpec:
        v = self.traffic.af
        return ClassTrafficSpec(TrafficClass.AF, v.rate_bps, v.packet_size(), v.delay_s, v.sessions, v.priority)

    def af_peak_spec(self) -> ClassTrafficSpec:
        """AF spec at the session peak rate, the input rate the weight formulas take."""
        return replace(self.af_spec(), idr=self.traffic.af.peak_rate())

    def ef_spec(self) -> ClassTrafficSpec:
        v = self.traffic.ef
        return ClassTrafficSpec(TrafficClass.EF, v.rate(), v.packet_size(), v.delay_s, v.sessions, v.priority)

    @property
    def domains(self) -> int:
        return self.topology.domains if self.topology.kind == "multi" else 1

    def priorities(self) -> Dict[TrafficClass, int]:
        return {
            TrafficClass.AF: self.traffic.af.priority,
            TrafficClass.EF: self.traffic.ef.priority,
            TrafficClass.BE: self.traffic.be.priority,
            TrafficClass.NC: 1,
        }

    def total_slots(self, rate_bps: Optional[float] = None) -> int:
        """BUFF in packets: explicit, or the delay buffer at ``rate_bps``."""
        if self.buffer.total_slots is not None and rate_bps in (None, self.link.bottleneck_bps):
            return self.buffer.total_slots
        rate = self.link.bottleneck_bps if rate_bps is None else rate_bps
        return int(math.floor(rate * self.buffer.delay_buffer_ms / 1000.0 / (self.buffer.mean_packet_bytes * 8)))

    def realtime_load(self) -> float:
        """Nominal AF plus EF bit-rate of one domain."""
        return self.af_spec().aggregate_rate + self.ef_spec().aggregate_rate

    def offered_load(self) -> float:
        """Nominal offered load over all domains."""
        return (self.realtime_load() + self.traffic.be.rate_bps) * self.domains

    def capacity(self) -> float:
        """Bottleneck bandwidth of the whole topology (D x R for multi-domain)."""
        return self.link.bottleneck_bps * self.domains

    def scheduler_config(self) -> SchedulerConfig:
        s = self.scheduler
        return SchedulerConfig(
            mode=s.mode,
            priorities=self.priorities(),
            k_factor=s.k_factor,
            recompute_epoch=s.recompute_epoch_ms / 1000.0,
            quantum=s.quantum_bytes,
            allocated_lengths=s.allocated_lengths,
            reserve_admitted=s.reserve_admitted,
            be_floor=s.be_floor,
            transmit_percent={CLASS_KEYS[k]: v for k, v in s.transmit_percent.items()},
        )

    def validate(self) -> bool:
        """
        Validate every section.

        Raises:
            ConfigError: naming the first offending dotted key
        """
        t = self.topology
        if t.kind not in TOPOLOGY_KINDS:
            raise ConfigError("topology.kind", f"must be one of {TOPOLOGY_KINDS}, got '{t.kind}'")
        if t.domains < 1:
            raise ConfigError("topology.domains", f"must be >= 1, got {t.domains}")
        if t.kind == "single" and t.domains != 1:
            raise ConfigError("topology.domains", f"single topology has one domain, got {t.domains}")
        if t.shared_slots is not None and t.shared_slots < 1:
            raise ConfigError("topology.shared_slots", f"must be >= 1, got {t.shared_slots}")

        lk = self.link
        if not MIN_BOTTLENECK_BPS <= lk.bottleneck_bps <= MAX_BOTTLENECK_BPS:
            raise ConfigError(
                "link.bottleneck_bps",
                f"must be within {MIN_BOTTLENECK_BPS}-{MAX_BOTTLENECK_BPS} bit/s, got {lk.bottleneck_bps:g}",
            )
        if lk.prop_delay_us < 0:
            raise ConfigError("link.prop_delay_us", f"must be >= 0, got {lk.prop_delay_us}")
        for name in ("access_bps", "core_bps"):
            if getattr(lk, name) <= 0:
                raise ConfigError(f"link.{name}", f"must be positive, got {getattr(lk, name)}")

        self._validate_traffic()

        for kind, dscp in self.marking.policy().items():
            if not 0 <= dscp <= 63:
                raise ConfigError(f"marking.{kind}", f"must be a 6-bit code point, got {dscp}")

        self.scheduler_config().validate()
        s = self.scheduler
        if sum(s.transmit_percent.values()) > 100 or any(v < 0 for v in s.transmit_percent.values()):
            raise ConfigError("scheduler.transmit_percent", f"must be >= 0 and sum to at most 100, got {s.transmit_percent}")
        if "be" in s.transmit_percent:
            raise ConfigError("scheduler.transmit_percent.be", "best effort takes the remainder")

        b = self.buffer
        if b.nc_reserve < 0:
            raise ConfigError("buffer.nc_reserve", f"must be >= 0, got {b.nc_reserve}")
        if b.delay_buffer_ms <= 0:
            raise ConfigError("buffer.delay_buffer_ms", f"must be positive, got {b.delay_buffer_ms}")
        if b.mean_packet_bytes <= 0:
            raise ConfigError("buffer.mean_packet_bytes", f"must be positive, got {b.mean_packet_bytes}")
        if b.total_slots is not None and b.total_slots <= b.nc_reserve:
            raise ConfigError("buffer.total_slots", f"must exceed buffer.nc_reserve ({b.nc_reserve}), got {b.total_slots}")
        if self.total_slots() <= b.nc_reserve:
            raise ConfigError("buffer.delay_buffer_ms", f"derived buffer of {self.total_slots()} slots is too small")
        if sum(b.percent.values()) > 100 or any(v < 0 for v in b.percent.values()):
            raise ConfigError("buffer.percent", f"must be >= 0 and sum to at most 100, got {b.percent}")
        if "be" in b.percent:
            raise ConfigError("buffer.percent.be", "best effort takes the remainder")

        r = self.run
        if r.duration_s < 0:
            raise ConfigError("run.duration_s", f"must be >= 0, got {r.duration_s}")
        if r.warmup_s < 0:
            raise ConfigError("run.warmup_s", f"must be >= 0, got {r.warmup_s}")
        if r.duration_s > 0 and r.warmup_s >= r.duration_s:
            raise ConfigError("run.warmup_s", f"must be shorter than run.duration_s ({r.duration_s}), got {r.warmup_s}")
        if r.replications < 1:
            raise ConfigError("run.replications", f"must be >= 1, got {r.replications}")
        if r.sample_interval_ms < 0:
            raise ConfigError("run.sample_interval_ms", f"must be >= 0, got {r.sample_interval_ms}")
        if r.seed < 0:
            raise ConfigError("run.seed", f"must be >= 0, got {r.seed}")

        sw = self.sweep
        for name, values, positive in (
            ("be_rates", sw.be_rates, False),
            ("total_loads_bps", sw.total_loads_bps, True),
            ("normalized_loads", sw.normalized_loads, True),
            ("k_values", sw.k_values, True),
        ):
            for v in values:
                if v < 0 or (positive and v == 0):
                    raise ConfigError(f"sweep.{name}", f"values must be {'positive' if positive else '>= 0'}, got {v:g}")

        for name in ("max_delay_ms", "max_loss_pct"):
            for k, v in getattr(self.requirements, name).items():
                if v < 0:
                    raise ConfigError(f"requirements.{name}.{k}", f"must be >= 0, got {v}")
        return True

    def _validate_traffic(self):
        af = self.traffic.af
        codec = af.codec()
        if codec.kind != "video":
            raise ConfigError("traffic.af.profile", f"'{af.profile}' is a {codec.kind} profile")
        self.af_spec().validate("traffic.af")
        if af.frame_interval_ms <= 0:
            raise ConfigError("traffic.af.frame_interval_ms", f"must be positive, got {af.frame_interval_ms}")
        if not af.gop or set(af.gop) - {"I", "P", "B"}:
            raise ConfigError("traffic.af.gop", f"must be a string of I, P and B frames, got '{af.gop}'")
        if len(af.size_ratio) != 3 or any(v < 0 for v in af.size_ratio):
            raise ConfigError("traffic.af.size_ratio", f"needs three nonnegative I:P:B values, got {af.size_ratio}")
        if af.pace and af.peak_rate() < af.rate_bps:
            raise ConfigError("traffic.af.peak_bps", f"pacing rate {af.peak_rate():g} is below the session rate {af.rate_bps:g}")

        ef = self.traffic.ef
        codec = ef.codec()
        if codec.kind != "voice":
            raise ConfigError("traffic.ef.profile", f"'{ef.profile}' is a {codec.kind} profile")
        self.ef_spec().validate("traffic.ef")
        if ef.sessions > 0 and ef.rate() <= 0:
            raise ConfigError("traffic.ef.rate_bps", f"must be positive, got {ef.rate()}")

        be = self.traffic.be
        if be.rate_bps < 0:
            raise ConfigError("traffic.be.rate_bps", f"must be >= 0, got {be.rate_bps}")
        if be.packet_bytes <= 0:
            raise ConfigError("traffic.be.packet_bytes", f"must be positive, got {be.packet_bytes}")
        if be.size_distribution().expected <= 0:
            raise ConfigError("traffic.be.size_dist", f"mean packet size must be positive, got '{be.size_dist}'")
        if be.priority < 0:
            raise ConfigError("traffic.be.priority", f"must be >= 0, got {be.priority}")


def parse_override(text: str) -> Tuple[str, Any]:
    """Split ``key=value``; the value is read as a YAML scalar or list."""
    if "=" not in text:
        raise ConfigError(None, f"override must look like key=value, got '{text}'")
    key, raw = text.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError(None, f"override has an empty key: '{text}'")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError:
        value = raw
    return key, value

