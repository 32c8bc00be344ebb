"""
Traffic Sources for dsedge
==========================

Codec profiles, per-class traffic specs and the three source models:
VBR video (GOP-structured, exponential frame sizes), CBR voice and
Poisson best effort.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

from ..config.errors import ConfigError
from ..engine.random_streams import Distribution, RandomStream
from ..engine.simulator import EventKind, SimTime, Simulator, US_PER_SECOND, seconds_to_us
from .diffserv import Packet, TrafficClass

logger = logging.getLogger(__name__)


DEFAULT_PRIORITIES: Dict[TrafficClass, int] = {
    TrafficClass.AF: 2,
    TrafficClass.EF: 3,
    TrafficClass.BE: 1,
    TrafficClass.NC: 1,
}

# Source kind feeding each class, used for marking.
CLASS_KIND = {TrafficClass.AF: "video", TrafficClass.EF: "voice", TrafficClass.BE: "data"}

DEFAULT_GOP = "IBBBPBBB"
DEFAULT_SIZE_RATIO = (5.0, 3.0, 1.0)


@dataclass(frozen=True)
class CodecProfile:
    """Measured codec characteristics."""

    name: str
    avg_rate: float
    peak_rate: float
    pkt_size: int
    kind: str

    def __post_init__(self):
        if not (self.peak_rate >= self.avg_rate > 0) or self.pkt_size <= 0:
            raise ValueError(f"Invalid codec profile {self}")


PROFILES: Dict[str, CodecProfile] = {
    p.name: p
    for p in (
        CodecProfile("H263", 328_000, 840_000, 1038, "video"),
        CodecProfile("JPEG-RTP", 1_050_000, 1_400_000, 1022, "video"),
        CodecProfile("MPEG-audio", 64_000, 64_000, 1402, "voice"),
        CodecProfile("G723", 14_000, 14_000, 102, "voice"),
        CodecProfile("GSM", 20_000, 20_000, 153, "voice"),
        CodecProfile("ulaw", 71_000, 71_000, 534, "voice"),
        CodecProfile("DVI-RTP", 40_000, 40_000, 298, "voice"),
    )
}


def profile(name: str, key: str = "profile") -> CodecProfile:
    """Look up a codec profile by name."""
    try:
        return PROFILES[name]
    except KeyError:
        raise ConfigError(key, f"unknown profile '{name}', known profiles: {', '.join(PROFILES)}") from None


@dataclass(frozen=True)
class ClassTrafficSpec:
    """Admission parameters of one traffic class."""

    cls: TrafficClass
    idr: float
    pktsz: int
    dly: float = 0.0
    sessions: int = 1
    priority: Optional[int] = None

    def __post_init__(self):
        if self.priority is None:
            object.__setattr__(self, "priority", DEFAULT_PRIORITIES[self.cls])

    def validate(self, prefix: str) -> "ClassTrafficSpec":
        if self.idr < 0:
            raise ConfigError(f"{prefix}.rate_bps", f"must be >= 0, got {self.idr}")
        if self.pktsz <= 0:
            raise ConfigError(f"{prefix}.packet_bytes", f"must be positive, got {self.pktsz}")
        if self.sessions < 0:
            raise ConfigError(f"{prefix}.sessions", f"must be >= 0, got {self.sessions}")
        if self.cls in (TrafficClass.AF, TrafficClass.EF) and self.dly <= 0:
            raise ConfigError(f"{prefix}.delay_s", f"must be positive, got {self.dly}")
        if self.priority is not None and self.priority < 0:
            raise ConfigError(f"{prefix}.priority", f"must be >= 0, got {self.priority}")
        return self

    @property
    def aggregate_rate(self) -> float:
        return self.idr * self.sessions


def offered_load(specs: Iterable[ClassTrafficSpec], be_rate: float = 0.0) -> float:
    """Total offered bit-rate: sum of idr x N over the real-time classes plus BE."""
    total = sum(s.aggregate_rate for s in specs if s.cls in (TrafficClass.AF, TrafficClass.EF))
    return float(total + be_rate)


def fragment(size: int, frag_limit: int) -> List[int]:
    """Split ``size`` bytes into packets of at most ``frag_limit`` bytes."""
    if frag_limit <= 0:
        raise ValueError(f"frag_limit must be positive, got {frag_limit}")
    full, rest = divmod(size, frag_limit)
    return [frag_limit] * full + ([rest] if rest else [])


def serialization_us(size: int, rate_bps: float) -> SimTime:
    """Time to clock ``size`` bytes onto a ``rate_bps`` wire, rounded to the nearest µs."""
    rate = int(round(rate_bps))
    if rate <= 0:
        raise ValueError(f"rate must be positive, got {rate_bps}")
    return (size * 8 * US_PER_SECOND + rate // 2) // rate


@dataclass
class VideoSourceState:
    """
    State of one video session.

    Frame sizes are drawn exponential around a per-type mean. With
    ``pace_rate`` set, a frame's fragments leave the sender spaced at
    that rate rather than as one back-to-back burst.
    """

    flow: str
    gop_pattern: str
    frame_interval: SimTime
    mean_frame_size: Dict[str, float]
    frag_limit: int
    pace_rate: Optional[float] = None
    domain: int = 0
    frame_index: int = 0
    next_frame_at: SimTime = 0
    sender_free_at: SimTime = 0
    seq: int = 0

    @classmethod
    def for_rate(cls, flow: str, rate_bps: float, frame_interval: SimTime, frag_limit: int,
                 gop_pattern: str = DEFAULT_GOP, size_ratio: Sequence[float] = DEFAULT_SIZE_RATIO,
                 pace_rate: Optional[float] = None, domain: int = 0,
                 start_at: SimTime = 0) -> "VideoSourceState":
        """Scale the I:P:B size ratio so the long-run rate equals ``rate_bps``."""
        if not gop_pattern or set(gop_pattern) - {"I", "P", "B"}:
            raise ConfigError("traffic.af.gop", f"GOP must be a string of I, P and B frames, got '{gop_pattern}'")
        ratio = dict(zip("IPB", size_ratio))
        gop_weight = sum(ratio[f] for f in gop_pattern)
        gop_bytes = rate_bps * (frame_interval / US_PER_SECOND) * len(gop_pattern) / 8.0
        unit = gop_bytes / gop_weight if gop_weight else 0.0
        return cls(
            flow=flow,
            gop_pattern=gop_pattern,
            frame_interval=frame_interval,
            mean_frame_size={f: unit * ratio[f] for f in "IPB"},
            frag_limit=frag_limit,
            pace_rate=pace_rate,
            domain=domain,
            next_frame_at=start_at,
            sender_free_at=start_at,
        )

    @property
    def gop_duration(self) -> SimTime:
        return self.frame_interval * len(self.gop_pattern)

    @property
    def current_frame_type(self) -> str:
        return self.gop_pattern[self.frame_index % len(self.gop_pattern)]


def next_video_frame(state: VideoSourceState, rng: RandomStream,
                     now: Optional[SimTime] = None) -> List[Packet]:
    """
    Emit the next frame of the GOP as a list of fragments.

    Each fragment's ``created_at`` is its departure time from the sender;
    unpaced fragments all leave at the frame time.
    """
    now = state.next_frame_at if now is None else now
    frame_type = state.current_frame_type
    mean = state.mean_frame_size[frame_type]

    packets: List[Packet] = []
    if mean > 0:
        size = max(1, int(round(rng.draw(Distribution.exponential(mean)))))
        depart = max(now, state.sender_free_at) if state.pace_rate else now
        for chunk in fragment(size, state.frag_limit):
            packets.append(Packet(
                uid=f"{state.flow}#{state.seq}",
                kind="video",
                size=chunk,
                created_at=depart,
                traffic_class=TrafficClass.AF,
                flow=state.flow,
                domain=state.domain,
            ))
            state.seq += 1
            if state.pace_rate:
                depart += serialization_us(chunk, state.pace_rate)
        if state.pace_rate:
            state.sender_free_at = depart

    state.frame_index += 1
    state.next_frame_at = now + state.frame_interval
    return packets


@dataclass
class VoiceSourceState:
    """State of one CBR voice session."""

    flow: str
    spec: ClassTrafficSpec
    interval: SimTime
    domain: int = 0
    next_emit_at: SimTime = 0
    seq: int = 0


def voice_interval_us(spec: ClassTrafficSpec, rate_scale: float = 1.0) -> SimTime:
    """CBR inter-departure time pktsz x 8 / idr, in µs."""
    rate = spec.idr * rate_scale
    if rate <= 0:
        raise ConfigError("traffic.ef.rate_bps", f"voice rate must be positive, got {rate}")
    return int(round(spec.pktsz * 8 * US_PER_SECOND / rate))


def next_voice_packet(state: VoiceSourceState, now: Optional[SimTime] = None) -> Tuple[Packet, SimTime]:
    """Emit one fixed-size packet; returns it with the next emission time."""
    now = state.next_emit_at if now is None else now
    packet = Packet(
        uid=f"{state.flow}#{state.seq}",
        kind="voice",
        size=state.spec.pktsz,
        created_at=now,
        traffic_class=TrafficClass.EF,
        flow=state.flow,
        domain=state.domain,
    )
    state.seq += 1
    state.next_emit_at = now + state.interval
    return packet, state.next_emit_at


@dataclass
class BestEffortState:
    flow: str
    mean_rate: float
    size_dist: Distribution
    domain: int = 0
    seq: int = 0


def next_be_arrival(state: BestEffortState, rng: RandomStream,
                    now: SimTime) -> Optional[Tuple[Packet, SimTime]]:
    """
    Draw the next Poisson arrival after ``now``.

    Inter-arrival times are exponential with mean E[size] x 8 / mean_rate,
    so the long-run bit-rate tends to ``mean_rate``. Returns None when the
    source is disabled (rate 0).
    """
    if state.mean_rate <= 0:
        return None
    mean_gap_us = state.size_dist.expected * 8 * US_PER_SECOND / state.mean_rate
    arrival = now + max(1, int(round(rng.draw(Distribution.exponential(mean_gap_us)))))
    size = max(1, int(round(rng.draw(state.size_dist))))
    packet = Packet(
        uid=f"{state.flow}#{state.seq}",
        kind="data",
        size=size,
        created_at=arrival,
        traffic_class=TrafficClass.BE,
        flow=state.flow,
        domain=state.domain,
    )
    state.seq += 1
    return packet, arrival


Emit = Callable[[Packet], None]


class TrafficSource:
    """Drives a source state machine on the simulator until ``stop_at``."""

    kind = "source"

    def __init__(self, sim: Simulator, emit: Emit, stop_at: SimTime):
        self.sim = sim
        self.emit = emit
        self.stop_at = stop_at
        self.emitted_packets = 0
        self.emitted_bytes = 0

    def start(self):
        raise NotImplementedError

    def _send(self, packet: Packet):
        self.emitted_packets += 1
        self.emitted_bytes += packet.size
        self.emit(packet)


class VideoSource(TrafficSource):
    kind = "video"

    def __init__(self, sim: Simulator, emit: Emit, stop_at: SimTime,
                 state: VideoSourceState, rng: RandomStream):
        super().__init__(sim, emit, stop_at)
        self.state = state
        self.rng = rng

    def start(self):
        if self.state.next_frame_at <= self.stop_at:
            self.sim.at(self.state.next_frame_at, EventKind.SOURCE_TICK, self._on_frame)

    def _on_frame(self, event):
        for packet in next_video_frame(self.state, self.rng, self.sim.now):
            if packet.created_at > self.stop_at:
                break
            if packet.created_at == self.sim.now:
                self._send(packet)
            else:
                self.sim.at(packet.created_at, EventKind.SOURCE_TICK, self._on_paced, packet)
        if self.state.next_frame_at <= self.stop_at:
            self.sim.at(self.state.next_frame_at, EventKind.SOURCE_TICK, self._on_frame)

    def _on_paced(self, event):
        self._send(event.payload)


class VoiceSource(TrafficSource):
    kind = "voice"

    def __init__(self, sim: Simulator, emit: Emit, stop_at: SimTime, state: VoiceSourceState):
        super().__init__(sim, emit, stop_at)
        self.state = state

    def start(self):
        if self.state.next_emit_at <= self.stop_at:
            self.sim.at(self.state.next_emit_at, EventKind.SOURCE_TICK, self._on_tick)

    def _on_tick(self, event):
        packet, next_at = next_voice_packet(self.state, self.sim.now)
        self._send(packet)
        if next_at <= self.stop_at:
            self.sim.at(next_at, EventKind.SOURCE_TICK, self._on_tick)


class BestEffortSource(TrafficSource):
    kind = "data"

    def __init__(self, sim: Simulator, emit: Emit, stop_at: SimTime,
                 state: BestEffortState, rng: RandomStream):
        super().__init__(sim, emit, stop_at)
        self.state = state
        self.rng = rng

    def start(self):
        self._schedule_next(self.sim.now)

    def _schedule_next(self, now: SimTime):
        nxt = next_be_arrival(self.state, self.rng, now)
        if nxt is None:
            return
        packet, arrival = nxt
        if arrival <= self.stop_at:
            self.sim.at(arrival, EventKind.SOURCE_TICK, self._on_arrival, packet)

    def _on_arrival(self, event):
        self._send(event.payload)
        self._schedule_next(self.sim.now)


@dataclass
class SourceSet:
    """Every source of one domain."""

    video: List[VideoSource] = field(default_factory=list)
    voice: List[VoiceSource] = field(default_factory=list)
    data: List[BestEffortSource] = field(default_factory=list)

    def __iter__(self):
        yield from self.video
        yield from self.voice
        yield from self.data

    def start(self):
        for source in self:
            source.start()


def stagger(index: int, count: int, period: SimTime) -> SimTime:
    """Start offset of session ``index`` of ``count`` spread over ``period``."""
    return (index * period) // count if count else 0


def frame_interval_us(frame_interval_ms: float) -> SimTime:
    return seconds_to_us(frame_interval_ms / 1000.0)


def thinning_factor(requested_load: float, realtime_load: float) -> float:
    """Scale applied to real-time sources when a requested load is below their nominal sum."""
    if realtime_load <= 0 or requested_load >= realtime_load:
        return 1.0
    return max(requested_load, 0.0) / realtime_load
