"""
Network Topology for dsedge
===========================

Store-and-forward ports, the sender-side edge switch and edge router,
the receiver sink, and the single- and multi-domain topologies.

Sender path per domain::

    source --100M--> switch (marks) --1G--> router (classifies, schedules)
        --bottleneck R--> [shared FIFO at D x R] --> receiver

The receiver-side devices are pass-through; their serialization is added
to the delay when a packet reaches the sink.
"""

import logging
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Deque, Dict, Iterator, List, Optional, Union

from ..config.errors import ConfigError
from ..config.settings import MAX_BOTTLENECK_BPS, MIN_BOTTLENECK_BPS
from ..engine.random_streams import RngManager
from ..engine.simulator import EventKind, SimTime, Simulator
from .diffserv import EnqueueResult, Packet, mark, plan_buffers, plan_buffers_percent
from .metrics import MeasurementSample, MetricsLedger
from .scheduler import FifoScheduler, WrrScheduler
from .traffic import (
    BestEffortSource,
    BestEffortState,
    SourceSet,
    VideoSource,
    VideoSourceState,
    VoiceSource,
    VoiceSourceState,
    frame_interval_us,
    serialization_us,
    stagger,
    voice_interval_us,
)

if TYPE_CHECKING:
    from ..config.settings import ScenarioConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LinkConfig:
    """One hop: rate in bits/s, propagation delay in µs, and whether it is shaped."""

    rate: float
    prop_delay: SimTime = 0
    shaped: bool = True

    def __post_init__(self):
        if self.rate <= 0:
            raise ConfigError("link", f"rate must be positive, got {self.rate}")
        if self.prop_delay < 0:
            raise ConfigError("link.prop_delay_us", f"must be >= 0, got {self.prop_delay}")

    def serialization(self, size: int) -> SimTime:
        return serialization_us(size, self.rate)


def transmit(packet: Packet, link: LinkConfig, now: SimTime) -> SimTime:
    """Time the last bit of ``packet`` reaches the far end of ``link``."""
    return now + link.serialization(packet.size) + link.prop_delay


class UnboundedFifo:
    """Queue of a non-bottleneck hop; never drops."""

    def __init__(self):
        self.queue: Deque[Packet] = deque()

    def __len__(self) -> int:
        return len(self.queue)

    def packets(self) -> Iterator[Packet]:
        return iter(self.queue)

    def start(self, sim: Simulator):
        pass

    def offer(self, packet: Packet, now: SimTime) -> EnqueueResult:
        self.queue.append(packet)
        return EnqueueResult.ACCEPTED

    def next_packet(self, now: SimTime) -> Optional[Packet]:
        return self.queue.popleft() if self.queue else None


Discipline = Union[UnboundedFifo, FifoScheduler, WrrScheduler]
Deliver = Callable[[Packet], None]


class Port:
    """
    An output port: a queueing discipline feeding one link.

    The port pulls the next packet from its discipline whenever the link
    goes idle, so it never idles while the discipline holds a packet.
    """

    def __init__(self, sim: Simulator, name: str, link: LinkConfig, discipline: Discipline,
                 deliver: Deliver, on_drop: Optional[Deliver] = None):
        self.sim = sim
        self.name = name
        self.link = link
        self.discipline = discipline
        self.deliver = deliver
        self.on_drop = on_drop
        self.current: Optional[Packet] = None
        self.propagating: Deque[Packet] = deque()
        self.sent_packets = 0
        self.sent_bytes = 0
        self.dropped_packets = 0
        self.backlog_bytes = 0
        self.backlog_max_bytes = 0
        self.departures: Optional[List] = None

    @property
    def busy(self) -> bool:
        return self.current is not None

    def record_departures(self) -> "Port":
        """Keep (time, size) of every completed transmission."""
        self.departures = []
        return self

    def receive(self, packet: Packet):
        result = self.discipline.offer(packet, self.sim.now)
        if result is EnqueueResult.DROPPED:
            self.dropped_packets += 1
            if self.on_drop is not None:
                self.on_drop(packet)
            return
        self.backlog_bytes += packet.size
        if not self.busy:
            self._start_next()
        if self.backlog_bytes > self.backlog_max_bytes:
            self.backlog_max_bytes = self.backlog_bytes

    def _start_next(self):
        packet = self.discipline.next_packet(self.sim.now)
        if packet is None:
            return
        self.backlog_bytes -= packet.size
        self.current = packet
        self.sim.after(self.link.serialization(packet.size), EventKind.TRANSMISSION_COMPLETE,
                       self._on_complete, packet)

    def _on_complete(self, event):
        packet = self.current
        self.current = None
        self.sent_packets += 1
        self.sent_bytes += packet.size
        if self.departures is not None:
            self.departures.append((self.sim.now, packet.size))
        if self.link.prop_delay > 0:
            self.propagating.append(packet)
            self.sim.after(self.link.prop_delay, EventKind.PACKET_ARRIVAL, self._on_propagated, packet)
        else:
            self.deliver(packet)
        self._start_next()

    def _on_propagated(self, event):
        self.deliver(self.propagating.popleft())

    def held(self) -> Iterator[Packet]:
        """Packets queued, on the wire or propagating."""
        yield from self.discipline.packets()
        if self.current is not None:
            yield self.current
        yield from self.propagating


class EdgeSwitch:
    """Marks packets from the LAN and forwards them to the uplink port."""

    def __init__(self, policy: Dict[str, int]):
        self.policy = policy
        self.uplink: Optional[Port] = None
        self.marked = 0

    def receive(self, packet: Packet):
        mark(packet, self.policy)
        self.marked += 1
        self.uplink.receive(packet)


class EdgeRouter:
    """Classifies and schedules onto the bottleneck."""

    def __init__(self, scheduler: Discipline, egress: Port):
        self.scheduler = scheduler
        self.egress = egress

    def receive(self, packet: Packet):
        self.egress.receive(packet)


class Sink:
    """Receiver: stamps delivery and records end-to-end results."""

    def __init__(self, ledger: MetricsLedger, pass_through: List[LinkConfig]):
        self.ledger = ledger
        self.pass_through = pass_through
        self.received = 0
        self.sim: Optional[Simulator] = None

    def receive(self, packet: Packet):
        delay = sum(link.serialization(packet.size) + link.prop_delay for link in self.pass_through)
        packet.delivered_at = self.sim.now + delay
        self.received += 1
        self.ledger.record_delivered(packet)


@dataclass
class DomainStack:
    index: int
    sources: SourceSet
    access: List[Port]
    switch: EdgeSwitch
    uplink: Port
    router: EdgeRouter

    def ports(self) -> Iterator[Port]:
        yield from self.access
        yield self.uplink
        yield self.router.egress


@dataclass
class Topology:
    """Every node of one run plus the ledger they report to."""

    sim: Simulator
    ledger: MetricsLedger
    sink: Sink
    bottleneck: LinkConfig
    domains: List[DomainStack] = field(default_factory=list)
    shared: Optional[Port] = None
    warmup: SimTime = 0

    def ports(self) -> Iterator[Port]:
        for stack in self.domains:
            yield from stack.ports()
        if self.shared is not None:
            yield self.shared

    def schedulers(self) -> List[Discipline]:
        return [stack.router.scheduler for stack in self.domains]

    def emit(self, packet: Packet, port: Port):
        packet.measured = packet.created_at >= self.warmup
        self.ledger.record_offered(packet)
        port.receive(packet)

    def start(self, sample_interval: SimTime = 0):
        for stack in self.domains:
            stack.router.scheduler.start(self.sim)
            stack.sources.start()
        if sample_interval > 0:
            self.sim.after(sample_interval, EventKind.MEASUREMENT_SAMPLE, self._on_sample, sample_interval)

    def _on_sample(self, event):
        self.sample(self.sim.now)
        self.sim.after(event.payload, EventKind.MEASUREMENT_SAMPLE, self._on_sample, event.payload)

    def sample(self, now: SimTime) -> MeasurementSample:
        """Record occupancy and check conservation."""
        held = packets_in_system(self)
        self.ledger.check_conservation(held, now)
        high_water: Dict[str, int] = {}
        for stack in self.domains:
            scheduler = stack.router.scheduler
            if isinstance(scheduler, WrrScheduler):
                for cls, hw in scheduler.high_water().items():
                    high_water[f"d{stack.index}.{cls.value}"] = hw
            elif isinstance(scheduler, FifoScheduler):
                high_water[f"d{stack.index}.fifo"] = scheduler.high_water_mark
        sample = MeasurementSample(
            at=now,
            in_system=sum(held.values()),
            shared_backlog_bytes=self.shared.backlog_max_bytes if self.shared else 0,
            queue_high_water=high_water,
        )
        self.ledger.samples.append(sample)
        if self.shared is not None:
            self.ledger.shared_backlog_max_bytes = self.shared.backlog_max_bytes
        return sample


def packets_in_system(topology: Topology) -> Counter:
    """Measured packets still held anywhere, keyed by (class, domain)."""
    held: Counter = Counter()
    for port in topology.ports():
        for packet in port.held():
            if packet.measured:
                held[(packet.traffic_class, packet.domain)] += 1
    return held


def check_bottleneck(rate: float):
    if not MIN_BOTTLENECK_BPS <= rate <= MAX_BOTTLENECK_BPS:
        raise ConfigError(
            "link.bottleneck_bps",
            f"must be within {MIN_BOTTLENECK_BPS}-{MAX_BOTTLENECK_BPS} bit/s, got {rate:g}",
        )


def _router_discipline(cfg: "ScenarioConfig", tb: float, be_rate: float) -> Discipline:
    mode = cfg.scheduler.mode
    total_slots = cfg.total_slots(tb)
    if mode == "fifo":
        return FifoScheduler(total_slots)
    if mode == "fixed":
        plan = plan_buffers_percent(total_slots, cfg.buffer.percent_by_class())
    else:
        plan = plan_buffers(cfg.af_spec(), cfg.ef_spec(), total_slots, cfg.buffer.nc_reserve)
    return WrrScheduler(plan, cfg.scheduler_config(), cfg.af_peak_spec(), cfg.ef_spec(), tb, be_rate)


def _build_domain(topo: Topology, cfg: "ScenarioConfig", index: int, rngs: RngManager,
                  egress_link: LinkConfig, downstream: Deliver, stop_at: SimTime,
                  rate_scale: float) -> DomainStack:
    sim = topo.sim
    links = cfg.link
    access_link = LinkConfig(links.access_bps)
    core_link = LinkConfig(links.core_bps)

    be_rate = cfg.traffic.be.rate_bps
    discipline = _router_discipline(cfg, cfg.link.bottleneck_bps, be_rate)
    egress = Port(sim, f"d{index}.egress", egress_link, discipline, downstream, topo.ledger.record_dropped)
    router = EdgeRouter(discipline, egress)
    uplink = Port(sim, f"d{index}.uplink", core_link, UnboundedFifo(), router.receive)
    switch = EdgeSwitch(cfg.marking.policy())
    switch.uplink = uplink

    sources = SourceSet()
    access: List[Port] = []

    def attach(name: str) -> Callable[[Packet], None]:
        port = Port(sim, f"d{index}.{name}.access", access_link, UnboundedFifo(), switch.receive)
        access.append(port)
        return lambda packet: topo.emit(packet, port)

    video = cfg.traffic.af
    af = cfg.af_spec()
    interval = frame_interval_us(video.frame_interval_ms)
    pace = video.peak_rate() if video.pace else None
    for k in range(af.sessions):
        flow = f"d{index}.video{k}"
        state = VideoSourceState.for_rate(
            flow, af.idr * rate_scale, interval, af.pktsz, video.gop, video.size_ratio,
            pace_rate=pace, domain=index,
            start_at=stagger(k, af.sessions, interval * len(video.gop)),
        )
        sources.video.append(VideoSource(sim, attach(flow), stop_at, state, rngs.get_stream(f"d{index}.video", k)))

    ef = cfg.ef_spec()
    if ef.sessions and ef.idr * rate_scale > 0:
        voice_gap = voice_interval_us(ef, rate_scale)
        for k in range(ef.sessions):
            flow = f"d{index}.voice{k}"
            state = VoiceSourceState(flow, ef, voice_gap, domain=index,
                                     next_emit_at=stagger(k, ef.sessions, voice_gap))
            sources.voice.append(VoiceSource(sim, attach(flow), stop_at, state))

    if be_rate > 0:
        flow = f"d{index}.data0"
        state = BestEffortState(flow, be_rate, cfg.traffic.be.size_distribution(), domain=index)
        sources.data.append(BestEffortSource(sim, attach(flow), stop_at, state, rngs.get_stream(f"d{index}.data", 0)))

    logger.debug(
        f"Domain {index}: {len(sources.video)} video, {len(sources.voice)} voice, "
        f"{len(sources.data)} data sources; {cfg.scheduler.mode} scheduler"
    )
    return DomainStack(index, sources, access, switch, uplink, router)


def _new_topology(cfg: "ScenarioConfig", sim: Optional[Simulator], ledger: Optional[MetricsLedger],
                  domains: int, pass_through: List[LinkConfig]) -> Topology:
    sim = sim or Simulator()
    ledger = ledger or MetricsLedger(domains=domains, seed=cfg.run.seed)
    sink = Sink(ledger, pass_through)
    sink.sim = sim
    return Topology(
        sim=sim,
        ledger=ledger,
        sink=sink,
        bottleneck=LinkConfig(cfg.link.bottleneck_bps, cfg.link.prop_delay_us),
        warmup=int(round(cfg.run.warmup_s * 1_000_000)),
    )


def build_single_domain(cfg: "ScenarioConfig", sim: Optional[Simulator] = None,
                        ledger: Optional[MetricsLedger] = None, seed: Optional[int] = None,
                        rate_scale: float = 1.0) -> Topology:
    """
    Sources, marking switch, scheduling router and bottleneck of one domain.

    Raises:
        ConfigError: invalid rates, including a bottleneck outside the sub-rate range
    """
    cfg.validate()
    check_bottleneck(cfg.link.bottleneck_bps)
    pass_through = [LinkConfig(cfg.link.core_bps), LinkConfig(cfg.link.access_bps)]
    topo = _new_topology(cfg, sim, ledger, 1, pass_through)
    rngs = RngManager(cfg.run.seed if seed is None else seed)
    stop_at = int(round(cfg.run.duration_s * 1_000_000))
    topo.domains.append(
        _build_domain(topo, cfg, 0, rngs, topo.bottleneck, topo.sink.receive, stop_at, rate_scale)
    )
    logger.info(f"Built single-domain topology, bottleneck {cfg.link.bottleneck_bps:g} bit/s")
    return topo


def build_multi_domain(cfg: "ScenarioConfig", domains: Optional[int] = None,
                       sim: Optional[Simulator] = None, ledger: Optional[MetricsLedger] = None,
                       seed: Optional[int] = None, rate_scale: float = 1.0) -> Topology:
    """
    ``domains`` independent stacks feeding one shared FIFO link of rate D x R.

    With shaping on, each domain's egress runs at R; with it off, at the
    core rate, leaving all contention to the shared link.
    """
    domains = cfg.topology.domains if domains is None else domains
    if domains < 1:
        raise ConfigError("topology.domains", f"must be >= 1, got {domains}")
    if domains == 1:
        return build_single_domain(cfg, sim, ledger, seed, rate_scale)

    cfg.validate()
    check_bottleneck(cfg.link.bottleneck_bps)
    rate = cfg.link.bottleneck_bps
    shared_rate = domains * rate
    pass_through = [LinkConfig(cfg.link.core_bps), LinkConfig(cfg.link.access_bps)]
    topo = _new_topology(cfg, sim, ledger, domains, pass_through)

    shared_slots = cfg.topology.shared_slots or cfg.total_slots(shared_rate)
    topo.shared = Port(topo.sim, "shared", LinkConfig(shared_rate, cfg.link.prop_delay_us),
                       FifoScheduler(shared_slots), topo.sink.receive, topo.ledger.record_dropped)

    shaped = cfg.topology.shaped
    egress = LinkConfig(rate) if shaped else LinkConfig(cfg.link.core_bps)
    rngs = RngManager(cfg.run.seed if seed is None else seed)
    stop_at = int(round(cfg.run.duration_s * 1_000_000))
    for d in range(domains):
        topo.domains.append(
            _build_domain(topo, cfg, d, rngs, egress, topo.shared.receive, stop_at, rate_scale)
        )
    logger.info(
        f"Built {domains}-domain topology, per-domain {rate:g} bit/s "
        f"({'shaped' if shaped else 'unshaped'}), shared {shared_rate:g} bit/s, {shared_slots} slots"
    )
    return topo


def build_topology(cfg: "ScenarioConfig", **kwargs) -> Topology:
    if cfg.topology.kind == "multi":
        return build_multi_domain(cfg, **kwargs)
    return build_single_domain(cfg, **kwargs)
