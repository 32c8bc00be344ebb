"""
Queue Scheduling for dsedge
===========================

Weight models (adaptive, static with tuning factor K, fixed percentages,
rate-measured), byte-based deficit round robin over the class queues,
and the single-FIFO baseline used when QoS is disabled.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, Mapping, Optional

from ..config.errors import ConfigError
from ..engine.simulator import EventKind, SimTime, Simulator, US_PER_SECOND
from .diffserv import (
    BufferPlan,
    ClassQueue,
    EnqueueResult,
    Packet,
    TIE_BREAK_ORDER,
    TrafficClass,
    classify,
)
from .traffic import ClassTrafficSpec, DEFAULT_PRIORITIES

logger = logging.getLogger(__name__)

SCHEDULER_MODES = ("adaptive", "static", "fifo", "fixed", "measured")

REALTIME_AND_BE = (TrafficClass.AF, TrafficClass.EF, TrafficClass.BE)

# Reference router map: transmit-rate and buffer-size percentages, BE gets the remainder.
DEFAULT_TRANSMIT_PERCENT = {TrafficClass.AF: 20.0, TrafficClass.EF: 5.0, TrafficClass.NC: 5.0}
DEFAULT_BUFFER_PERCENT = {TrafficClass.AF: 40.0, TrafficClass.EF: 10.0, TrafficClass.NC: 5.0}


@dataclass(frozen=True)
class WeightVector:
    """Service-rate weights in percent."""

    w_af: float = 0.0
    w_ef: float = 0.0
    w_be: float = 0.0
    w_nc: float = 0.0
    computed_at: SimTime = 0

    @classmethod
    def from_mapping(cls, weights: Mapping[TrafficClass, float], computed_at: SimTime = 0) -> "WeightVector":
        return cls(
            w_af=float(weights.get(TrafficClass.AF, 0.0)),
            w_ef=float(weights.get(TrafficClass.EF, 0.0)),
            w_be=float(weights.get(TrafficClass.BE, 0.0)),
            w_nc=float(weights.get(TrafficClass.NC, 0.0)),
            computed_at=computed_at,
        )

    def get(self, cls: TrafficClass) -> float:
        return {
            TrafficClass.AF: self.w_af,
            TrafficClass.EF: self.w_ef,
            TrafficClass.BE: self.w_be,
            TrafficClass.NC: self.w_nc,
        }[cls]

    def as_dict(self) -> Dict[TrafficClass, float]:
        return {c: self.get(c) for c in TrafficClass}

    @property
    def total(self) -> float:
        return self.w_af + self.w_ef + self.w_be + self.w_nc

    def __str__(self) -> str:
        return f"AF={self.w_af:.2f} EF={self.w_ef:.2f} BE={self.w_be:.2f} NC={self.w_nc:.2f}"


def _normalize(raw: Mapping[TrafficClass, float], computed_at: SimTime = 0) -> WeightVector:
    total = sum(raw.values())
    if total <= 0:
        return WeightVector(computed_at=computed_at)
    return WeightVector.from_mapping({c: 100.0 * v / total for c, v in raw.items()}, computed_at)


def priority_weights(priorities: Optional[Mapping[TrafficClass, int]] = None,
                     computed_at: SimTime = 0) -> WeightVector:
    """Weights proportional to the AF, EF and BE priorities."""
    priorities = priorities or DEFAULT_PRIORITIES
    return _normalize({c: float(priorities[c]) for c in REALTIME_AND_BE}, computed_at)


@dataclass(frozen=True)
class SchedulerConfig:
    """Scheduler parameters."""

    mode: str = "adaptive"
    priorities: Mapping[TrafficClass, int] = field(default_factory=lambda: dict(DEFAULT_PRIORITIES))
    k_factor: float = 1.0
    recompute_epoch: float = 0.1
    quantum: int = 1500
    allocated_lengths: bool = False
    reserve_admitted: bool = True
    be_floor: float = 5.0
    transmit_percent: Mapping[TrafficClass, float] = field(
        default_factory=lambda: dict(DEFAULT_TRANSMIT_PERCENT)
    )

    def validate(self) -> "SchedulerConfig":
        if self.mode not in SCHEDULER_MODES:
            raise ConfigError("scheduler.mode", f"must be one of {SCHEDULER_MODES}, got '{self.mode}'")
        if self.k_factor <= 0:
            raise ConfigError("scheduler.k_factor", f"must be positive, got {self.k_factor}")
        if self.recompute_epoch <= 0:
            raise ConfigError("scheduler.recompute_epoch_ms", f"must be positive, got {self.recompute_epoch}")
        if self.quantum <= 0:
            raise ConfigError("scheduler.quantum_bytes", f"must be positive, got {self.quantum}")
        if not 0 <= self.be_floor < 100:
            raise ConfigError("scheduler.be_floor", f"must be in [0, 100), got {self.be_floor}")
        return self

    @property
    def epoch_us(self) -> SimTime:
        return int(round(self.recompute_epoch * US_PER_SECOND))


def adaptive_weights(lengths: Mapping[TrafficClass, int],
                     priorities: Optional[Mapping[TrafficClass, int]] = None,
                     computed_at: SimTime = 0) -> WeightVector:
    """
    Length-adaptive weights: w_c proportional to ql_c(t) x P_c.

    Normalized to 100 over the nonempty queues; when every queue is empty
    the weights fall back to the priority ratio.
    """
    priorities = priorities or DEFAULT_PRIORITIES
    if any(v < 0 for v in lengths.values()):
        raise ValueError(f"Queue lengths must be nonnegative, got {dict(lengths)}")
    raw = {c: float(lengths.get(c, 0)) * priorities[c] for c in TrafficClass}
    if sum(raw.values()) <= 0:
        return priority_weights(priorities, computed_at)
    return _normalize(raw, computed_at)


def reserved_weights(adaptive: WeightVector, reserved: WeightVector,
                     computed_at: SimTime = 0) -> WeightVector:
    """
    Keep the reserved AF and EF shares and split the rest by ``adaptive``.

    ``reserved`` is the static vector of the admitted sessions. Its AF and
    EF parts act as floors; the remaining 100 - (AF + EF) points go to every
    class in proportion to its adaptive weight.
    """
    floor = {TrafficClass.AF: reserved.w_af, TrafficClass.EF: reserved.w_ef}
    spare = max(100.0 - sum(floor.values()), 0.0)
    scale = spare / adaptive.total if adaptive.total > 0 else 0.0
    return WeightVector.from_mapping(
        {c: floor.get(c, 0.0) + adaptive.get(c) * scale for c in TrafficClass}, computed_at
    )


def static_weights(af: ClassTrafficSpec, ef: ClassTrafficSpec, be_rate: float, tb: float,
                   k: float = 1.0, be_floor: float = 5.0, computed_at: SimTime = 0) -> WeightVector:
    """
    Weights computed from the admitted sessions.

    raw_AF = (idr_AF / TB) x 100 x N_AF x P_AF, raw_EF likewise, K scales
    AF only and BE receives the remainder. If AF and EF together exceed
    100 - be_floor they are scaled down proportionally to fit.

    ``be_rate`` is accepted for signature symmetry; best effort is elastic
    and takes whatever remains.
    """
    if tb <= 0:
        raise ConfigError("link.bottleneck_bps", f"must be positive, got {tb}")
    if k <= 0:
        raise ConfigError("scheduler.k_factor", f"must be positive, got {k}")

    raw_af = (af.idr / tb) * 100.0 * af.sessions * af.priority
    raw_ef = (ef.idr / tb) * 100.0 * ef.sessions * ef.priority
    assigned_af = k * raw_af

    ceiling = 100.0 - be_floor
    if assigned_af + raw_ef > ceiling:
        scale = ceiling / (assigned_af + raw_ef)
        logger.debug(
            f"Static weights oversubscribed (AF={assigned_af:.2f}, EF={raw_ef:.2f}); scaling by {scale:.4f}"
        )
        assigned_af *= scale
        raw_ef *= scale

    return WeightVector(
        w_af=assigned_af,
        w_ef=raw_ef,
        w_be=100.0 - assigned_af - raw_ef,
        w_nc=0.0,
        computed_at=computed_at,
    )


def fixed_weights(percents: Optional[Mapping[TrafficClass, float]] = None,
                  computed_at: SimTime = 0) -> WeightVector:
    """Transmit-rate percentages for AF, EF and NC; BE gets the remainder."""
    percents = DEFAULT_TRANSMIT_PERCENT if percents is None else percents
    fixed = {c: float(percents.get(c, 0.0)) for c in (TrafficClass.AF, TrafficClass.EF, TrafficClass.NC)}
    if any(v < 0 for v in fixed.values()):
        raise ConfigError("scheduler.transmit_percent", f"percentages must be >= 0, got {fixed}")
    if sum(fixed.values()) > 100.0:
        raise ConfigError("scheduler.transmit_percent", f"percentages sum to more than 100: {fixed}")
    fixed[TrafficClass.BE] = 100.0 - sum(fixed.values())
    return WeightVector.from_mapping(fixed, computed_at)


def measured_weights(rates: Mapping[TrafficClass, float], tb: float, k: float = 1.0,
                     priorities: Optional[Mapping[TrafficClass, int]] = None,
                     computed_at: SimTime = 0) -> WeightVector:
    """
    Weights recomputed from measured per-class input rates.

    raw_c = (rate_c / TB) x 100 x P_c with K applied to AF, normalized to
    100. Falls back to the priority ratio when nothing arrived.
    """
    if tb <= 0:
        raise ConfigError("link.bottleneck_bps", f"must be positive, got {tb}")
    priorities = priorities or DEFAULT_PRIORITIES
    raw = {c: max(float(rates.get(c, 0.0)), 0.0) / tb * 100.0 * priorities[c] for c in REALTIME_AND_BE}
    raw[TrafficClass.AF] *= k
    if sum(raw.values()) <= 0:
        return priority_weights(priorities, computed_at)
    return _normalize(raw, computed_at)


@dataclass
class DeficitState:
    """Byte credit per queue."""

    credits: Dict[TrafficClass, float] = field(default_factory=lambda: {c: 0.0 for c in TrafficClass})
    rounds: int = 0

    def reset(self, cls: TrafficClass):
        self.credits[cls] = 0.0

    def charge(self, cls: TrafficClass, size: int):
        self.credits[cls] -= size


def select_next(queues: Mapping[TrafficClass, ClassQueue], weights: WeightVector,
                deficit: DeficitState, quantum: int = 1500,
                priorities: Optional[Mapping[TrafficClass, int]] = None) -> Optional[TrafficClass]:
    """
    Pick the class whose head packet goes next, or None when all queues are empty.

    A queue is eligible when its head packet fits in its credit; eligible
    queues are taken in EF, AF, BE, NC order. When none is eligible the
    fewest whole rounds that make one eligible are credited at once, each
    round adding quantum x w_c / 100 to every nonempty queue. Nonempty
    queues whose weights sum to zero are served by priority share instead,
    so the link never idles while a packet waits.
    """
    nonempty = [c for c in TIE_BREAK_ORDER if c in queues and len(queues[c]) > 0]
    if not nonempty:
        return None

    def eligible() -> Optional[TrafficClass]:
        for c in nonempty:
            if queues[c].head.size <= deficit.credits[c]:
                return c
        return None

    chosen = eligible()
    if chosen is not None:
        return chosen

    shares = {c: weights.get(c) for c in nonempty}
    if sum(shares.values()) <= 0:
        priorities = priorities or DEFAULT_PRIORITIES
        shares = {c: float(max(priorities[c], 1)) for c in nonempty}
    increments = {c: quantum * w / 100.0 for c, w in shares.items()}

    while chosen is None:
        needed = [
            math.ceil((queues[c].head.size - deficit.credits[c]) / inc)
            for c, inc in increments.items() if inc > 0
        ]
        rounds = max(1, min(needed))
        for c, inc in increments.items():
            deficit.credits[c] += rounds * inc
        deficit.rounds += rounds
        chosen = eligible()
    return chosen


def fifo_select(queue: ClassQueue) -> Optional[Packet]:
    """Strict arrival-order service; None when the queue is empty."""
    if len(queue) == 0:
        return None
    return queue.dequeue()


class WrrScheduler:
    """
    Class-based weighted round robin at the edge router.

    Packets are classified by DSCP into the four class queues. Weights are
    refreshed every recompute epoch (adaptive and measured modes), and
    additionally at once in adaptive mode when a queue holding no weight
    receives its first packet.

    ``af`` and ``ef`` carry the input rates the weight formulas take: the
    AF session peak rate and the EF average. In adaptive mode with
    ``reserve_admitted`` the static shares of those sessions are a floor
    under the length-adaptive weights.
    """

    def __init__(self, plan: BufferPlan, config: SchedulerConfig, af: ClassTrafficSpec,
                 ef: ClassTrafficSpec, tb: float, be_rate: float = 0.0):
        self.plan = plan
        self.config = config
        self.af = af
        self.ef = ef
        self.tb = tb
        self.be_rate = be_rate
        self.queues: Dict[TrafficClass, ClassQueue] = {
            c: ClassQueue(cls=c, capacity=plan.capacity(c)) for c in TrafficClass
        }
        self.deficit = DeficitState()
        self.served_bytes: Dict[TrafficClass, int] = {c: 0 for c in TrafficClass}
        self.served_packets: Dict[TrafficClass, int] = {c: 0 for c in TrafficClass}
        self.arrived_bits: Dict[TrafficClass, int] = {c: 0 for c in TrafficClass}
        self.recompute_count = 0
        self._epoch_started: SimTime = 0
        self._sim: Optional[Simulator] = None
        self.reservation: Optional[WeightVector] = None
        if config.mode == "adaptive" and config.reserve_admitted:
            self.reservation = static_weights(af, ef, be_rate, tb, 1.0, config.be_floor)
        self.weights = self._initial_weights()
        logger.debug(f"{config.mode} scheduler starting with weights {self.weights}")

    def _initial_weights(self) -> WeightVector:
        mode = self.config.mode
        if mode == "static" or mode == "measured":
            return static_weights(self.af, self.ef, self.be_rate, self.tb, self.config.k_factor,
                                  self.config.be_floor)
        if mode == "fixed":
            return fixed_weights(self.config.transmit_percent)
        return self._reserve(priority_weights(self.config.priorities))

    def _reserve(self, weights: WeightVector) -> WeightVector:
        if self.reservation is None:
            return weights
        return reserved_weights(weights, self.reservation, weights.computed_at)

    def __len__(self) -> int:
        return sum(len(q) for q in self.queues.values())

    def packets(self) -> Iterator[Packet]:
        for q in self.queues.values():
            yield from q

    def start(self, sim: Simulator):
        """Schedule periodic weight recomputation for the modes that need it."""
        self._sim = sim
        if self.config.mode in ("adaptive", "measured"):
            sim.after(self.config.epoch_us, EventKind.WEIGHT_RECOMPUTE, self._on_epoch, self)

    def trace_label(self) -> str:
        return "wrr"

    def _on_epoch(self, event):
        self.recompute(event.fire_at)
        self._sim.after(self.config.epoch_us, EventKind.WEIGHT_RECOMPUTE, self._on_epoch, self)

    def recompute(self, now: SimTime) -> WeightVector:
        """Refresh the weights from the current queue state."""
        mode = self.config.mode
        if mode == "adaptive":
            if self.config.allocated_lengths:
                lengths = {c: (self.plan.capacity(c) if len(q) else 0) for c, q in self.queues.items()}
            else:
                lengths = {c: len(q) for c, q in self.queues.items()}
            self.weights = self._reserve(adaptive_weights(lengths, self.config.priorities, now))
        elif mode == "measured":
            elapsed = max(now - self._epoch_started, 1) / US_PER_SECOND
            rates = {c: bits / elapsed for c, bits in self.arrived_bits.items()}
            self.weights = measured_weights(rates, self.tb, self.config.k_factor, self.config.priorities, now)
            self.arrived_bits = {c: 0 for c in TrafficClass}
            self._epoch_started = now
        else:
            return self.weights
        self.recompute_count += 1
        logger.debug(f"t={now}us weights {self.weights}")
        return self.weights

    def offer(self, packet: Packet, now: SimTime) -> EnqueueResult:
        cls = classify(packet.dscp)
        queue = self.queues[cls]
        was_empty = len(queue) == 0
        self.arrived_bits[cls] += packet.bits
        result = queue.enqueue(packet, now)
        if (result is EnqueueResult.ACCEPTED and was_empty and self.config.mode == "adaptive"
                and self.weights.get(cls) <= 0):
            self.recompute(now)
        return result

    def next_packet(self, now: SimTime) -> Optional[Packet]:
        cls = select_next(self.queues, self.weights, self.deficit, self.config.quantum,
                          self.config.priorities)
        if cls is None:
            return None
        queue = self.queues[cls]
        packet = queue.dequeue()
        self.deficit.charge(cls, packet.size)
        if len(queue) == 0:
            self.deficit.reset(cls)
        self.served_bytes[cls] += packet.size
        self.served_packets[cls] += 1
        return packet

    def high_water(self) -> Dict[TrafficClass, int]:
        return {c: q.high_water for c, q in self.queues.items()}


class FifoScheduler:
    """Single class-blind FIFO of ``capacity`` slots with tail drop."""

    def __init__(self, capacity: int):
        self.queue = ClassQueue(cls=None, capacity=capacity)
        self.served_packets = 0

    def __len__(self) -> int:
        return len(self.queue)

    def packets(self) -> Iterator[Packet]:
        return iter(self.queue)

    def start(self, sim: Simulator):
        pass

    def offer(self, packet: Packet, now: SimTime) -> EnqueueResult:
        return self.queue.enqueue(packet, now)

    def next_packet(self, now: SimTime) -> Optional[Packet]:
        packet = fifo_select(self.queue)
        if packet is not None:
            self.served_packets += 1
        return packet

    @property
    def high_water_mark(self) -> int:
        return self.queue.high_water
