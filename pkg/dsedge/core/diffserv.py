"""
DiffServ Edge Functions for dsedge
==================================

Packet marking, DSCP classification into the four logical queues,
tail-drop class queues and the buffer planner.
"""

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from fractions import Fraction
from typing import TYPE_CHECKING, Deque, Dict, Iterator, Mapping, Optional, Union

from ..config.errors import ConfigError

if TYPE_CHECKING:
    from .traffic import ClassTrafficSpec

logger = logging.getLogger(__name__)


class TrafficClass(str, Enum):
    """Forwarding classes, one logical queue each."""

    AF = "AF"
    EF = "EF"
    BE = "BE"
    NC = "NC"


# Order used whenever several classes are equally entitled to service.
TIE_BREAK_ORDER = (TrafficClass.EF, TrafficClass.AF, TrafficClass.BE, TrafficClass.NC)

# Order used for reports.
REPORT_ORDER = (TrafficClass.AF, TrafficClass.EF, TrafficClass.BE, TrafficClass.NC)


class Dscp(IntEnum):
    """Named DSCP code points."""

    BE = 0
    CS1 = 8
    AF11 = 10
    AF12 = 12
    AF13 = 14
    CS2 = 16
    AF21 = 18
    AF22 = 20
    AF23 = 22
    CS3 = 24
    AF31 = 26
    AF32 = 28
    AF33 = 30
    CS4 = 32
    AF41 = 34
    AF42 = 36
    AF43 = 38
    EF = 46
    NC = 48


# Class selectors 1-4 and their AFx1-AFx3 code points.
AF_CODE_POINTS = frozenset(
    int(d) for d in Dscp if d.name.startswith("AF") or d.name in ("CS1", "CS2", "CS3", "CS4")
)

DEFAULT_MARKING: Dict[str, int] = {"video": int(Dscp.AF12), "voice": int(Dscp.EF)}


class InfeasiblePlanError(RuntimeError):
    """The admitted real-time sessions do not fit in the router buffer."""


@dataclass
class Packet:
    """A simulated datagram."""

    uid: str
    kind: str
    size: int
    created_at: int
    traffic_class: TrafficClass
    flow: str = ""
    domain: int = 0
    dscp: int = int(Dscp.BE)
    enqueued_at: Optional[int] = None
    delivered_at: Optional[int] = None
    measured: bool = True

    def __post_init__(self):
        if self.size <= 0:
            raise ValueError(f"Packet size must be positive, got {self.size}")

    def trace_label(self) -> str:
        return self.uid

    @property
    def bits(self) -> int:
        return self.size * 8


MarkingPolicy = Mapping[str, int]


def mark(packet: Packet, policy: Optional[MarkingPolicy] = None) -> Packet:
    """
    Stamp the packet's DSCP from its source kind.

    Kinds missing from the policy keep their current code point
    (0 unless something marked it before).
    """
    policy = DEFAULT_MARKING if policy is None else policy
    code_point = policy.get(packet.kind)
    if code_point is not None:
        packet.dscp = int(code_point)
    return packet


def classify(dscp: Union[int, Dscp]) -> TrafficClass:
    """Map a 6-bit code point to its queue; unassigned values go to BE."""
    value = int(dscp)
    if not 0 <= value <= 63:
        raise ValueError(f"DSCP must be a 6-bit value, got {value}")
    if value == Dscp.EF:
        return TrafficClass.EF
    if value == Dscp.NC:
        return TrafficClass.NC
    if value in AF_CODE_POINTS:
        return TrafficClass.AF
    return TrafficClass.BE


@dataclass(frozen=True)
class BufferPlan:
    """Queue capacities in packet slots."""

    total_slots: int
    ql_af: int
    ql_ef: int
    ql_be: int
    ql_nc: int

    def __post_init__(self):
        if min(self.ql_af, self.ql_ef, self.ql_be, self.ql_nc) < 0:
            raise ValueError(f"Negative queue length in {self}")
        if self.ql_af + self.ql_ef + self.ql_be > self.total_slots - self.ql_nc:
            raise ValueError(f"Queue lengths exceed the buffer in {self}")

    def capacity(self, cls: TrafficClass) -> int:
        return {
            TrafficClass.AF: self.ql_af,
            TrafficClass.EF: self.ql_ef,
            TrafficClass.BE: self.ql_be,
            TrafficClass.NC: self.ql_nc,
        }[cls]


def _exact(x: Union[int, float]) -> Fraction:
    # Decimal literal semantics: 0.1 means 1/10.
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(repr(float(x)))


def _slots(spec: "ClassTrafficSpec") -> int:
    need = _exact(spec.idr) * _exact(spec.dly) * spec.sessions / (spec.pktsz * 8)
    return math.ceil(need)


def max_sessions(spec: "ClassTrafficSpec", available_slots: int) -> Optional[int]:
    """
    Largest session count whose allocation fits in ``available_slots``.

    Returns None when a session needs no buffer at all.
    """
    per_session = _exact(spec.idr) * _exact(spec.dly) / (spec.pktsz * 8)
    if per_session == 0:
        return None
    return max(0, math.floor(Fraction(max(available_slots, 0)) / per_session))


def plan_buffers(af: "ClassTrafficSpec", ef: "ClassTrafficSpec", total_slots: int,
                 nc_reserve: int = 1) -> BufferPlan:
    """
    Size the class queues from the admitted real-time sessions.

    ql_AF = ceil(idr_AF * dly_AF * N_AF / (pktsz_AF * 8)), ql_EF likewise,
    and BE gets what remains after the NC reserve.

    Raises:
        ConfigError: total_slots does not exceed nc_reserve
        InfeasiblePlanError: AF and EF need more slots than are available
    """
    if nc_reserve < 0:
        raise ConfigError("buffer.nc_reserve", f"must be >= 0, got {nc_reserve}")
    if total_slots <= nc_reserve:
        raise ConfigError(
            "buffer.total_slots",
            f"must exceed buffer.nc_reserve ({nc_reserve}), got {total_slots}",
        )

    available = total_slots - nc_reserve
    ql_af = _slots(af)
    ql_ef = _slots(ef)

    if ql_af + ql_ef > available:
        af_room = max_sessions(af, available - ql_ef)
        ef_room = max_sessions(ef, available - ql_af)
        raise InfeasiblePlanError(
            f"AF needs {ql_af} and EF needs {ql_ef} slots but only {available} are available "
            f"(BUFF={total_slots}, NC reserve={nc_reserve}); with the current EF load at most "
            f"{af_room} AF sessions fit, with the current AF load at most {ef_room} EF sessions fit"
        )

    plan = BufferPlan(
        total_slots=total_slots,
        ql_af=ql_af,
        ql_ef=ql_ef,
        ql_be=available - ql_af - ql_ef,
        ql_nc=nc_reserve,
    )
    logger.debug(f"Buffer plan: {plan}")
    return plan


def plan_buffers_percent(total_slots: int, percents: Mapping[TrafficClass, float]) -> BufferPlan:
    """
    Size queues from buffer-size percentages; BE takes the remainder.

    Mirrors a router scheduler map where every class but best effort is
    given a percentage and best effort gets "remainder".
    """
    fixed = {c: float(percents.get(c, 0.0)) for c in (TrafficClass.AF, TrafficClass.EF, TrafficClass.NC)}
    if any(p < 0 for p in fixed.values()):
        raise ConfigError("buffer.percent", f"percentages must be >= 0, got {fixed}")
    if sum(fixed.values()) > 100.0:
        raise ConfigError("buffer.percent", f"percentages sum to more than 100: {fixed}")

    slots = {c: int(math.floor(total_slots * p / 100.0)) for c, p in fixed.items()}
    ql_be = total_slots - sum(slots.values())
    return BufferPlan(
        total_slots=total_slots,
        ql_af=slots[TrafficClass.AF],
        ql_ef=slots[TrafficClass.EF],
        ql_be=ql_be,
        ql_nc=slots[TrafficClass.NC],
    )


class EnqueueResult(str, Enum):
    ACCEPTED = "accepted"
    DROPPED = "dropped"


@dataclass
class ClassQueue:
    """Bounded FIFO in packet slots with tail drop."""

    cls: Optional[TrafficClass]
    capacity: int
    packets: Deque[Packet] = field(default_factory=deque)
    high_water: int = 0

    def __len__(self) -> int:
        return len(self.packets)

    def __iter__(self) -> Iterator[Packet]:
        return iter(self.packets)

    @property
    def head(self) -> Optional[Packet]:
        return self.packets[0] if self.packets else None

    @property
    def byte_length(self) -> int:
        return sum(p.size for p in self.packets)

    def enqueue(self, packet: Packet, now: int) -> EnqueueResult:
        """Append if there is room, otherwise drop the arrival."""
        if len(self.packets) >= self.capacity:
            return EnqueueResult.DROPPED
        packet.enqueued_at = now
        self.packets.append(packet)
        if len(self.packets) > self.high_water:
            self.high_water = len(self.packets)
        return EnqueueResult.ACCEPTED

    def dequeue(self) -> Packet:
        return self.packets.popleft()


def enqueue(queue: ClassQueue, packet: Packet, now: int) -> EnqueueResult:
    """Tail-drop enqueue into ``queue``."""
    return queue.enqueue(packet, now)
