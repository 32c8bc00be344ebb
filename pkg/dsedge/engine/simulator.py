"""
Discrete-Event Simulator for dsedge
===================================

Virtual clock in integer microseconds and a stable, cancellable event queue.
"""

import hashlib
import heapq
import logging
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Any, Callable, List, Optional, Tuple

logger = logging.getLogger(__name__)

# Virtual time, integer microseconds since simulation start.
SimTime = int

US_PER_SECOND = 1_000_000


def seconds_to_us(seconds: float) -> SimTime:
    """Convert seconds to the nearest whole microsecond."""
    return int(round(seconds * US_PER_SECOND))


class SchedulingError(RuntimeError):
    """Raised when the engine contract is violated (e.g. scheduling in the past)."""


class EventKind(IntEnum):
    """Kinds of events processed by the engine."""

    PACKET_ARRIVAL = 0
    TRANSMISSION_COMPLETE = 1
    WEIGHT_RECOMPUTE = 2
    MEASUREMENT_SAMPLE = 3
    SOURCE_TICK = 4


Handler = Callable[["Event"], None]


@dataclass
class Event:
    """A scheduled occurrence and the callable that handles it."""

    fire_at: SimTime
    kind: EventKind
    payload: Any = None
    handler: Optional[Handler] = None

    def trace_label(self) -> str:
        label = getattr(self.payload, "trace_label", None)
        if callable(label):
            return str(label())
        return "" if label is None else str(label)


@dataclass
class EventHandle:
    """Returned by ``schedule``; lets the caller cancel the event."""

    event: Event
    seq: int
    cancelled: bool = False
    fired: bool = False
    _sim: Optional["Simulator"] = field(default=None, repr=False, compare=False)

    def cancel(self) -> bool:
        """Cancel the event if it has not fired yet. Returns True if cancelled."""
        if self._sim is None:
            return False
        return self._sim.cancel(self)


class Simulator:
    """
    Single-threaded discrete-event engine.

    Events with equal ``fire_at`` run in insertion order. Not shareable
    across threads; independent instances share no state.
    """

    def __init__(self, record_trace: bool = False):
        self._now: SimTime = 0
        self._queue: List[Tuple[SimTime, int, EventHandle]] = []
        self._seq = 0

        self.scheduled_count = 0
        self.cancelled_count = 0
        self.processed_count = 0
        self._cancelled_pending = 0

        self.record_trace = record_trace
        self.trace: List[str] = []

    @property
    def now(self) -> SimTime:
        """Current virtual time in microseconds."""
        return self._now

    @property
    def pending(self) -> int:
        """Events still queued and not cancelled."""
        return len(self._queue) - self._cancelled_pending

    def schedule(self, event: Event) -> EventHandle:
        """
        Queue an event.

        Raises:
            SchedulingError: if ``event.fire_at`` is before the current clock
        """
        if event.fire_at < self._now:
            raise SchedulingError(
                f"Cannot schedule {event.kind.name} at t={event.fire_at}us, "
                f"clock is already at t={self._now}us"
            )

        handle = EventHandle(event=event, seq=self._seq, _sim=self)
        heapq.heappush(self._queue, (event.fire_at, self._seq, handle))
        self._seq += 1
        self.scheduled_count += 1
        return handle

    def at(self, fire_at: SimTime, kind: EventKind, handler: Optional[Handler] = None,
           payload: Any = None) -> EventHandle:
        """Schedule an event at an absolute time."""
        return self.schedule(Event(fire_at=fire_at, kind=kind, payload=payload, handler=handler))

    def after(self, delay: SimTime, kind: EventKind, handler: Optional[Handler] = None,
              payload: Any = None) -> EventHandle:
        """Schedule an event ``delay`` microseconds from now."""
        return self.at(self._now + delay, kind, handler, payload)

    def cancel(self, handle: EventHandle) -> bool:
        """Cancel a queued event. Already fired or cancelled events are left alone."""
        if handle.cancelled or handle.fired:
            return False
        handle.cancelled = True
        self.cancelled_count += 1
        self._cancelled_pending += 1
        return True

    def run_until(self, end: SimTime) -> int:
        """
        Process every event with ``fire_at <= end`` exactly once.

        The clock is left at ``end``; later events stay queued.

        Returns:
            Number of events processed by this call
        """
        if end < self._now:
            raise SchedulingError(f"Cannot run backwards to t={end}us from t={self._now}us")

        processed = 0
        while self._queue and self._queue[0][0] <= end:
            fire_at, _, handle = heapq.heappop(self._queue)
            if handle.cancelled:
                self._cancelled_pending -= 1
                continue

            self._now = fire_at
            handle.fired = True
            event = handle.event

            if self.record_trace:
                self.trace.append(f"{fire_at}:{event.kind.name}:{event.trace_label()}")

            if event.handler is None:
                raise SchedulingError(f"No handler for {event.kind.name} at t={fire_at}us")
            event.handler(event)

            processed += 1
            self.processed_count += 1

        self._now = end
        logger.debug(f"Ran to t={end}us, processed {processed} events, {self.pending} pending")
        return processed

    def trace_digest(self) -> str:
        """SHA-256 over the recorded trace."""
        digest = hashlib.sha256()
        for line in self.trace:
            digest.update(line.encode("utf-8"))
            digest.update(b"\n")
        return digest.hexdigest()
