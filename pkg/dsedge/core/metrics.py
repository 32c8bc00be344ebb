"""
Loss and Delay Accounting for dsedge
====================================

Per (class, domain) ledgers fed by end-to-end observations, sweep points,
CSV export/import and requirement checks.
"""

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Tuple, Union

from ..utils.file_utils import write_text
from .diffserv import Packet, REPORT_ORDER, TrafficClass

logger = logging.getLogger(__name__)

REPORTED_CLASSES = (TrafficClass.AF, TrafficClass.EF, TrafficClass.BE)

CSV_COLUMNS = [
    "scenario_id",
    "seed",
    "domains",
    "tb_bps",
    "k_factor",
    "total_offered_bps",
    "normalized_load",
    "class",
    "domain",
    "offered_pkts",
    "dropped_pkts",
    "delivered_pkts",
    "loss_pct",
    "mean_delay_ms",
    "max_delay_ms",
]

LedgerKey = Tuple[TrafficClass, int]


class ConservationError(RuntimeError):
    """Offered packets do not equal delivered + dropped + still in the network."""


@dataclass
class ClassStats:
    offered_packets: int = 0
    offered_bytes: int = 0
    dropped_packets: int = 0
    delivered_packets: int = 0
    delay_sum_us: int = 0
    delay_max_us: int = 0

    @property
    def residual(self) -> int:
        """Packets offered but neither delivered nor dropped."""
        return self.offered_packets - self.delivered_packets - self.dropped_packets

    def merge(self, other: "ClassStats"):
        self.offered_packets += other.offered_packets
        self.offered_bytes += other.offered_bytes
        self.dropped_packets += other.dropped_packets
        self.delivered_packets += other.delivered_packets
        self.delay_sum_us += other.delay_sum_us
        self.delay_max_us = max(self.delay_max_us, other.delay_max_us)


@dataclass
class MeasurementSample:
    at: int
    in_system: int
    shared_backlog_bytes: int = 0
    queue_high_water: Dict[str, int] = field(default_factory=dict)


class MetricsLedger:
    """
    Counters and delay accumulators per (class, domain).

    Only packets flagged ``measured`` (created after the warm-up) are
    counted, so offered, dropped and delivered always refer to the same
    population.
    """

    def __init__(self, domains: int = 1, seed: Optional[int] = None, duration_us: int = 0,
                 config_digest: str = ""):
        self.domains = domains
        self.seed = seed
        self.duration_us = duration_us
        self.config_digest = config_digest
        self.stats: Dict[LedgerKey, ClassStats] = {
            (c, d): ClassStats() for d in range(domains) for c in REPORTED_CLASSES
        }
        self.samples: List[MeasurementSample] = []
        self.shared_backlog_max_bytes = 0

    def get(self, cls: TrafficClass, domain: int = 0) -> ClassStats:
        key = (cls, domain)
        if key not in self.stats:
            self.stats[key] = ClassStats()
        return self.stats[key]

    def keys(self) -> List[LedgerKey]:
        order = {c: i for i, c in enumerate(REPORT_ORDER)}
        return sorted(self.stats, key=lambda k: (k[1], order[k[0]]))

    def record_offered(self, packet: Packet):
        if not packet.measured:
            return
        s = self.get(packet.traffic_class, packet.domain)
        s.offered_packets += 1
        s.offered_bytes += packet.size

    def record_dropped(self, packet: Packet):
        if not packet.measured:
            return
        s = self.get(packet.traffic_class, packet.domain)
        s.dropped_packets += 1

    def record_delivered(self, packet: Packet):
        if not packet.measured:
            return
        delay = packet.delivered_at - packet.created_at
        s = self.get(packet.traffic_class, packet.domain)
        s.delivered_packets += 1
        s.delay_sum_us += delay
        if delay > s.delay_max_us:
            s.delay_max_us = delay

    def residual(self, cls: TrafficClass, domain: int = 0) -> int:
        return self.get(cls, domain).residual

    def check_conservation(self, in_system: Mapping[LedgerKey, int], at: int = 0):
        """
        Compare each ledger's residual with the packets actually held.

        Raises:
            ConservationError: on the first mismatching (class, domain)
        """
        keys = set(self.stats) | set(in_system)
        for key in sorted(keys, key=lambda k: (k[1], k[0].value)):
            held = in_system.get(key, 0)
            residual = self.stats[key].residual if key in self.stats else 0
            if held != residual:
                cls, domain = key
                raise ConservationError(
                    f"t={at}us {cls.value}/domain {domain}: ledger residual {residual} "
                    f"but {held} packets in the network"
                )

    def merge(self, other: "MetricsLedger") -> "MetricsLedger":
        """Pool another run's counts into this ledger."""
        for key, s in other.stats.items():
            self.get(*key).merge(s)
        self.duration_us += other.duration_us
        self.shared_backlog_max_bytes = max(self.shared_backlog_max_bytes, other.shared_backlog_max_bytes)
        self.samples.extend(other.samples)
        return self


def loss_percent(ledger: MetricsLedger, cls: TrafficClass, domain: int = 0) -> Optional[float]:
    """100 x dropped / offered, or None when nothing was offered."""
    s = ledger.get(cls, domain)
    if s.offered_packets == 0:
        return None
    return 100.0 * s.dropped_packets / s.offered_packets


def mean_delay_ms(ledger: MetricsLedger, cls: TrafficClass, domain: int = 0) -> Optional[float]:
    """Mean end-to-end delay in ms, or None without deliveries."""
    s = ledger.get(cls, domain)
    if s.delivered_packets == 0:
        return None
    return s.delay_sum_us / s.delivered_packets / 1000.0


def max_delay_ms(ledger: MetricsLedger, cls: TrafficClass, domain: int = 0) -> Optional[float]:
    s = ledger.get(cls, domain)
    if s.delivered_packets == 0:
        return None
    return s.delay_max_us / 1000.0


def normalized_load(offered: float, tb: float) -> float:
    """Offered bit-rate over link bandwidth."""
    if tb <= 0:
        raise ValueError(f"Link bandwidth must be positive, got {tb}")
    return offered / tb


def round_sig(value: Optional[float], digits: int = 6) -> Optional[float]:
    """Round to ``digits`` significant digits, as written to CSV."""
    if value is None:
        return None
    return float(f"{value:.{digits}g}")


def _fmt(value: Optional[float]) -> str:
    if value is None:
        return ""
    return f"{value:.6g}"


@dataclass(frozen=True)
class ClassResult:
    """End-to-end figures of one (class, domain) at one sweep point."""

    cls: TrafficClass
    domain: int
    offered_pkts: int
    dropped_pkts: int
    delivered_pkts: int
    loss_pct: Optional[float] = None
    mean_delay_ms: Optional[float] = None
    max_delay_ms: Optional[float] = None

    def __post_init__(self):
        for name in ("loss_pct", "mean_delay_ms", "max_delay_ms"):
            object.__setattr__(self, name, round_sig(getattr(self, name)))
        if self.loss_pct is not None and not 0.0 <= self.loss_pct <= 100.0:
            raise ValueError(f"loss_pct out of range: {self.loss_pct}")


@dataclass(frozen=True)
class SweepPoint:
    """One simulated operating point."""

    scenario_id: str
    seed: int
    domains: int
    tb_bps: float
    k_factor: float
    total_offered_bps: float
    normalized_load: float
    results: Tuple[ClassResult, ...] = ()

    def __post_init__(self):
        for name in ("tb_bps", "k_factor", "total_offered_bps", "normalized_load"):
            object.__setattr__(self, name, round_sig(float(getattr(self, name))))
        object.__setattr__(self, "results", tuple(self.results))

    @classmethod
    def from_ledger(cls, ledger: MetricsLedger, scenario_id: str, seed: int, tb_bps: float,
                    k_factor: float, total_offered_bps: float) -> "SweepPoint":
        results = []
        for c, d in ledger.keys():
            s = ledger.get(c, d)
            if c not in REPORTED_CLASSES and s.offered_packets == 0:
                continue
            results.append(ClassResult(
                cls=c,
                domain=d,
                offered_pkts=s.offered_packets,
                dropped_pkts=s.dropped_packets,
                delivered_pkts=s.delivered_packets,
                loss_pct=loss_percent(ledger, c, d),
                mean_delay_ms=mean_delay_ms(ledger, c, d),
                max_delay_ms=max_delay_ms(ledger, c, d),
            ))
        return cls(
            scenario_id=scenario_id,
            seed=seed,
            domains=ledger.domains,
            tb_bps=tb_bps,
            k_factor=k_factor,
            total_offered_bps=total_offered_bps,
            normalized_load=normalized_load(total_offered_bps, tb_bps),
            results=tuple(results),
        )

    def result(self, cls: TrafficClass, domain: int = 0) -> ClassResult:
        for r in self.results:
            if r.cls == cls and r.domain == domain:
                return r
        raise KeyError(f"No result for {cls.value}/domain {domain}")

    def loss(self, cls: TrafficClass, domain: int = 0) -> Optional[float]:
        return self.result(cls, domain).loss_pct

    def mean_delay(self, cls: TrafficClass, domain: int = 0) -> Optional[float]:
        return self.result(cls, domain).mean_delay_ms

    def pooled(self, cls: TrafficClass) -> ClassResult:
        """Counts of ``cls`` summed over domains."""
        rows = [r for r in self.results if r.cls == cls]
        offered = sum(r.offered_pkts for r in rows)
        dropped = sum(r.dropped_pkts for r in rows)
        delivered = sum(r.delivered_pkts for r in rows)
        return ClassResult(cls=cls, domain=-1, offered_pkts=offered, dropped_pkts=dropped,
                           delivered_pkts=delivered,
                           loss_pct=100.0 * dropped / offered if offered else None)

    def csv_rows(self) -> List[Dict[str, str]]:
        rows = []
        for r in self.results:
            rows.append({
                "scenario_id": self.scenario_id,
                "seed": str(self.seed),
                "domains": str(self.domains),
                "tb_bps": _fmt(self.tb_bps),
                "k_factor": _fmt(self.k_factor),
                "total_offered_bps": _fmt(self.total_offered_bps),
                "normalized_load": _fmt(self.normalized_load),
                "class": r.cls.value,
                "domain": str(r.domain),
                "offered_pkts": str(r.offered_pkts),
                "dropped_pkts": str(r.dropped_pkts),
                "delivered_pkts": str(r.delivered_pkts),
                "loss_pct": _fmt(r.loss_pct),
                "mean_delay_ms": _fmt(r.mean_delay_ms),
                "max_delay_ms": _fmt(r.max_delay_ms),
            })
        return rows


def sort_points(points: Iterable[SweepPoint]) -> List[SweepPoint]:
    """Order by offered load, then K; ties keep their input order."""
    return sorted(points, key=lambda p: (p.total_offered_bps, p.k_factor))


def format_csv(points: Iterable[SweepPoint]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for point in sort_points(points):
        writer.writerows(point.csv_rows())
    return buffer.getvalue()


def export_csv(points: Iterable[SweepPoint], path: Union[str, Path]) -> Path:
    """
    Write sweep points to ``path``: a header plus one row per (class, domain).

    Raises:
        OSError: the file cannot be written; the message names the path
    """
    text = format_csv(points)
    path = write_text(path, text)
    logger.debug(f"{text.count(chr(10)) - 1} rows in {path}")
    return path


def _opt(value: str) -> Optional[float]:
    return float(value) if value != "" else None


def parse_csv(text: str) -> List[SweepPoint]:
    """Rebuild SweepPoints from CSV text written by ``format_csv``."""
    points: List[SweepPoint] = []
    header_key = None
    rows: List[ClassResult] = []
    meta: Dict[str, str] = {}

    def flush():
        if header_key is not None:
            points.append(SweepPoint(
                scenario_id=meta["scenario_id"],
                seed=int(meta["seed"]),
                domains=int(meta["domains"]),
                tb_bps=float(meta["tb_bps"]),
                k_factor=float(meta["k_factor"]),
                total_offered_bps=float(meta["total_offered_bps"]),
                normalized_load=float(meta["normalized_load"]),
                results=tuple(rows),
            ))

    for row in csv.DictReader(io.StringIO(text)):
        key = tuple(row[c] for c in CSV_COLUMNS[:7])
        if key != header_key:
            flush()
            header_key, rows, meta = key, [], dict(row)
        rows.append(ClassResult(
            cls=TrafficClass(row["class"]),
            domain=int(row["domain"]),
            offered_pkts=int(row["offered_pkts"]),
            dropped_pkts=int(row["dropped_pkts"]),
            delivered_pkts=int(row["delivered_pkts"]),
            loss_pct=_opt(row["loss_pct"]),
            mean_delay_ms=_opt(row["mean_delay_ms"]),
            max_delay_ms=_opt(row["max_delay_ms"]),
        ))
    flush()
    return points


def read_csv(path: Union[str, Path]) -> List[SweepPoint]:
    with open(path, newline="", encoding="utf-8") as f:
        return parse_csv(f.read())


@dataclass(frozen=True)
class Verdict:
    cls: TrafficClass
    domain: int
    metric: str
    value: Optional[float]
    limit: float

    @property
    def passed(self) -> bool:
        return self.value is None or self.value <= self.limit

    def __str__(self) -> str:
        shown = "-" if self.value is None else f"{self.value:.3g}"
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.cls.value}/d{self.domain} {self.metric}={shown} (limit {self.limit:g})"


def check_requirements(point: SweepPoint, max_delay: Mapping[TrafficClass, float],
                       max_loss: Mapping[TrafficClass, float]) -> List[Verdict]:
    """Compare each (class, domain) with its mean-delay and loss limits."""
    verdicts = []
    for r in point.results:
        if r.cls in max_delay:
            verdicts.append(Verdict(r.cls, r.domain, "mean_delay_ms", r.mean_delay_ms, max_delay[r.cls]))
        if r.cls in max_loss:
            verdicts.append(Verdict(r.cls, r.domain, "loss_pct", r.loss_pct, max_loss[r.cls]))
    return verdicts
