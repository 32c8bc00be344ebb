"""
Tests for Ports and Topologies
==============================
"""

import pytest

from dsedge.config.errors import ConfigError
from dsedge.config.settings import ScenarioConfig
from dsedge.core.diffserv import Packet, TrafficClass, plan_buffers
from dsedge.core.metrics import MetricsLedger
from dsedge.core.network import (
    EdgeSwitch,
    LinkConfig,
    Port,
    Sink,
    UnboundedFifo,
    build_multi_domain,
    build_single_domain,
    build_topology,
    check_bottleneck,
    packets_in_system,
    transmit,
)
from dsedge.core.scheduler import FifoScheduler, WrrScheduler
from dsedge.engine.simulator import Simulator


def packet(uid="p", size=1000, kind="data", cls=TrafficClass.BE, created_at=0):
    return Packet(uid=uid, kind=kind, size=size, created_at=created_at, traffic_class=cls)


def short(**overrides):
    base = {"run.duration_s": 4, "run.warmup_s": 0.5, "run.replications": 1, "run.seed": 5}
    base.update(overrides)
    return ScenarioConfig().with_overrides(base)


def run_topology(config, sample_ms=500):
    sim = Simulator()
    ledger = MetricsLedger(domains=config.domains, seed=config.run.seed)
    topo = build_topology(config, sim=sim, ledger=ledger)
    topo.start(sample_interval=sample_ms * 1000)
    sim.run_until(int(config.run.duration_s * 1_000_000))
    topo.sample(sim.now)
    return topo


class TestLink:
    """Test suite for links."""

    def test_transmit(self):
        link = LinkConfig(8_000_000, prop_delay=250)
        assert transmit(packet(size=1000), link, now=100) == 100 + 1000 + 250

    def test_invalid_rate(self):
        with pytest.raises(ConfigError):
            LinkConfig(0)

    @pytest.mark.parametrize("rate", [357_999, 34_000_001, 100_000_000])
    def test_bottleneck_range(self, rate):
        with pytest.raises(ConfigError) as exc:
            check_bottleneck(rate)
        assert exc.value.key == "link.bottleneck_bps"

    def test_bottleneck_limits_inclusive(self):
        check_bottleneck(358_000)
        check_bottleneck(34_000_000)


class TestPort:
    """Test suite for store-and-forward ports."""

    def test_back_to_back_service(self, sim):
        """Packets leave one serialization time apart; the port never idles."""
        got = []
        port = Port(sim, "p", LinkConfig(8_000_000), UnboundedFifo(), lambda p: got.append((sim.now, p.uid)))
        port.receive(packet("a"))
        port.receive(packet("b"))
        sim.run_until(10_000)
        assert got == [(1000, "a"), (2000, "b")]
        assert port.sent_packets == 2
        assert port.backlog_max_bytes == 1000

    def test_propagation_delay(self, sim):
        got = []
        port = Port(sim, "p", LinkConfig(8_000_000, prop_delay=500), UnboundedFifo(),
                    lambda p: got.append(sim.now))
        port.receive(packet("a"))
        port.receive(packet("b"))
        sim.run_until(2_000)
        assert got == [1500]
        assert [p.uid for p in port.held()] == ["b"]
        sim.run_until(10_000)
        assert got == [1500, 2500]

    def test_drops_reported(self, sim):
        dropped = []
        port = Port(sim, "p", LinkConfig(8_000_000), FifoScheduler(1), lambda p: None, dropped.append)
        for uid in "abc":
            port.receive(packet(uid))
        # "a" is on the wire, "b" fills the single slot
        assert [p.uid for p in dropped] == ["c"]
        assert port.dropped_packets == 1

    def test_held_counts_queue_and_wire(self, sim):
        port = Port(sim, "p", LinkConfig(8_000_000), UnboundedFifo(), lambda p: None)
        for uid in "abc":
            port.receive(packet(uid))
        assert sorted(p.uid for p in port.held()) == ["a", "b", "c"]


class TestEdgeDevices:
    """Test suite for the switch and sink."""

    def test_switch_marks_then_forwards(self, sim):
        got = []
        switch = EdgeSwitch({"video": 12, "voice": 46, "data": 0})
        switch.uplink = Port(sim, "up", LinkConfig(1e9), UnboundedFifo(), got.append)
        switch.receive(packet(kind="voice", cls=TrafficClass.EF))
        sim.run_until(1_000)
        assert got[0].dscp == 46
        assert switch.marked == 1

    def test_sink_adds_pass_through_serialization(self, sim, ledger):
        sink = Sink(ledger, [LinkConfig(1e9), LinkConfig(1e8)])
        sink.sim = sim
        p = packet()
        sink.receive(p)
        assert p.delivered_at == 8 + 80
        assert ledger.get(TrafficClass.BE).delivered_packets == 1


class TestSingleDomain:
    """Test suite for the single-domain topology."""

    def test_structure(self):
        topo = build_single_domain(short())
        stack = topo.domains[0]
        assert len(stack.sources.video) == 3
        assert len(stack.sources.voice) == 3
        assert len(stack.sources.data) == 1
        assert isinstance(stack.router.scheduler, WrrScheduler)
        assert stack.router.egress.link.rate == 2_100_000
        assert topo.shared is None

    def test_fifo_mode(self):
        topo = build_single_domain(short(**{"scheduler.mode": "fifo"}))
        scheduler = topo.domains[0].router.scheduler
        assert isinstance(scheduler, FifoScheduler)
        assert scheduler.queue.capacity == 26

    def test_static_weights_from_peak_rate(self):
        """The router weighs AF by the 840 kbit/s session peak, not the 384 kbit/s average."""
        topo = build_single_domain(short(**{"scheduler.mode": "static", "scheduler.k_factor": 0.4}))
        weights = topo.domains[0].router.scheduler.weights
        assert weights.w_af == pytest.approx(96.0 * 95.0 / (96.0 + 27.428571), rel=1e-6)
        assert weights.w_be == pytest.approx(5.0)

    def test_buffer_plan_from_average_rate(self):
        """Queue lengths still come from the average rate."""
        config = short()
        plan = build_single_domain(config).domains[0].router.scheduler.plan
        assert plan == plan_buffers(config.af_spec(), config.ef_spec(), config.total_slots(), config.buffer.nc_reserve)

    def test_be_disabled_at_zero_rate(self):
        topo = build_single_domain(short(**{"traffic.be.rate_bps": 0}))
        assert topo.domains[0].sources.data == []

    def test_invalid_bottleneck(self):
        with pytest.raises(ConfigError):
            build_single_domain(short(**{"link.bottleneck_bps": 100_000}))

    @pytest.mark.parametrize("mode", ["adaptive", "fifo", "static", "fixed", "measured"])
    def test_conservation_holds(self, mode):
        """Offered equals delivered + dropped + held at the end of the run."""
        config = short(**{"scheduler.mode": mode, "traffic.be.rate_bps": 1_256_000})
        topo = run_topology(config)
        held = packets_in_system(topo)
        for cls in (TrafficClass.AF, TrafficClass.EF, TrafficClass.BE):
            s = topo.ledger.get(cls)
            assert s.offered_packets > 0
            assert s.offered_packets == s.delivered_packets + s.dropped_packets + held[(cls, 0)]
        assert len(topo.ledger.samples) >= 8

    def test_delay_at_least_serialization(self):
        topo = run_topology(short(**{"traffic.be.rate_bps": 200_000}))
        s = topo.ledger.get(TrafficClass.EF)
        assert s.delivered_packets > 0
        # 1402 B over 100M, 1G and 2.1M links
        floor_us = 112 + 11 + 5341
        assert s.delay_sum_us / s.delivered_packets >= floor_us

    def test_egress_shaped_to_bottleneck(self):
        """Departures in any window never exceed R x window plus one packet."""
        config = short(**{"traffic.be.rate_bps": 1_500_000})
        sim = Simulator()
        topo = build_single_domain(config, sim=sim)
        egress = topo.domains[0].router.egress.record_departures()
        topo.start()
        sim.run_until(3_000_000)

        departures = egress.departures
        assert len(departures) > 100
        window = 100_000
        for i, (t0, _) in enumerate(departures):
            sent = sum(size for t, size in departures[i:] if t < t0 + window)
            assert sent * 8 <= 2_100_000 * window / 1_000_000 + 1500 * 8

    def test_warmup_packets_not_counted(self):
        config = short(**{"run.warmup_s": 3.5})
        topo = run_topology(config)
        ef = topo.ledger.get(TrafficClass.EF)
        # three voice sessions at one packet per 175.25 ms over 0.5 s
        assert 6 <= ef.offered_packets <= 12


class TestMultiDomain:
    """Test suite for the multi-domain topology."""

    def _config(self, shaped=True, domains=2):
        return short(**{
            "topology.kind": "multi",
            "topology.domains": domains,
            "topology.shaped": shaped,
        })

    def test_structure(self):
        topo = build_multi_domain(self._config())
        assert len(topo.domains) == 2
        assert topo.shared.link.rate == 4_200_000
        assert topo.shared.discipline.queue.capacity == 52
        assert all(s.router.egress.link.rate == 2_100_000 for s in topo.domains)

    def test_unshaped_runs_at_core_rate(self):
        topo = build_multi_domain(self._config(shaped=False))
        assert all(s.router.egress.link.rate == 1e9 for s in topo.domains)

    def test_one_domain_is_single(self):
        topo = build_multi_domain(short(), domains=1)
        assert topo.shared is None

    def test_bad_domain_count(self):
        with pytest.raises(ConfigError):
            build_multi_domain(short(), domains=0)

    def test_shared_slots_override(self):
        config = self._config().with_overrides({"topology.shared_slots": 7})
        assert build_multi_domain(config).shared.discipline.queue.capacity == 7

    @pytest.mark.parametrize("shaped", [True, False])
    def test_conservation_per_domain(self, shaped):
        topo = run_topology(self._config(shaped=shaped))
        held = packets_in_system(topo)
        for d in range(2):
            for cls in (TrafficClass.AF, TrafficClass.EF, TrafficClass.BE):
                s = topo.ledger.get(cls, d)
                assert s.offered_packets > 0
                assert s.offered_packets == s.delivered_packets + s.dropped_packets + held[(cls, d)]

    def test_shaped_shared_backlog_within_one_packet_per_domain(self):
        """Shaped domains keep the shared FIFO under D maximum-size packets of waiting bytes."""
        config = self._config(domains=4).with_overrides({"traffic.be.rate_bps": 1_256_000})
        topo = run_topology(config)
        assert 0 < topo.shared.backlog_max_bytes <= 4 * 1402
        assert topo.shared.dropped_packets == 0

    def test_streams_independent_per_domain(self):
        """Domains draw from their own streams, so their video traffic differs."""
        topo = run_topology(self._config())
        a = topo.ledger.get(TrafficClass.AF, 0).offered_bytes
        b = topo.ledger.get(TrafficClass.AF, 1).offered_bytes
        assert a != b
