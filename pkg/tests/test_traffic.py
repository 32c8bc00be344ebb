"""
Tests for Traffic Sources
=========================
"""

import pytest

from dsedge.config.errors import ConfigError
from dsedge.core.diffserv import TrafficClass
from dsedge.core.traffic import (
    BestEffortSource,
    BestEffortState,
    ClassTrafficSpec,
    VideoSource,
    VideoSourceState,
    VoiceSource,
    VoiceSourceState,
    fragment,
    next_be_arrival,
    next_video_frame,
    next_voice_packet,
    offered_load,
    profile,
    serialization_us,
    stagger,
    thinning_factor,
    voice_interval_us,
)
from dsedge.engine.random_streams import Distribution, RandomStream


def video_state(pace_rate=None, rate=384_000):
    return VideoSourceState.for_rate("d0.video.0", rate, 40_000, 1038, pace_rate=pace_rate)


class TestProfiles:
    """Test suite for codec profiles."""

    def test_lookup(self):
        h263 = profile("H263")
        assert (h263.avg_rate, h263.peak_rate, h263.pkt_size) == (328_000, 840_000, 1038)
        assert profile("MPEG-audio").pkt_size == 1402

    def test_unknown_profile(self):
        with pytest.raises(ConfigError) as exc:
            profile("AAC", key="traffic.ef.profile")
        assert exc.value.key == "traffic.ef.profile"
        assert "G723" in str(exc.value)


class TestHelpers:
    """Test suite for small traffic helpers."""

    def test_fragment(self):
        assert fragment(2500, 1038) == [1038, 1038, 424]
        assert fragment(1038, 1038) == [1038]
        assert fragment(1, 1038) == [1]
        with pytest.raises(ValueError):
            fragment(10, 0)

    def test_serialization_rounds_to_nearest(self):
        assert serialization_us(1000, 2_100_000) == 3810
        assert serialization_us(1038, 840_000) == 9886
        with pytest.raises(ValueError):
            serialization_us(10, 0)

    def test_offered_load(self):
        af = ClassTrafficSpec(TrafficClass.AF, 384_000, 1038, 0.1, 3)
        ef = ClassTrafficSpec(TrafficClass.EF, 64_000, 1402, 0.15, 3)
        assert offered_load([af, ef], 756_000) == pytest.approx(2_100_000)

    def test_default_priorities(self):
        assert ClassTrafficSpec(TrafficClass.EF, 1, 1).priority == 3
        assert ClassTrafficSpec(TrafficClass.AF, 1, 1, priority=7).priority == 7

    def test_validate(self):
        with pytest.raises(ConfigError) as exc:
            ClassTrafficSpec(TrafficClass.AF, 1000, 100, 0.0).validate("traffic.af")
        assert exc.value.key == "traffic.af.delay_s"

    def test_stagger(self):
        assert [stagger(k, 3, 320_000) for k in range(3)] == [0, 106_666, 213_333]
        assert stagger(0, 0, 100) == 0

    def test_thinning_factor(self):
        assert thinning_factor(2_000_000, 1_344_000) == 1.0
        assert thinning_factor(672_000, 1_344_000) == pytest.approx(0.5)


class TestVideo:
    """Test suite for the VBR video model."""

    def test_frame_sizes_follow_ratio(self):
        """Mean I:P:B sizes are 5:3:1 and add up to the GOP byte budget."""
        state = video_state()
        sizes = state.mean_frame_size
        assert sizes["I"] / sizes["B"] == pytest.approx(5)
        assert sizes["P"] / sizes["B"] == pytest.approx(3)
        gop_bytes = sum(sizes[f] for f in state.gop_pattern)
        assert gop_bytes == pytest.approx(384_000 * 0.32 / 8)

    def test_gop_cycle(self):
        state = video_state()
        rng = RandomStream(1, "v")
        kinds = []
        for _ in range(16):
            kinds.append(state.current_frame_type)
            next_video_frame(state, rng)
        assert "".join(kinds) == "IBBBPBBB" * 2
        assert state.next_frame_at == 16 * 40_000

    def test_long_run_rate(self):
        """Emitted bytes converge to the configured session rate."""
        state = video_state()
        rng = RandomStream(9, "d0.video.0")
        frames = 16_000
        packets = [p for _ in range(frames) for p in next_video_frame(state, rng)]
        rate = sum(p.size for p in packets) * 8 * 1_000_000 / (frames * 40_000)
        assert rate == pytest.approx(384_000, rel=0.05)

    def test_fragments_bounded(self):
        state = video_state()
        rng = RandomStream(2, "v")
        for _ in range(50):
            for packet in next_video_frame(state, rng):
                assert 0 < packet.size <= 1038
                assert packet.traffic_class == TrafficClass.AF
                assert packet.kind == "video"

    def test_unpaced_burst(self):
        state = video_state()
        rng = RandomStream(3, "v")
        packets = next_video_frame(state, rng, now=0)
        assert {p.created_at for p in packets} == {0}

    def test_paced_fragments(self):
        """Paced fragments leave one serialization time apart at the peak rate."""
        state = video_state(pace_rate=840_000)
        rng = RandomStream(4, "v")
        for _ in range(24):
            now = state.next_frame_at
            free_before = state.sender_free_at
            packets = next_video_frame(state, rng, now=now)
            if not packets:
                continue
            assert packets[0].created_at == max(now, free_before)
            for prev, cur in zip(packets, packets[1:]):
                assert cur.created_at - prev.created_at == serialization_us(prev.size, 840_000)
            assert state.sender_free_at == packets[-1].created_at + serialization_us(packets[-1].size, 840_000)

    def test_bad_gop(self):
        with pytest.raises(ConfigError):
            VideoSourceState.for_rate("v", 1000, 40_000, 1038, gop_pattern="IXB")

    def test_source_stops(self, sim):
        """Nothing is emitted after stop_at, and emission times equal created_at."""
        seen = []
        state = video_state(pace_rate=840_000)
        source = VideoSource(sim, lambda p: seen.append((sim.now, p)), 1_000_000, state, RandomStream(5, "v"))
        source.start()
        sim.run_until(2_000_000)

        assert seen
        assert all(now == p.created_at <= 1_000_000 for now, p in seen)
        assert source.emitted_packets == len(seen)


class TestVoice:
    """Test suite for the CBR voice model."""

    def test_interval(self):
        spec = ClassTrafficSpec(TrafficClass.EF, 64_000, 1402, 0.15, 3)
        assert voice_interval_us(spec) == 175_250
        assert voice_interval_us(spec, rate_scale=0.5) == 350_500
        with pytest.raises(ConfigError):
            voice_interval_us(ClassTrafficSpec(TrafficClass.EF, 0, 1402, 0.15))

    def test_next_packet(self):
        spec = ClassTrafficSpec(TrafficClass.EF, 64_000, 1402, 0.15, 1)
        state = VoiceSourceState("d0.voice.0", spec, 175_250)
        packet, nxt = next_voice_packet(state)
        assert packet.size == 1402
        assert packet.traffic_class == TrafficClass.EF
        assert packet.created_at == 0
        assert nxt == 175_250

    def test_source_emits_cbr(self, sim):
        spec = ClassTrafficSpec(TrafficClass.EF, 64_000, 1402, 0.15, 1)
        state = VoiceSourceState("d0.voice.0", spec, 175_250)
        times = []
        VoiceSource(sim, lambda p: times.append(p.created_at), 1_000_000, state).start()
        sim.run_until(1_000_000)
        assert times == [k * 175_250 for k in range(6)]


class TestBestEffort:
    """Test suite for the Poisson best-effort model."""

    def test_disabled_at_zero_rate(self, stream):
        state = BestEffortState("d0.data.0", 0.0, Distribution.constant(1000))
        assert next_be_arrival(state, stream, 0) is None

    def test_long_run_rate(self):
        state = BestEffortState("d0.data.0", 756_000, Distribution.constant(1000))
        rng = RandomStream(6, "d0.data.0")
        now, total = 0, 0
        for _ in range(20_000):
            packet, now = next_be_arrival(state, rng, now)
            total += packet.size
        assert total * 8 * 1_000_000 / now == pytest.approx(756_000, rel=0.03)

    def test_arrivals_strictly_increase(self, stream):
        state = BestEffortState("d0.data.0", 10_000_000, Distribution.exponential(500))
        now = 0
        for _ in range(200):
            packet, arrival = next_be_arrival(state, stream, now)
            assert arrival > now
            assert packet.size >= 1
            now = arrival

    def test_source_respects_stop(self, sim, stream):
        state = BestEffortState("d0.data.0", 1_000_000, Distribution.constant(1000))
        got = []
        source = BestEffortSource(sim, got.append, 500_000, state, stream)
        source.start()
        sim.run_until(1_000_000)
        assert got
        assert max(p.created_at for p in got) <= 500_000
