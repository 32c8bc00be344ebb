"""
Tests for Random Streams
========================
"""

import numpy as np
import pytest

from dsedge.config.errors import ConfigError
from dsedge.engine.random_streams import (
    Distribution,
    RandomStream,
    RngManager,
    derive_seeds,
    parse_distribution,
)


def draws(stream, dist, n):
    return np.array([stream.draw(dist) for _ in range(n)])


class TestDistribution:
    """Test suite for distribution specs."""

    @pytest.mark.parametrize("spec,kind,expected", [
        ("exponential(1000)", "exponential", 1000.0),
        ("uniform(100, 1500)", "uniform", 800.0),
        ("constant(500)", "constant", 500.0),
        (250, "constant", 250.0),
        ({"kind": "exponential", "mean": 40}, "exponential", 40.0),
    ])
    def test_parse(self, spec, kind, expected):
        dist = parse_distribution(spec)
        assert dist.kind == kind
        assert dist.expected == expected

    @pytest.mark.parametrize("spec", [
        "exponential(0)",
        "exponential(-3)",
        "uniform(5,1)",
        "gamma(2)",
        "constant(1,2)",
        "exponential(abc)",
        "not a spec",
        {"kind": "uniform", "low": 1},
        True,
    ])
    def test_invalid_specs(self, spec):
        """Bad parameters raise ConfigError naming the key."""
        with pytest.raises(ConfigError) as exc:
            parse_distribution(spec, key="traffic.be.size")
        assert exc.value.key == "traffic.be.size"


class TestRandomStream:
    """Test suite for RandomStream."""

    def test_same_seed_same_sequence(self):
        dist = Distribution.exponential(10)
        s1, s2 = RandomStream(7, "d0.video.0"), RandomStream(7, "d0.video.0")
        assert [s1.draw(dist) for _ in range(20)] == [s2.draw(dist) for _ in range(20)]

    def test_streams_are_independent(self):
        """Different stream ids or seeds give different sequences."""
        dist = Distribution.uniform(0, 1)
        base = draws(RandomStream(7, "d0.video.0"), dist, 5)
        other_id = draws(RandomStream(7, "d0.video.1"), dist, 5)
        other_seed = draws(RandomStream(8, "d0.video.0"), dist, 5)
        assert not np.array_equal(base, other_id)
        assert not np.array_equal(base, other_seed)

    def test_constant(self, stream):
        assert stream.draw(Distribution.constant(9)) == 9.0
        assert list(draws(stream, Distribution.constant(2), 3)) == [2.0, 2.0, 2.0]

    def test_uniform_in_bounds(self, stream):
        values = draws(stream, Distribution.uniform(100, 1500), 1000)
        assert values.min() >= 100
        assert values.max() <= 1500

    def test_exponential_mean(self, stream):
        values = draws(stream, Distribution.exponential(1000), 20000)
        assert values.mean() == pytest.approx(1000, rel=0.05)


class TestRngManager:
    """Test suite for RngManager."""

    def test_stream_cached(self):
        rng = RngManager(5)
        assert rng.get_stream("d0.video", 1) is rng.get_stream("d0.video", 1)
        assert rng.get_stream("d0.video", 1).stream_id == "d0.video.1"

    def test_adding_streams_does_not_perturb(self):
        """Creating extra streams leaves existing sequences unchanged."""
        dist = Distribution.exponential(5)
        lone = draws(RngManager(5).get_stream("d0.data"), dist, 5)

        busy = RngManager(5)
        for k in range(4):
            busy.get_stream("d0.video", k).draw(dist)
        assert np.array_equal(draws(busy.get_stream("d0.data"), dist, 5), lone)


class TestDeriveSeeds:
    """Test suite for replication seeds."""

    def test_first_is_base(self):
        seeds = derive_seeds(11, 3)
        assert seeds[0] == 11
        assert len(set(seeds)) == 3

    def test_deterministic(self):
        assert derive_seeds(11, 4) == derive_seeds(11, 4)

    def test_single(self):
        assert derive_seeds(9, 1) == [9]
