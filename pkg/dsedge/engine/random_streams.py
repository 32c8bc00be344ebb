"""
Seeded Random Streams for dsedge
================================

One independent numpy generator per stochastic source, keyed by
(seed, stream_id), so adding a source never perturbs another one.
"""

import logging
import re
import zlib
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional, Union

import numpy as np

from ..config.errors import ConfigError

logger = logging.getLogger(__name__)

DISTRIBUTION_KINDS = ("exponential", "uniform", "constant")


@dataclass(frozen=True)
class Distribution:
    """Distribution spec: exponential(mean), uniform(a, b) or constant(value)."""

    kind: str
    mean: Optional[float] = None
    low: Optional[float] = None
    high: Optional[float] = None
    value: Optional[float] = None

    @classmethod
    def constant(cls, value: float) -> "Distribution":
        return cls(kind="constant", value=float(value))

    @classmethod
    def exponential(cls, mean: float) -> "Distribution":
        return cls(kind="exponential", mean=float(mean))

    @classmethod
    def uniform(cls, low: float, high: float) -> "Distribution":
        return cls(kind="uniform", low=float(low), high=float(high))

    @property
    def expected(self) -> float:
        """Mean of the distribution."""
        if self.kind == "constant":
            return float(self.value)
        if self.kind == "exponential":
            return float(self.mean)
        return (float(self.low) + float(self.high)) / 2.0

    def validate(self, key: Optional[str] = None) -> "Distribution":
        """Check parameters; raises ConfigError naming ``key``."""
        if self.kind not in DISTRIBUTION_KINDS:
            raise ConfigError(key, f"unknown distribution '{self.kind}', expected one of {DISTRIBUTION_KINDS}")
        if self.kind == "exponential" and (self.mean is None or self.mean <= 0):
            raise ConfigError(key, f"exponential mean must be positive, got {self.mean}")
        if self.kind == "uniform":
            if self.low is None or self.high is None or self.low > self.high:
                raise ConfigError(key, f"uniform bounds must satisfy a <= b, got ({self.low}, {self.high})")
        if self.kind == "constant" and self.value is None:
            raise ConfigError(key, "constant distribution needs a value")
        return self


_SPEC_RE = re.compile(r"^\s*(\w+)\s*\(\s*([^)]*)\)\s*$")


def parse_distribution(spec: Union[str, int, float, Mapping[str, Any], Distribution],
                       key: Optional[str] = None) -> Distribution:
    """
    Parse a distribution spec.

    Accepts ``"exponential(1000)"``, ``"uniform(100,1500)"``, ``"constant(500)"``,
    a bare number (constant), or a mapping like ``{"kind": "exponential", "mean": 1000}``.
    """
    if isinstance(spec, Distribution):
        return spec.validate(key)
    if isinstance(spec, bool):
        raise ConfigError(key, f"not a distribution: {spec!r}")
    if isinstance(spec, (int, float)):
        return Distribution.constant(spec).validate(key)
    if isinstance(spec, Mapping):
        kind = str(spec.get("kind", "")).lower()
        try:
            if kind == "constant":
                return Distribution.constant(spec["value"]).validate(key)
            if kind == "exponential":
                return Distribution.exponential(spec["mean"]).validate(key)
            if kind == "uniform":
                return Distribution.uniform(spec["low"], spec["high"]).validate(key)
        except KeyError as e:
            raise ConfigError(key, f"{kind} distribution is missing '{e.args[0]}'") from None
        raise ConfigError(key, f"unknown distribution '{kind}', expected one of {DISTRIBUTION_KINDS}")

    match = _SPEC_RE.match(str(spec))
    if not match:
        raise ConfigError(key, f"cannot parse distribution {spec!r}")
    kind = match.group(1).lower()
    try:
        args = [float(a) for a in match.group(2).split(",") if a.strip()]
    except ValueError:
        raise ConfigError(key, f"non-numeric argument in {spec!r}") from None

    arity = {"constant": 1, "exponential": 1, "uniform": 2}
    if kind not in arity:
        raise ConfigError(key, f"unknown distribution '{kind}', expected one of {DISTRIBUTION_KINDS}")
    if len(args) != arity[kind]:
        raise ConfigError(key, f"{kind} takes {arity[kind]} argument(s), got {len(args)}")

    if kind == "constant":
        return Distribution.constant(args[0]).validate(key)
    if kind == "exponential":
        return Distribution.exponential(args[0]).validate(key)
    return Distribution.uniform(args[0], args[1]).validate(key)


class RandomStream:
    """A named, independently seeded generator."""

    def __init__(self, seed: int, stream_id: str):
        self.seed = int(seed)
        self.stream_id = stream_id
        entropy = [self.seed & 0xFFFFFFFF, (self.seed >> 32) & 0xFFFFFFFF, zlib.crc32(stream_id.encode("utf-8"))]
        self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))

    def draw(self, dist: Distribution) -> float:
        """Draw one value from ``dist``."""
        if dist.kind == "constant":
            return float(dist.value)
        if dist.kind == "exponential":
            if dist.mean is None or dist.mean <= 0:
                raise ConfigError(None, f"exponential mean must be positive, got {dist.mean}")
            return float(self._gen.exponential(dist.mean))
        if dist.kind == "uniform":
            return float(self._gen.uniform(dist.low, dist.high))
        raise ConfigError(None, f"unknown distribution '{dist.kind}'")


class RngManager:
    """Hands out one RandomStream per (name, index) for a given seed."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._streams: Dict[str, RandomStream] = {}

    def get_stream(self, name: str, index: int = 0) -> RandomStream:
        stream_id = f"{name}.{index}"
        if stream_id not in self._streams:
            self._streams[stream_id] = RandomStream(self.seed, stream_id)
            logger.debug(f"Created random stream {stream_id} for seed {self.seed}")
        return self._streams[stream_id]


def derive_seeds(base_seed: int, count: int) -> list:
    """Deterministic replication seeds derived from ``base_seed``."""
    if count <= 1:
        return [int(base_seed)]
    state = np.random.SeedSequence(int(base_seed)).generate_state(count - 1, dtype=np.uint32)
    return [int(base_seed)] + [int(s) for s in state]
