"""Time-varying uplink model: interference, throughput, and user-plane paths.

The interference-to-throughput mapping is a piecewise-linear table whose
anchor values come out of cost calibration; all throughput numbers in this
package are calibration artifacts, not measured link rates. Path configs
describe the user-plane detour: a distributed UPF terminates at the edge
(no added delay), a central UPF adds configurable one-way delay, jitter,
and per-message processing overhead.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError, OutOfRangeError
from .rng import SplitMix64, derive_seed

SWEEP_LEVELS_DB = (-40.0, -30.0, -20.0, -10.0, -5.0)

DUPF = "dupf"
CUPF = "cupf"

# residual per-message processing beyond the configured one-way delay; two
# messages per round trip make the shipped round-trip gap 200 + 55.6 ms
DEFAULT_CUPF_OVERHEAD_MS = 27.8


@dataclass(frozen=True)
class ChannelState:
    interference_db: float
    uplink_mbps: float
    timestamp_ms: float = 0.0

    def __post_init__(self):
        if not self.uplink_mbps > 0:
            raise InvalidParameterError(f"uplink must be positive, got {self.uplink_mbps}")


@dataclass(frozen=True)
class PathConfig:
    kind: str
    extra_oneway_ms: float = 0.0
    jitter_ms: float = 0.0
    overhead_ms: float = 0.0

    @classmethod
    def dupf(cls, overhead_ms: float = 0.0) -> "PathConfig":
        return cls(DUPF, 0.0, 0.0, overhead_ms)

    @classmethod
    def cupf(
        cls,
        extra_oneway_ms: float = 100.0,
        jitter_ms: float = 5.0,
        overhead_ms: float = DEFAULT_CUPF_OVERHEAD_MS,
    ) -> "PathConfig":
        return cls(CUPF, extra_oneway_ms, jitter_ms, overhead_ms)

    def mean_delay_ms(self, direction_count: int = 2) -> float:
        """Expected path delay over the given number of messages."""
        return direction_count * (self.extra_oneway_ms + self.overhead_ms)


@dataclass(frozen=True)
class ThroughputMap:
    """Monotone non-increasing interference (dB) -> uplink (Mbps) table."""

    grid_db: tuple[float, ...]
    mbps: tuple[float, ...]

    def __post_init__(self):
        if len(self.grid_db) != len(self.mbps) or len(self.grid_db) < 2:
            raise InvalidParameterError("throughput table needs >= 2 paired entries")
        if any(b <= a for a, b in zip(self.grid_db, self.grid_db[1:])):
            raise InvalidParameterError("interference grid must be strictly increasing")
        if any(m <= 0 for m in self.mbps):
            raise InvalidParameterError("throughput values must be positive")
        if any(b > a for a, b in zip(self.mbps, self.mbps[1:])):
            raise InvalidParameterError("throughput must be non-increasing in interference")

    def throughput(self, interference_db: float) -> float:
        if not self.grid_db[0] <= interference_db <= self.grid_db[-1]:
            raise OutOfRangeError(
                f"interference {interference_db} dB outside "
                f"[{self.grid_db[0]}, {self.grid_db[-1]}]"
            )
        return float(np.interp(interference_db, self.grid_db, self.mbps))

    def implied_interference(self, uplink_mbps: float) -> float:
        """Inverse lookup; flat table segments resolve to the lowest dB."""
        hi = max(self.mbps)
        lo = min(self.mbps)
        v = min(max(uplink_mbps, lo), hi)
        # walk segments left to right so flat stretches pick their left edge
        if v >= self.mbps[0]:
            return self.grid_db[0]
        for i in range(len(self.mbps) - 1):
            a, b = self.mbps[i], self.mbps[i + 1]
            if b <= v <= a:
                if a == b:
                    return self.grid_db[i]
                t = (v - a) / (b - a)
                return self.grid_db[i] + t * (self.grid_db[i + 1] - self.grid_db[i])
        return self.grid_db[-1]


def throughput_from_interference(tmap: ThroughputMap, interference_db: float) -> float:
    return tmap.throughput(interference_db)


def estimate_throughput(true_state: ChannelState, noise_pct: float, seed: int) -> float:
    """Noisy stand-in for a live throughput estimator.

    Multiplicative uniform error in [1 - noise_pct, 1 + noise_pct], seeded so
    a decision trace is reproducible.
    """
    if noise_pct < 0:
        raise InvalidParameterError("noise_pct must be >= 0")
    if noise_pct == 0:
        return true_state.uplink_mbps
    rng = SplitMix64(derive_seed(seed, "estimate"))
    factor = rng.uniform(1.0 - noise_pct, 1.0 + noise_pct)
    return max(true_state.uplink_mbps * factor, 1e-9)


def path_delay_sample(path: PathConfig, direction_count: int = 2, seed: int = 0) -> float:
    """One sampled path delay: per message, one-way delay + jitter + overhead."""
    if direction_count < 1:
        raise InvalidParameterError("direction_count must be >= 1")
    rng = SplitMix64(derive_seed(seed, "path", path.kind))
    total = 0.0
    for _ in range(direction_count):
        jitter = rng.uniform(-path.jitter_ms, path.jitter_ms) if path.jitter_ms > 0 else 0.0
        total += path.extra_oneway_ms + jitter + path.overhead_ms
    return total


@dataclass(frozen=True)
class ChannelTrace:
    seed: int
    samples: tuple[ChannelState, ...] = field(default_factory=tuple)

    def __post_init__(self):
        ts = [s.timestamp_ms for s in self.samples]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise InvalidParameterError("trace timestamps must be strictly increasing")

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("timestamp_ms,interference_db,uplink_mbps\n")
        for s in self.samples:
            buf.write(f"{s.timestamp_ms!r},{s.interference_db!r},{s.uplink_mbps!r}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, seed: int = 0) -> "ChannelTrace":
        lines = [ln for ln in text.split("\n") if ln.strip()]
        if not lines or lines[0].strip() != "timestamp_ms,interference_db,uplink_mbps":
            raise InvalidParameterError("bad trace header")
        samples = []
        for i, ln in enumerate(lines[1:], start=2):
            parts = ln.split(",")
            if len(parts) != 3:
                raise InvalidParameterError(f"trace line {i}: expected 3 columns")
            try:
                t, db, up = (float(p) for p in parts)
            except ValueError as exc:
                raise InvalidParameterError(f"trace line {i}: {exc}") from exc
            samples.append(ChannelState(db, up, t))
        if not samples:
            raise InvalidParameterError("trace has no samples")
        return cls(seed, tuple(samples))


def generate_trace(
    duration_ms: float,
    step_ms: float,
    scenario: str,
    seed: int,
    tmap: ThroughputMap,
    constant_db: float = -20.0,
    walk_step_db: float = 2.0,
) -> ChannelTrace:
    """Deterministic interference trace.

    sweep walks the five standard interference levels in equal segments;
    constant holds one level; random-walk takes bounded seeded steps.
    """
    if duration_ms <= 0 or step_ms <= 0:
        raise InvalidParameterError("duration_ms and step_ms must be positive")
    if scenario not in ("constant", "sweep", "random-walk"):
        raise InvalidParameterError(f"unknown scenario {scenario!r}")
    lo_db, hi_db = SWEEP_LEVELS_DB[0], SWEEP_LEVELS_DB[-1]
    rng = SplitMix64(derive_seed(seed, "trace", scenario))
    samples = []
    level = constant_db
    t = 0.0
    while t < duration_ms:
        if scenario == "sweep":
            seg = min(int(t * len(SWEEP_LEVELS_DB) / duration_ms), len(SWEEP_LEVELS_DB) - 1)
            level = SWEEP_LEVELS_DB[seg]
        elif scenario == "random-walk":
            if samples:
                level = min(max(level + rng.uniform(-walk_step_db, walk_step_db), lo_db), hi_db)
        samples.append(ChannelState(level, tmap.throughput(level), t))
        t += step_ms
    return ChannelTrace(seed, tuple(samples))
