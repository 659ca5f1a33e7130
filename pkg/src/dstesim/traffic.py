"""Seeded request-stream generation with reproducible substreams.

The generator is pinned so any implementation can reproduce sequences exactly:

* Substream derivation: a 64-bit master seed is mixed with each component
  (run index, traffic class, quantity kind) through the splitmix64 finalizer,
  seeding one independent substream per (run, class, quantity). Adding a class
  or quantity never perturbs the other streams.
* Sample generation: each substream is the splitmix64 sequence
  (state += 0x9E3779B97F4A7C15; output = finalizer(state)). A uniform double in
  [0, 1) is (output >> 11) * 2**-53.
* Exponential sampling is inverse-CDF: -log1p(-u) / rate.
* Discrete choice over n values is floor(u * n) clamped to n - 1; endpoint
  pairs draw src = floor(u1 * N) then dst skipping src.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from enum import Enum, IntEnum

from .domain import Bandwidth, InvalidFieldError, LspRequest, SimError

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(x: int) -> int:
    """splitmix64 finalizer."""
    x &= _MASK
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK
    x ^= x >> 31
    return x


def derive_seed(master: int, *components: int) -> int:
    seed = mix64(master ^ _GOLDEN)
    for part in components:
        seed = mix64((seed + _GOLDEN * (part + 1)) & _MASK)
    return seed


class Rng:
    """splitmix64 stream."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK
        return mix64(self.state)

    def uniform01(self) -> float:
        return (self.next_u64() >> 11) * 2.0 ** -53

    def expovariate(self, rate: float) -> float:
        return -math.log1p(-self.uniform01()) / rate

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.uniform01()

    def choice_index(self, n: int) -> int:
        return min(int(self.uniform01() * n), n - 1)


class Quantity(IntEnum):
    INTERARRIVAL = 0
    HOLDING = 1
    BANDWIDTH = 2
    ENDPOINTS = 3


# --- distribution specs -----------------------------------------------------


@dataclass(frozen=True)
class Exponential:
    rate: float  # events per second; mean = 1/rate

    def __post_init__(self):
        if self.rate <= 0:
            raise InvalidFieldError("rate", "exponential rate must be > 0")


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo < 0 or self.hi < self.lo:
            raise InvalidFieldError("bounds", "uniform bounds must satisfy 0 <= lo <= hi")


@dataclass(frozen=True)
class Deterministic:
    value: float

    def __post_init__(self):
        if self.value <= 0:
            raise InvalidFieldError("value", "deterministic interval must be > 0")


TimeDist = Exponential | Uniform | Deterministic


@dataclass(frozen=True)
class FixedBandwidth:
    value: Bandwidth


@dataclass(frozen=True)
class BandwidthChoice:
    values: tuple[Bandwidth, ...]

    def __post_init__(self):
        if not self.values:
            raise InvalidFieldError("values", "bandwidth choice list must be non-empty")


BandwidthDist = FixedBandwidth | BandwidthChoice


@dataclass(frozen=True)
class FixedEndpoints:
    src: int
    dst: int

    def __post_init__(self):
        if self.src == self.dst:
            raise InvalidFieldError("dst", "endpoints must differ")


@dataclass(frozen=True)
class UniformEndpoints:
    pass


EndpointDist = FixedEndpoints | UniformEndpoints


@dataclass(frozen=True)
class ClassTrafficSpec:
    tc: int
    interarrival: TimeDist
    holding: TimeDist
    bandwidth: BandwidthDist
    endpoints: EndpointDist


def sample_time(dist: TimeDist, rng: Rng, rate_override: float | None = None) -> float:
    if isinstance(dist, Exponential):
        return rng.expovariate(rate_override if rate_override is not None else dist.rate)
    if isinstance(dist, Uniform):
        return rng.uniform(dist.lo, dist.hi)
    return dist.value


class ClassStream:
    """Per-class sampling state: one substream per quantity kind.

    A run is identified entirely by its master seed (runs with equal seeds are
    replicas by design), so the derivation path is (seed, tc, quantity).
    """

    def __init__(self, master_seed: int, spec: ClassTrafficSpec):
        self.spec = spec
        self._rngs = {
            q: Rng(derive_seed(master_seed, spec.tc, int(q))) for q in Quantity
        }

    def next_interarrival(self, rate_override: float | None = None) -> float:
        return sample_time(self.spec.interarrival, self._rngs[Quantity.INTERARRIVAL], rate_override)

    def sample_holding(self) -> float:
        return sample_time(self.spec.holding, self._rngs[Quantity.HOLDING])

    def sample_bandwidth(self) -> Bandwidth:
        dist = self.spec.bandwidth
        if isinstance(dist, FixedBandwidth):
            return dist.value
        idx = self._rngs[Quantity.BANDWIDTH].choice_index(len(dist.values))
        return dist.values[idx]

    def sample_endpoints(self, node_count: int) -> tuple[int, int]:
        dist = self.spec.endpoints
        if isinstance(dist, FixedEndpoints):
            return dist.src, dist.dst
        rng = self._rngs[Quantity.ENDPOINTS]
        src = rng.choice_index(node_count)
        dst = rng.choice_index(node_count - 1)
        if dst >= src:
            dst += 1
        return src, dst


# --- time-phased profiles ----------------------------------------------------


class Level(str, Enum):
    HIGH = "HIGH"
    MEDIUM = "MEDIUM"
    LOW = "LOW"


DEFAULT_LEVEL_WEIGHTS = {Level.HIGH: 3.0, Level.MEDIUM: 2.0, Level.LOW: 1.0}


@dataclass(frozen=True)
class Phase:
    start: float
    duration: float
    levels: tuple[Level, ...]       # one per traffic class
    rates: tuple[float, ...]        # resolved arrivals/second per class


@dataclass(frozen=True)
class ProfileSchedule:
    phases: tuple[Phase, ...]

    def __post_init__(self):
        clock = None
        for ph in self.phases:
            if clock is not None and abs(ph.start - clock) > 1e-9:
                raise InvalidFieldError("phases", "phases must be contiguous and non-overlapping")
            clock = ph.start + ph.duration

    def phase_at(self, t: float) -> int | None:
        for i, ph in enumerate(self.phases):
            if ph.start <= t < ph.start + ph.duration:
                return i
        return None

    @property
    def end(self) -> float:
        last = self.phases[-1]
        return last.start + last.duration


TABLE1_LEVELS = (
    (Level.HIGH, Level.LOW, Level.LOW),
    (Level.MEDIUM, Level.LOW, Level.HIGH),
    (Level.LOW, Level.MEDIUM, Level.HIGH),
    (Level.HIGH, Level.HIGH, Level.HIGH),
    (Level.HIGH, Level.HIGH, Level.HIGH),
    (Level.HIGH, Level.HIGH, Level.HIGH),
)


def build_table1_schedule(
    link_capacity: Bandwidth,
    class_count: int = 3,
    *,
    phase_seconds: float = 3600.0,
    hold_mean: float = 90.0,
    bw_values: tuple[float, ...] = (1.0, 2.0),
    endpoints: EndpointDist = FixedEndpoints(0, 1),
    normal_load: float = 0.7,
    overload: float = 1.5,
    level_weights: dict[Level, float] | None = None,
) -> tuple[ProfileSchedule, tuple[ClassTrafficSpec, ...]]:
    """Six one-hour phases alternating per-class demand levels.

    Phases 1-3 mix HIGH/MEDIUM/LOW per class at an aggregate offered load of
    `normal_load` x capacity; phases 4-6 run every class HIGH at `overload` x
    capacity, which is what pushes link utilization past the 90% mark. Offered
    load splits across classes proportionally to level weights (3:2:1).
    """
    if class_count != 3:
        raise InvalidFieldError("class_count", "the six-phase template is defined for 3 classes")
    weights = level_weights or DEFAULT_LEVEL_WEIGHTS
    cap_mbps = link_capacity.mbps
    mean_bw = sum(bw_values) / len(bw_values)
    phases = []
    for i, levels in enumerate(TABLE1_LEVELS):
        load = normal_load if i < 3 else overload
        wsum = sum(weights[lv] for lv in levels)
        rates = tuple(
            load * cap_mbps * (weights[lv] / wsum) / (hold_mean * mean_bw) for lv in levels
        )
        phases.append(Phase(i * phase_seconds, phase_seconds, levels, rates))
    schedule = ProfileSchedule(tuple(phases))
    bw_choice = BandwidthChoice(tuple(Bandwidth.from_mbps(v) for v in bw_values))
    specs = tuple(
        ClassTrafficSpec(
            tc=tc,
            interarrival=Exponential(schedule.phases[0].rates[tc]),
            holding=Exponential(1.0 / hold_mean),
            bandwidth=bw_choice,
            endpoints=endpoints,
        )
        for tc in range(class_count)
    )
    return schedule, specs


# --- trace import -------------------------------------------------------------


class TraceParseError(SimError):
    pass


class UnsortedInputError(SimError):
    pass


TRACE_HEADER = ["arrival_s", "tc", "bandwidth_mbps", "src", "dst", "holding_s"]


def load_trace(text: str) -> tuple[LspRequest, ...]:
    """Parse a request trace CSV; timestamps must be monotone nondecreasing."""
    reader = csv.reader(io.StringIO(text))
    rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    if not rows:
        return ()
    if [cell.strip() for cell in rows[0]] != TRACE_HEADER:
        raise TraceParseError(f"trace header must be {','.join(TRACE_HEADER)}")
    requests = []
    last_t = -1.0
    for i, row in enumerate(rows[1:], start=2):
        try:
            arrival = float(row[0])
            tc = int(row[1])
            bw = Bandwidth.from_mbps(row[2].strip())
            src, dst = int(row[3]), int(row[4])
            holding = float(row[5])
        except (ValueError, IndexError, InvalidFieldError) as exc:
            raise TraceParseError(f"line {i}: {exc}") from exc
        if arrival < last_t:
            raise UnsortedInputError(f"line {i}: arrival {arrival} precedes {last_t}")
        last_t = arrival
        requests.append(LspRequest(i - 1, tc, bw, src, dst, arrival, holding))
    return tuple(requests)
