"""Shared value types: traffic classes, fixed-point bandwidth, links, requests, decisions.

All bandwidth arithmetic is exact fixed-point at 0.001 Mb/s resolution so that
reservation accounting round-trips to zero without floating-point drift.
Priority convention used throughout: a higher traffic-class index means higher
priority (class C-1 is the most important and can preempt loans made by lower
classes).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from enum import Enum
from typing import Iterable, Sequence

MBPS_GRID = Decimal("0.001")


class SimError(Exception):
    """Base for all simulator errors."""


class InvalidFieldError(SimError):
    """A constructor argument violates the type's invariants."""

    def __init__(self, field_name: str, message: str = ""):
        self.field_name = field_name
        super().__init__(f"INVALID_FIELD({field_name})" + (f": {message}" if message else ""))


class NegativeValueError(SimError):
    pass


class ClassCountMismatchError(SimError):
    pass


class BamModel(str, Enum):
    MAM = "MAM"
    RDM = "RDM"
    ATCS = "ATCS"
    GBAM = "GBAM"


@dataclass(frozen=True, slots=True, order=True)
class Bandwidth:
    """Non-negative bandwidth in Mb/s, stored as an exact count of 0.001 Mb/s units."""

    millis: int

    def __post_init__(self) -> None:
        if not isinstance(self.millis, int):
            raise InvalidFieldError("bandwidth", "must be an integer number of 0.001 Mb/s units")
        if self.millis < 0:
            raise NegativeValueError(f"bandwidth must be >= 0, got {self.millis} milli-Mb/s")

    @classmethod
    def from_mbps(cls, value: "int | float | str | Decimal") -> "Bandwidth":
        """Build from an Mb/s figure; the value must sit exactly on the 0.001 grid."""
        try:
            dec = value if isinstance(value, Decimal) else Decimal(repr(value) if isinstance(value, float) else str(value))
        except InvalidOperation as exc:
            raise InvalidFieldError("bandwidth", str(exc)) from exc
        scaled = dec / MBPS_GRID
        if scaled != scaled.to_integral_value():
            raise InvalidFieldError("bandwidth", f"{value} is finer than the 0.001 Mb/s grid")
        millis = int(scaled)
        if millis < 0:
            raise NegativeValueError(f"bandwidth must be >= 0, got {value}")
        return cls(millis)

    @classmethod
    def zero(cls) -> "Bandwidth":
        return cls(0)

    @property
    def mbps(self) -> float:
        return self.millis / 1000.0

    def __add__(self, other: "Bandwidth") -> "Bandwidth":
        return Bandwidth(self.millis + other.millis)

    def __sub__(self, other: "Bandwidth") -> "Bandwidth":
        return Bandwidth(self.millis - other.millis)

    def __bool__(self) -> bool:
        return self.millis != 0

    def __str__(self) -> str:
        return f"{Decimal(self.millis) * MBPS_GRID} Mb/s"


def bc_vector(values: Iterable["int | float | str | Decimal"]) -> tuple[Bandwidth, ...]:
    """Per-class bandwidth-constraint vector, one entry per traffic class."""
    return tuple(Bandwidth.from_mbps(v) for v in values)


def check_tc(tc: int, class_count: int) -> int:
    if not isinstance(tc, int) or not 0 <= tc < class_count:
        raise InvalidFieldError("tc", f"class index {tc} outside [0, {class_count - 1}]")
    return tc


@dataclass(frozen=True, slots=True)
class LinkSpec:
    """A directed link with capacity and per-class bandwidth constraints."""

    link_id: str
    src: int
    dst: int
    capacity: Bandwidth
    bc: tuple[Bandwidth, ...]

    def __post_init__(self) -> None:
        if self.src == self.dst:
            raise InvalidFieldError("dst", "link endpoints must differ")
        if self.capacity.millis <= 0:
            raise InvalidFieldError("capacity", "link capacity must be > 0")

    @property
    def class_count(self) -> int:
        return len(self.bc)


def link_id(src: int, dst: int) -> str:
    return f"{src}->{dst}"


@dataclass(frozen=True, slots=True)
class LspRequest:
    """A connection demand: class, bandwidth, endpoints, arrival and holding time."""

    request_id: int
    tc: int
    bandwidth: Bandwidth
    src: int
    dst: int
    arrival_time: float
    holding_time: float

    def __post_init__(self) -> None:
        if self.bandwidth.millis <= 0:
            raise InvalidFieldError("bandwidth", "request bandwidth must be > 0")
        if self.holding_time <= 0:
            raise InvalidFieldError("holding_time", "holding time must be > 0")
        if self.arrival_time < 0:
            raise InvalidFieldError("arrival_time", "arrival time must be >= 0")
        if self.tc < 0:
            raise InvalidFieldError("tc", "class index must be >= 0")
        if self.src == self.dst:
            raise InvalidFieldError("dst", "src and dst must differ")


class RequestFactory:
    """Hands out LspRequests with strictly increasing ids within one run."""

    def __init__(self, start: int = 1):
        self._next = start

    def new_request(self, tc: int, bandwidth: Bandwidth, src: int, dst: int,
                    arrival_time: float, holding_time: float) -> LspRequest:
        req = LspRequest(self._next, tc, bandwidth, src, dst, arrival_time, holding_time)
        self._next += 1
        return req


class DecisionKind(str, Enum):
    GRANTED = "GRANTED"
    GRANTED_WITH_PREEMPTION = "GRANTED_WITH_PREEMPTION"
    BLOCKED = "BLOCKED"


class BlockReason(str, Enum):
    NO_ROUTE = "NO_ROUTE"
    CONSTRAINT = "CONSTRAINT"
    CAPACITY = "CAPACITY"


@dataclass(frozen=True, slots=True)
class Decision:
    """Outcome of one admission attempt. Field presence is dictated by `kind`."""

    kind: DecisionKind
    path: tuple[int, ...] | None = None
    victims: tuple[int, ...] = ()
    block_reason: BlockReason | None = None

    def __post_init__(self) -> None:
        if self.kind is DecisionKind.BLOCKED:
            if self.path is not None or self.victims or self.block_reason is None:
                raise InvalidFieldError("kind", "BLOCKED carries only a block_reason")
        else:
            if self.path is None or self.block_reason is not None:
                raise InvalidFieldError("kind", "granted decisions carry a path and no block_reason")
            if self.kind is DecisionKind.GRANTED and self.victims:
                raise InvalidFieldError("victims", "GRANTED must not list victims")
            if self.kind is DecisionKind.GRANTED_WITH_PREEMPTION and not self.victims:
                raise InvalidFieldError("victims", "GRANTED_WITH_PREEMPTION requires victims")


@dataclass(frozen=True, slots=True)
class ValidationResult:
    ok: bool
    violations: tuple[str, ...] = ()


def validate_constraints(cfg, link: LinkSpec) -> ValidationResult:
    """Check a link's BC vector against the structural rules of the active model.

    MAM: every bc[c] <= capacity (sum may exceed capacity only when
    oversubscription is flagged). RDM: bc nonincreasing with bc[0] == capacity.
    ATCS (and any GBAM variant that lends in either direction): sum(bc) <= capacity
    so loan accounting stays well-defined.
    """
    if cfg.class_count != link.class_count:
        raise ClassCountMismatchError(
            f"config has {cfg.class_count} classes, link {link.link_id} has {link.class_count}")
    for c, b in enumerate(link.bc):
        if b.millis < 0:
            raise NegativeValueError(f"bc[{c}] negative on {link.link_id}")

    cap = link.capacity.millis
    bc = [b.millis for b in link.bc]
    violations: list[str] = []
    model = cfg.model
    if model is BamModel.RDM:
        if bc[0] != cap:
            violations.append(f"RDM requires bc[0] == capacity ({bc[0]} != {cap})")
        for c in range(1, len(bc)):
            if bc[c] > bc[c - 1]:
                violations.append(f"RDM requires nonincreasing bc (bc[{c}]={bc[c]} > bc[{c-1}]={bc[c-1]})")
    elif model is BamModel.ATCS or (model is BamModel.GBAM and (cfg.htl_enabled or cfg.lth_enabled)):
        if sum(bc) > cap:
            violations.append(f"sum of BC exceeds capacity ({sum(bc)} > {cap})")
        for c, b in enumerate(bc):
            if b > cap:
                violations.append(f"bc[{c}]={b} exceeds capacity {cap}")
    else:  # MAM, or GBAM with no sharing
        for c, b in enumerate(bc):
            if b > cap:
                violations.append(f"bc[{c}]={b} exceeds capacity {cap}")
        if not cfg.mam_oversubscription and sum(bc) > cap:
            violations.append(f"sum of BC exceeds capacity ({sum(bc)} > {cap}) and oversubscription is off")
    return ValidationResult(not violations, tuple(violations))
