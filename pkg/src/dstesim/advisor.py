"""Case-based model advisor.

A case maps a traffic/performance signature to the allocation model (and BC
split) that worked, scored by outcome. Retrieval is weighted k-nearest-neighbor
over the feature space; recommendation returns the best-outcome neighbor. The
advisor only ever suggests; applying a recommendation is an operator action.

Feature layout for C classes (length 2C + 1):
    [0..C)    per-class share of offered load (sums to 1)
    [C]       aggregate offered load / capacity
    [C+1..]   per-class blocking probability
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .domain import BamModel, SimError


class EmptyCaseBaseError(SimError):
    pass


class DimensionMismatchError(SimError):
    pass


@dataclass(frozen=True)
class Case:
    features: tuple[float, ...]
    model: BamModel
    bc_fractions: tuple[float, ...]
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise DimensionMismatchError(f"score {self.score} outside [0, 1]")


@dataclass
class CaseBase:
    dimension: int
    weights: tuple[float, ...] = ()
    k: int = 3
    cases: list[Case] = field(default_factory=list)

    def __post_init__(self):
        if not self.weights:
            self.weights = (1.0,) * self.dimension
        if len(self.weights) != self.dimension:
            raise DimensionMismatchError("weights length must equal feature dimension")
        if self.k < 1 or all(w == 0 for w in self.weights) or any(w < 0 for w in self.weights):
            raise DimensionMismatchError("k >= 1 and weights >= 0 (not all zero) required")


def distance(weights: tuple[float, ...], a: tuple[float, ...], b: tuple[float, ...]) -> float:
    return math.sqrt(sum(w * (x - y) ** 2 for w, x, y in zip(weights, a, b)))


def retrieve(base: CaseBase, query: tuple[float, ...], k: int | None = None) -> list[tuple[Case, float]]:
    """k nearest cases with distances; ties resolve to earlier-inserted cases."""
    if len(query) != base.dimension:
        raise DimensionMismatchError(f"query dimension {len(query)} != {base.dimension}")
    if not base.cases:
        raise EmptyCaseBaseError("case base is empty")
    k = k or base.k
    scored = [(distance(base.weights, case.features, query), i, case)
              for i, case in enumerate(base.cases)]
    scored.sort(key=lambda t: (t[0], t[1]))
    return [(case, dist) for dist, _, case in scored[:k]]


@dataclass(frozen=True)
class Recommendation:
    model: BamModel
    bc_fractions: tuple[float, ...]
    confidence: float


def recommend(base: CaseBase, query: tuple[float, ...]) -> Recommendation:
    """Best-outcome case among the k nearest; confidence decays with distance."""
    neighbors = retrieve(base, query)
    best_case, best_dist = max(neighbors, key=lambda t: (t[0].score, -t[1]))
    return Recommendation(best_case.model, best_case.bc_fractions, 1.0 / (1.0 + best_dist))


def retain(base: CaseBase, case: Case) -> None:
    """Append; an identical-feature case is replaced only by a higher score."""
    if len(case.features) != base.dimension:
        raise DimensionMismatchError("case dimension mismatch")
    for i, existing in enumerate(base.cases):
        if existing.features == case.features:
            if case.score > existing.score:
                base.cases[i] = case
            return
    base.cases.append(case)


def run_signature(report, capacity_mbps: float, horizon_s: float,
                  class_count: int) -> tuple[float, ...]:
    """Build the feature vector from a finished run's counters and trace."""
    offered = [0.0] * class_count
    for rec in report.trace:
        if rec["kind"] != "ARRIVAL":
            continue
        req = rec["payload"]["request"]
        offered[req["tc"]] += req["bandwidth_mbps"] * req["holding_time"]
    total = sum(offered)
    shares = tuple(o / total if total else 1.0 / class_count for o in offered)
    aggregate = total / (capacity_mbps * horizon_s) if horizon_s else 0.0
    blocking = []
    for tc in range(class_count):
        counters = report.stats.per_tc[tc]
        blocking.append(counters.blocked_total / counters.requests if counters.requests else 0.0)
    return shares + (aggregate,) + tuple(blocking)


def outcome_score(report) -> float:
    """1 - aggregate blocking probability, counting preempted LSPs as blocks
    of the victim class."""
    requests = report.requests
    if requests == 0:
        return 1.0
    bad = report.blocked_total + report.preemptions
    return max(0.0, 1.0 - bad / requests)


# --- persistence ---------------------------------------------------------------

SCHEMA = "dstesim.casebase.v1"


def save_case_base(base: CaseBase, path) -> None:
    payload = {
        "schema": SCHEMA,
        "dimension": base.dimension,
        "weights": list(base.weights),
        "k": base.k,
        "cases": [
            {
                "features": list(c.features),
                "model": c.model.value,
                "bc_fractions": list(c.bc_fractions),
                "score": c.score,
            }
            for c in base.cases
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)


def load_case_base(path) -> CaseBase:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("schema") != SCHEMA:
        raise SimError(f"unsupported case-base schema {payload.get('schema')!r}")
    base = CaseBase(payload["dimension"], tuple(payload["weights"]), payload["k"])
    for c in payload["cases"]:
        base.cases.append(Case(tuple(c["features"]), BamModel(c["model"]),
                               tuple(c["bc_fractions"]), c["score"]))
    return base
