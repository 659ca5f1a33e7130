"""Counters and round-robin time series for run metrics.

Utilization is integrated exactly (time-weighted, from reservation change
points), then consolidated into fixed-size rings on a configurable step. Rings
keep only the most recent N slots; older samples are overwritten round-robin.
Exports: one CSV row per (metric, slot) plus a JSON summary of counters and
derived rates. Rates with a zero denominator export as null rather than zero.
"""

from __future__ import annotations

import bisect
import csv
import io
import json
from dataclasses import dataclass, field
from enum import Enum

from .domain import BlockReason, SimError


class UnknownMetricError(SimError):
    pass


class EmptyWindowError(SimError):
    pass


class Consolidation(str, Enum):
    AVERAGE = "AVERAGE"
    MAX = "MAX"
    LAST = "LAST"


class MetricSeries:
    """Fixed-size ring of consolidated samples."""

    def __init__(self, metric_id: str, step: float, slots: int,
                 consolidation: Consolidation = Consolidation.AVERAGE):
        self.metric_id = metric_id
        self.step = step
        self.size = slots
        self.consolidation = consolidation
        self._values: list[float | None] = [None] * slots
        self._starts: list[float] = [0.0] * slots
        self._count = 0  # total slots ever written

    def push(self, slot_start: float, value: float | None) -> None:
        idx = self._count % self.size
        self._values[idx] = value
        self._starts[idx] = slot_start
        self._count += 1

    def snapshot(self) -> list[tuple[float, float | None]]:
        """Most recent slots, oldest first."""
        n = min(self._count, self.size)
        out = []
        for i in range(self._count - n, self._count):
            idx = i % self.size
            out.append((self._starts[idx], self._values[idx]))
        return out


class UtilizationIntegrator:
    """Piecewise-constant reservation level with an exact running integral."""

    def __init__(self, capacity_millis: int):
        self.capacity = capacity_millis
        self._times = [0.0]
        self._areas = [0.0]     # cumulative level*dt up to _times[i]
        self._levels = [0]      # level in effect from _times[i]

    def update(self, t: float, level_millis: int) -> None:
        last_t = self._times[-1]
        area = self._areas[-1] + self._levels[-1] * (t - last_t)
        if t == last_t:
            self._levels[-1] = level_millis
            return
        self._times.append(t)
        self._areas.append(area)
        self._levels.append(level_millis)

    def _cum_area(self, t: float) -> float:
        i = bisect.bisect_right(self._times, t) - 1
        return self._areas[i] + self._levels[i] * (t - self._times[i])

    def mean_percent(self, start: float, end: float) -> float:
        if end <= start:
            raise EmptyWindowError(f"window [{start}, {end}] is empty")
        area = self._cum_area(end) - self._cum_area(start)
        return 100.0 * area / (self.capacity * (end - start))


@dataclass
class Counters:
    requests: int = 0
    grants: int = 0
    grants_with_preemption: int = 0
    blocks: dict[str, int] = field(default_factory=lambda: {r.value: 0 for r in BlockReason})
    preemptions: int = 0
    devolutions: int = 0
    model_switches: int = 0

    @property
    def blocked_total(self) -> int:
        return sum(self.blocks.values())

    def to_dict(self) -> dict:
        return {
            "requests": self.requests,
            "grants": self.grants,
            "grants_with_preemption": self.grants_with_preemption,
            "blocks": dict(sorted(self.blocks.items())),
            "blocked_total": self.blocked_total,
            "preemptions": self.preemptions,
            "devolutions": self.devolutions,
            "model_switches": self.model_switches,
        }


def _rate(numerator: int, denominator: int) -> float | None:
    return None if denominator == 0 else numerator / denominator


class StatsStore:
    """Per-run metric sink fed by the engine."""

    def __init__(self, link_capacities: dict[str, int], class_count: int,
                 step: float = 60.0, ring_slots: int = 4096):
        self.step = step
        self.ring_slots = ring_slots
        self.class_count = class_count
        self.totals = Counters()
        self.per_tc = {tc: Counters() for tc in range(class_count)}
        self.per_link: dict[str, dict[int, Counters]] = {
            lid: {tc: Counters() for tc in range(class_count)} for lid in link_capacities
        }
        self.integrators = {lid: UtilizationIntegrator(cap) for lid, cap in link_capacities.items()}
        self.series: dict[str, MetricSeries] = {}
        for lid in link_capacities:
            self._make_series(f"util.{lid}", Consolidation.AVERAGE)
        for tc in range(class_count):
            self._make_series(f"blocking.tc{tc}", Consolidation.AVERAGE)
            self._make_series(f"preemption.tc{tc}", Consolidation.AVERAGE)
        self._slot_start = 0.0
        self._slot_tc = {tc: {"requests": 0, "blocks": 0, "grants": 0, "preempted": 0}
                         for tc in range(class_count)}
        self.emitted: list[dict] = []   # append-only log backing the live stream

    def _make_series(self, metric_id: str, consolidation: Consolidation) -> None:
        self.series[metric_id] = MetricSeries(metric_id, self.step, self.ring_slots, consolidation)

    # --- recording hooks ---------------------------------------------------

    def on_request(self, tc: int) -> None:
        self.totals.requests += 1
        self.per_tc[tc].requests += 1
        self._slot_tc[tc]["requests"] += 1

    def on_grant(self, tc: int, links: list[str], with_preemption: bool) -> None:
        self.totals.grants += 1
        self.per_tc[tc].grants += 1
        self._slot_tc[tc]["grants"] += 1
        if with_preemption:
            self.totals.grants_with_preemption += 1
            self.per_tc[tc].grants_with_preemption += 1
        for lid in links:
            self.per_link[lid][tc].grants += 1

    def on_block(self, tc: int, reason: BlockReason, links: list[str]) -> None:
        self.totals.blocks[reason.value] += 1
        self.per_tc[tc].blocks[reason.value] += 1
        self._slot_tc[tc]["blocks"] += 1
        for lid in links:
            self.per_link[lid][tc].blocks[reason.value] += 1

    def on_preemption(self, victim_tc: int, links: list[str]) -> None:
        self.totals.preemptions += 1
        self.per_tc[victim_tc].preemptions += 1
        self._slot_tc[victim_tc]["preempted"] += 1
        for lid in links:
            self.per_link[lid][victim_tc].preemptions += 1

    def on_devolution(self, tc: int, link: str) -> None:
        self.totals.devolutions += 1
        self.per_tc[tc].devolutions += 1
        self.per_link[link][tc].devolutions += 1

    def on_model_switch(self) -> None:
        self.totals.model_switches += 1

    def on_reserved_change(self, link: str, t: float, level_millis: int) -> None:
        self.integrators[link].update(t, level_millis)

    # --- consolidation -----------------------------------------------------

    def tick(self, t: float) -> list[dict]:
        """Close every whole slot ending at or before t; returns emitted samples."""
        new: list[dict] = []
        while self._slot_start + self.step <= t + 1e-9:
            end = self._slot_start + self.step
            new.extend(self._close_slot(self._slot_start, end))
            self._slot_start = end
        return new

    def finalize(self, t: float) -> list[dict]:
        """Close remaining slots including a trailing partial one."""
        new = self.tick(t)
        if t > self._slot_start:
            new.extend(self._close_slot(self._slot_start, t))
            self._slot_start = t
        return new

    def _close_slot(self, start: float, end: float) -> list[dict]:
        emitted = []
        for lid, integ in self.integrators.items():
            value = integ.mean_percent(start, end)
            emitted.append(self._push(f"util.{lid}", start, value))
        for tc, slot in self._slot_tc.items():
            blocking = _rate(slot["blocks"], slot["requests"])
            emitted.append(self._push(f"blocking.tc{tc}", start, blocking))
            preemption = _rate(slot["preempted"], slot["grants"] + slot["preempted"])
            emitted.append(self._push(f"preemption.tc{tc}", start, preemption))
            slot.update(requests=0, blocks=0, grants=0, preempted=0)
        return emitted

    def _push(self, metric_id: str, slot_start: float, value: float | None) -> dict:
        self.series[metric_id].push(slot_start, value)
        sample = {
            "cursor": len(self.emitted),
            "metric_id": metric_id,
            "slot_start_s": slot_start,
            "value": value,
        }
        self.emitted.append(sample)
        return sample

    # --- queries / export ----------------------------------------------------

    def utilization(self, link: str, start: float, end: float) -> float:
        if link not in self.integrators:
            raise UnknownMetricError(f"unknown link {link}")
        return self.integrators[link].mean_percent(start, end)

    def series_snapshot(self, metric_id: str) -> list[tuple[float, float | None]]:
        if metric_id not in self.series:
            raise UnknownMetricError(f"unknown metric {metric_id}")
        return self.series[metric_id].snapshot()

    def samples_since(self, cursor: int) -> list[dict]:
        return self.emitted[cursor:]

    def export_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["metric_id", "slot_start_s", "value"])
        for metric_id in sorted(self.series):
            for slot_start, value in self.series[metric_id].snapshot():
                writer.writerow([metric_id, repr(slot_start), "" if value is None else repr(value)])
        return buf.getvalue()

    def summary_dict(self, end_time: float | None = None) -> dict:
        totals = self.totals
        util = {}
        if end_time and end_time > 0:
            util = {lid: integ.mean_percent(0.0, end_time) for lid, integ in self.integrators.items()}
        return {
            "schema": "dstesim.summary.v1",
            "counters": totals.to_dict(),
            "per_tc": {str(tc): c.to_dict() for tc, c in self.per_tc.items()},
            "rates": {
                "blocking_probability": _rate(totals.blocked_total, totals.requests),
                "preemption_rate": _rate(totals.preemptions, totals.grants),
            },
            "utilization_percent": util,
        }

    def export_summary_json(self, end_time: float | None = None) -> str:
        return json.dumps(self.summary_dict(end_time), sort_keys=True, indent=2)
