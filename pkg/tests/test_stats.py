import csv
import io
import json

import pytest

from dstesim.domain import BlockReason
from dstesim.stats import (
    Consolidation,
    EmptyWindowError,
    MetricSeries,
    StatsStore,
    UnknownMetricError,
    UtilizationIntegrator,
)


def store(step=60.0, slots=4096):
    return StatsStore({"0->1": 100_000}, class_count=2, step=step, ring_slots=slots)


class TestCounters:
    def test_grant_increments(self):
        s = store()
        s.on_request(0)
        s.on_grant(0, ["0->1"], with_preemption=False)
        assert s.totals.grants == 1 and s.per_link["0->1"][0].grants == 1

    def test_block_by_reason(self):
        s = store()
        s.on_request(1)
        s.on_block(1, BlockReason.CONSTRAINT, ["0->1"])
        assert s.totals.blocks["CONSTRAINT"] == 1
        assert s.per_tc[1].blocks["CONSTRAINT"] == 1

    def test_preemption_counts_once(self):
        s = store()
        s.on_preemption(0, ["0->1"])
        assert s.totals.preemptions == 1


class TestUtilization:
    def test_constant_level(self):
        s = store()
        s.on_reserved_change("0->1", 0.0, 20_000)
        assert s.utilization("0->1", 0.0, 100.0) == pytest.approx(20.0)

    def test_time_weighted_half_window(self):
        s = store()
        s.on_reserved_change("0->1", 0.0, 50_000)
        s.on_reserved_change("0->1", 50.0, 0)
        assert s.utilization("0->1", 0.0, 100.0) == pytest.approx(25.0)

    def test_empty_window(self):
        s = store()
        with pytest.raises(EmptyWindowError):
            s.utilization("0->1", 10.0, 10.0)

    def test_unknown_link(self):
        with pytest.raises(UnknownMetricError):
            store().utilization("9->9", 0, 1)


class TestSeries:
    def test_constant_signal_slots(self):
        s = store(step=60.0, slots=10)
        s.on_reserved_change("0->1", 0.0, 30_000)
        s.tick(600.0)
        snap = s.series_snapshot("util.0->1")
        assert len(snap) == 10
        assert all(v == pytest.approx(30.0) for _, v in snap)

    def test_ring_overwrites_old_slots(self):
        series = MetricSeries("m", 60.0, 4)
        for k in range(6):
            series.push(k * 60.0, float(k))
        snap = series.snapshot()
        assert [v for _, v in snap] == [2.0, 3.0, 4.0, 5.0]
        assert [t for t, _ in snap] == [120.0, 180.0, 240.0, 300.0]

    def test_max_consolidation_keeps_spike(self):
        series = MetricSeries("m", 60.0, 4, Consolidation.MAX)
        series.push(0.0, 99.0)
        assert series.snapshot()[-1][1] == 99.0

    def test_unknown_metric(self):
        with pytest.raises(UnknownMetricError):
            store().series_snapshot("nope")

    def test_blocking_rate_null_without_requests(self):
        s = store()
        s.tick(60.0)
        snap = s.series_snapshot("blocking.tc0")
        assert snap[-1][1] is None


class TestExport:
    def test_summary_rates(self):
        s = store()
        for _ in range(50):
            s.on_request(0)
        for _ in range(45):
            s.on_grant(0, [], with_preemption=False)
        for _ in range(5):
            s.on_block(0, BlockReason.CAPACITY, [])
        summary = s.summary_dict()
        assert summary["rates"]["blocking_probability"] == pytest.approx(0.1)

    def test_zero_requests_is_null_not_zero(self):
        summary = store().summary_dict()
        assert summary["rates"]["blocking_probability"] is None
        assert json.loads(store().export_summary_json())["rates"]["preemption_rate"] is None

    def test_csv_roundtrip_matches_snapshot(self):
        s = store(step=60.0, slots=8)
        s.on_reserved_change("0->1", 0.0, 10_000)
        s.tick(240.0)
        rows = list(csv.reader(io.StringIO(s.export_csv())))
        assert rows[0] == ["metric_id", "slot_start_s", "value"]
        util_rows = [r for r in rows[1:] if r[0] == "util.0->1"]
        snap = s.series_snapshot("util.0->1")
        assert len(util_rows) == len(snap)
        for row, (slot_start, value) in zip(util_rows, snap):
            assert float(row[1]) == slot_start
            assert float(row[2]) == pytest.approx(value)


class TestIntegrator:
    def test_partial_slot_average(self):
        integ = UtilizationIntegrator(100_000)
        integ.update(0.0, 100_000)
        integ.update(30.0, 0)
        assert integ.mean_percent(0.0, 60.0) == pytest.approx(50.0)

    def test_bounds(self):
        integ = UtilizationIntegrator(100_000)
        integ.update(0.0, 100_000)
        assert 0.0 <= integ.mean_percent(0.0, 10.0) <= 100.0
