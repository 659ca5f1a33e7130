"""Engine behavior: deterministic lifecycles, rollback, preemption, switches."""

import json

import pytest

from dstesim.bam import GbamConfig, SwitchPolicy
from dstesim.domain import Bandwidth, bc_vector
from dstesim.engine import (
    ModelSwitchSpec,
    RoutingMode,
    Scenario,
    ScenarioInvalidError,
    SingleRun,
    StopCondition,
    run,
    trace_to_jsonl,
)
from dstesim.routing import default_matrix
from dstesim.topology import builtin, parse_topology, with_bc
from dstesim.traffic import (
    ClassTrafficSpec,
    Deterministic,
    Exponential,
    FixedBandwidth,
    FixedEndpoints,
)


def det_spec(tc=0, period=60.0, hold=30.0, bw=10, src=0, dst=1):
    return ClassTrafficSpec(
        tc=tc,
        interarrival=Deterministic(period),
        holding=Deterministic(hold),
        bandwidth=FixedBandwidth(Bandwidth.from_mbps(bw)),
        endpoints=FixedEndpoints(src, dst),
    )


def ptp_scenario(bc, cfg, specs, stop_time=600.0, seeds=(42,), **kw):
    topo = with_bc(builtin("PTP-2n-1e"), bc_vector(bc))
    return Scenario(
        name="test",
        topology=topo,
        class_count=3,
        bam=cfg,
        routing=RoutingMode.STATIC,
        static_routes=default_matrix(topo),
        traffic_specs=tuple(specs),
        stop=StopCondition(max_time=stop_time),
        seeds=tuple(seeds),
        **kw,
    )


class TestBasicLifecycle:
    def test_non_overlapping_grants(self):
        # 1 req / 60 s of 10 Mb/s, hold 30 s on a 100 Mb/s link: all granted.
        scenario = ptp_scenario([100, 0, 0], GbamConfig.mam(3), [det_spec()], stop_time=600.0)
        report = run(scenario)[0]
        assert report.requests == 10
        assert report.grants == 10
        assert report.blocked_total == 0

    def test_constraint_saturation_blocks(self):
        # hold 3600 s, bc [50,..]: five 10 Mb/s grants fill the class quota.
        scenario = ptp_scenario([50, 30, 20], GbamConfig.mam(3),
                                [det_spec(hold=3600.0)], stop_time=600.0)
        report = run(scenario)[0]
        assert report.requests == 10
        assert report.grants == 5
        assert report.blocks["CONSTRAINT"] == 5

    def test_accounting_identity(self):
        scenario = ptp_scenario([50, 30, 20], GbamConfig.mam(3),
                                [det_spec(hold=3600.0)], stop_time=600.0)
        report = run(scenario)[0]
        assert report.grants + report.blocked_total == report.requests

    def test_departures_restore_zero(self):
        scenario = ptp_scenario([100, 0, 0], GbamConfig.mam(3), [det_spec()], stop_time=600.0)
        sim = SingleRun(scenario, 0)
        sim.run_to_completion()
        assert sim.drain_check()

    def test_max_lsps_stop(self):
        scenario = ptp_scenario([100, 0, 0], GbamConfig.mam(3), [det_spec()])
        scenario.stop = StopCondition(max_lsps=4)
        report = run(scenario)[0]
        assert report.requests == 4


class TestDeterminism:
    def test_identical_seeds_identical_reports(self):
        spec = ClassTrafficSpec(0, Exponential(0.05), Exponential(1 / 40),
                                FixedBandwidth(Bandwidth.from_mbps(10)), FixedEndpoints(0, 1))
        scenario = ptp_scenario([100, 0, 0], GbamConfig.mam(3), [spec],
                                stop_time=2000.0, seeds=(7, 7))
        a, b = run(scenario)
        assert a.canonical_dict()["requests"] == b.canonical_dict()["requests"]
        assert json.dumps(a.canonical_dict()) == json.dumps(
            {**b.canonical_dict(), "run_index": 0, "seed": 7})

    def test_serial_equals_parallel(self):
        spec = ClassTrafficSpec(0, Exponential(0.05), Exponential(1 / 40),
                                FixedBandwidth(Bandwidth.from_mbps(10)), FixedEndpoints(0, 1))
        scenario = ptp_scenario([100, 0, 0], GbamConfig.mam(3), [spec],
                                stop_time=2000.0, seeds=(1, 2, 3))
        serial = [trace_to_jsonl(r.trace) for r in run(scenario)]
        parallel = [trace_to_jsonl(r.trace) for r in run(scenario, parallel=True)]
        assert serial == parallel


class TestMultiLink:
    CHAIN = """
TOPOLOGY chain
CLASSES 1
NODE 0
NODE 1
NODE 2
LINK 0 1 CAP 100 BC 100
LINK 1 2 CAP 50 BC 50
"""

    def chain_scenario(self, hold=3600.0, bw=30, stop=200.0):
        topo = parse_topology(self.CHAIN)
        return Scenario(
            name="chain",
            topology=topo,
            class_count=1,
            bam=GbamConfig.mam(1),
            routing=RoutingMode.STATIC,
            static_routes=default_matrix(topo),
            traffic_specs=(ClassTrafficSpec(
                0, Deterministic(60.0), Deterministic(hold),
                FixedBandwidth(Bandwidth.from_mbps(bw)), FixedEndpoints(0, 2)),),
            stop=StopCondition(max_time=stop),
            seeds=(1,),
        )

    def test_rollback_leaves_first_link_untouched(self):
        # Second link (50) saturates first; the blocked request must not leak
        # reservations onto the first link.
        scenario = self.chain_scenario()
        sim = SingleRun(scenario, 0)
        sim.run_to_completion()
        # arrivals at 60 and 120 granted (30+30 > 50 on link 1->2? 2nd blocks)
        report = sim.report()
        assert report.grants == 1
        assert report.blocked_total == 2
        assert sim.states["0->1"].total_used == 30_000
        assert sim.states["1->2"].total_used == 30_000

    def test_no_route_block(self):
        topo = parse_topology(self.CHAIN)
        scenario = self.chain_scenario()
        scenario.static_routes.entries.pop((0, 2))
        report = run(scenario)[0]
        assert report.blocks["NO_ROUTE"] == report.requests


class TestPreemption:
    def test_scripted_preemption(self):
        # Low-priority traffic borrows the high pool; one high arrival reclaims it.
        topo = with_bc(builtin("PTP-2n-1e"), bc_vector([100, 60, 30]))
        scenario = Scenario(
            name="preempt",
            topology=topo,
            class_count=3,
            bam=GbamConfig.rdm(3),
            routing=RoutingMode.STATIC,
            static_routes=default_matrix(topo),
            traffic_specs=(
                det_spec(tc=0, period=50.0, hold=10_000.0, bw=30),
                det_spec(tc=2, period=160.0, hold=10_000.0, bw=20),
            ),
            stop=StopCondition(max_time=480.0),
            seeds=(5,),
        )
        report = run(scenario)[0]
        # class-0 arrivals at 50..: by 160 s three grants (90 Mb/s; 50 spill).
        # class-2 arrivals at 160/320/480 need the inner doll back.
        assert report.preemptions > 0
        assert report.grants_with_preemption > 0
        sim_blocks = report.blocks
        assert report.grants + sum(sim_blocks.values()) == report.requests

    def test_preempted_departure_tombstoned(self):
        topo = with_bc(builtin("PTP-2n-1e"), bc_vector([100, 60, 30]))
        scenario = Scenario(
            name="preempt2",
            topology=topo,
            class_count=3,
            bam=GbamConfig.rdm(3),
            routing=RoutingMode.STATIC,
            static_routes=default_matrix(topo),
            traffic_specs=(
                det_spec(tc=0, period=25.0, hold=200.0, bw=30),
                det_spec(tc=2, period=110.0, hold=200.0, bw=30),
            ),
            stop=StopCondition(max_time=1000.0),
            seeds=(5,),
        )
        sim = SingleRun(scenario, 0)
        sim.run_to_completion()     # raises if a tombstoned departure resurfaces
        assert sim.report().preemptions > 0
        assert sim.drain_check()


class TestModelSwitch:
    def test_switch_on_idle_network(self):
        scenario = ptp_scenario([40, 30, 30], GbamConfig.mam(3),
                                [det_spec(period=10_000.0)], stop_time=400.0,
                                model_switches=(ModelSwitchSpec(100.0, GbamConfig.atcs(3)),))
        report = run(scenario)[0]
        assert len(report.switch_reports) == 1
        assert report.switch_reports[0]["non_conformant"] == []

    def test_atcs_to_mam_reports_loans(self):
        # tc2 holds 30+25 with bc2=30: the 25 spills via LTH loan, then MAM
        # strands it.
        topo = with_bc(builtin("PTP-2n-1e"), bc_vector([40, 30, 30]))
        scenario = Scenario(
            name="loans",
            topology=topo,
            class_count=3,
            bam=GbamConfig.atcs(3),
            routing=RoutingMode.STATIC,
            static_routes=default_matrix(topo),
            traffic_specs=(det_spec(tc=2, period=30.0, hold=10_000.0, bw=25),),
            stop=StopCondition(max_time=200.0),
            seeds=(9,),
            model_switches=(ModelSwitchSpec(100.0, GbamConfig.mam(3)),),
        )
        report = run(scenario)[0]
        assert report.switch_reports[0]["non_conformant"]

    def test_switch_applies_before_same_time_arrival(self):
        # Switch scheduled exactly at an arrival instant: arrival sees new model.
        scenario = ptp_scenario([40, 30, 30], GbamConfig.mam(3),
                                [det_spec(tc=0, period=60.0, hold=10.0)], stop_time=120.0,
                                model_switches=(ModelSwitchSpec(60.0, GbamConfig.atcs(3)),))
        sim = SingleRun(scenario, 0)
        sim.run_to_completion()
        kinds = [(rec["time"], rec["kind"]) for rec in sim.trace
                 if rec["time"] == 60.0 and rec["kind"] in ("ARRIVAL", "MODEL_SWITCH")]
        assert kinds == [(60.0, "MODEL_SWITCH"), (60.0, "ARRIVAL")]

    def test_invalid_switch_rejected_upfront(self):
        scenario = ptp_scenario([40, 30, 30], GbamConfig.mam(3), [det_spec()],
                                model_switches=(ModelSwitchSpec(10.0, GbamConfig.rdm(3)),))
        with pytest.raises(ScenarioInvalidError):
            run(scenario)


class TestAccountingIdentities:
    def test_active_count_equals_grants_minus_departures_minus_preemptions(self):
        topo = with_bc(builtin("PTP-2n-1e"), bc_vector([100, 60, 30]))
        scenario = Scenario(
            name="acct",
            topology=topo,
            class_count=3,
            bam=GbamConfig.rdm(3),
            routing=RoutingMode.STATIC,
            static_routes=default_matrix(topo),
            traffic_specs=(
                det_spec(tc=0, period=40.0, hold=500.0, bw=25),
                det_spec(tc=2, period=130.0, hold=500.0, bw=20),
            ),
            stop=StopCondition(max_time=1500.0),
            seeds=(3,),
        )
        sim = SingleRun(scenario, 0)
        active = 0
        while sim.step():
            rec = sim.trace[-1]
            if rec["kind"] == "ARRIVAL":
                decision = rec["payload"]["decision"]
                if decision["kind"] != "BLOCKED":
                    active += 1
                active -= len(decision.get("victims", []))
            elif rec["kind"] == "DEPARTURE":
                active -= 1
            assert sim.active_count() == active
        report = sim.report()
        departures = sum(1 for r in sim.trace if r["kind"] == "DEPARTURE")
        assert sim.active_count() == report.grants - departures - report.preemptions


class TestScenarioValidation:
    def test_seed_required(self):
        scenario = ptp_scenario([40, 30, 30], GbamConfig.mam(3), [det_spec()], seeds=())
        with pytest.raises(ScenarioInvalidError):
            scenario.validate()

    def test_bc_must_satisfy_model(self):
        scenario = ptp_scenario([60, 30, 20], GbamConfig.atcs(3), [det_spec()])
        with pytest.raises(ScenarioInvalidError):
            scenario.validate()
