import json

import pytest

from dstesim.bam import GbamConfig, SwitchPolicy
from dstesim.domain import BamModel
from dstesim.engine import ModelSwitchSpec, RoutingMode
from dstesim.script import (
    ScriptParseError,
    ScriptSemanticError,
    execute_script,
    parse_script,
    serialize_scenario,
)

SMOKE = """\
TOPOLOGY BUILTIN PTP-2n-1e
CLASSES 3
BAM MAM
BC ALL 50 30 20
TRAFFIC TC 0 POISSON 0.01 HOLD EXP 60 BW DET 10
ROUTE STATIC DEFAULT
STOP TIME 3600
SEEDS 42
RUN
"""


class TestParse:
    def test_smoke_script(self):
        scenario = parse_script(SMOKE)
        assert scenario.class_count == 3
        assert scenario.bam.model is BamModel.MAM
        assert scenario.stop.max_time == 3600.0
        assert scenario.seeds == (42,)
        assert scenario.routing is RoutingMode.STATIC

    def test_unknown_verb_is_parse_error_with_line(self):
        with pytest.raises(ScriptParseError) as err:
            parse_script(SMOKE.replace("TICK", "TICK").replace("RUN", "FROB 1\nRUN"))
        assert err.value.line == 9

    def test_bam_before_classes_is_semantic(self):
        bad = SMOKE.replace("CLASSES 3\nBAM MAM", "BAM MAM\nCLASSES 3")
        with pytest.raises(ScriptSemanticError):
            parse_script(bad)

    def test_atcs_bc_over_capacity_is_semantic(self):
        bad = SMOKE.replace("BAM MAM", "BAM ATCS").replace("BC ALL 50 30 20", "BC ALL 60 30 20")
        with pytest.raises(ScriptSemanticError) as err:
            parse_script(bad)
        assert "sum of BC exceeds capacity" in str(err.value)

    def test_missing_run(self):
        with pytest.raises(ScriptSemanticError):
            parse_script(SMOKE.replace("RUN\n", ""))

    def test_table1_profile(self):
        text = SMOKE.replace("TRAFFIC TC 0 POISSON 0.01 HOLD EXP 60 BW DET 10",
                             "PROFILE TABLE1").replace("BC ALL 50 30 20", "BC ALL 40 30 30")
        scenario = parse_script(text)
        assert scenario.schedule is not None
        assert len(scenario.schedule.phases) == 6

    def test_switch_statement(self):
        text = SMOKE.replace("BC ALL 50 30 20",
                             "BC ALL 40 30 30").replace(
            "ROUTE STATIC DEFAULT",
            "ROUTE STATIC DEFAULT\nSWITCH MODEL ATCS AT 1800")
        scenario = parse_script(text)
        assert scenario.model_switches == (
            ModelSwitchSpec(1800.0, GbamConfig.atcs(3), None, SwitchPolicy.GRANDFATHER),)

    def test_trace_traffic(self, tmp_path):
        trace = tmp_path / "t.csv"
        trace.write_text("arrival_s,tc,bandwidth_mbps,src,dst,holding_s\n1.0,0,10,0,1,60\n")
        text = SMOKE.replace("TRAFFIC TC 0 POISSON 0.01 HOLD EXP 60 BW DET 10",
                             "TRAFFIC TRACE t.csv")
        scenario = parse_script(text, base_dir=tmp_path)
        assert len(scenario.trace_requests) == 1


class TestExecute:
    def test_smoke_end_to_end(self, tmp_path):
        reports = execute_script(SMOKE, export_dir=tmp_path, trace=True)
        assert len(reports) == 1
        report = reports[0]
        assert report.requests > 0
        assert report.grants + report.blocked_total == report.requests
        summary = json.loads((tmp_path / "run0_summary.json").read_text())
        assert summary["counters"]["requests"] == report.requests
        assert (tmp_path / "run0_metrics.csv").exists()
        assert (tmp_path / "run0_trace.jsonl").exists()

    def test_route_cspf_runs(self, tmp_path):
        text = SMOKE.replace("ROUTE STATIC DEFAULT", "ROUTE CSPF")
        reports = execute_script(text)
        assert reports[0].requests > 0


class TestSerialize:
    def test_parse_serialize_roundtrip_smoke(self):
        scenario = parse_script(SMOKE)
        assert parse_script(serialize_scenario(scenario)) == scenario

    def test_roundtrip_with_switches_and_profile(self):
        text = """\
NAME overload-study
TOPOLOGY BUILTIN PTP-2n-1e
CLASSES 3
BAM RDM PREEMPT ON
BC ALL 100 60 30
PROFILE TABLE1 HOLD 90 BW 1,2,5 SRC 0 DST 1
ROUTE STATIC DEFAULT
SWITCH MODEL MAM AT 10800 BC 40,30,30
STOP TIME 21600
SEEDS 1 2 3
TICK 60
RUN
"""
        scenario = parse_script(text)
        assert parse_script(serialize_scenario(scenario)) == scenario

    def test_roundtrip_per_link_bc(self):
        text = SMOKE.replace("BC ALL 50 30 20", "BC LINK 0 1 25 10 5")
        scenario = parse_script(text)
        assert parse_script(serialize_scenario(scenario)) == scenario

    def test_roundtrip_uniform_and_choice(self):
        text = SMOKE.replace(
            "TRAFFIC TC 0 POISSON 0.01 HOLD EXP 60 BW DET 10",
            "TRAFFIC TC 0 UNIFORM 5 15 HOLD DET 30 BW CHOICE 1,2,5 SRC 0 DST 1\n"
            "TRAFFIC TC 2 POISSON 0.02 HOLD EXP 45 BW DET 2.5")
        scenario = parse_script(text)
        assert parse_script(serialize_scenario(scenario)) == scenario
