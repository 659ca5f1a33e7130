"""HTTP control-plane contracts, exercised through the ASGI test client."""

import json
import time

import pytest
from fastapi.testclient import TestClient

from dstesim.advisor import Case, CaseBase
from dstesim.domain import BamModel
from dstesim.service.app import create_app


@pytest.fixture()
def client():
    base = CaseBase(dimension=3)
    base.cases.append(Case((1.0, 0.0, 0.0), BamModel.ATCS, (0.4, 0.3, 0.3), 0.9))
    app = create_app(case_base=base)
    with TestClient(app) as c:
        yield c


def det_scenario(stop_time=600.0, period=60.0, seeds=(42,), switches=()):
    return {
        "name": "svc-test",
        "topology": {"builtin": "PTP-2n-1e"},
        "classes": 3,
        "bam": {"model": "MAM"},
        "bc_all": [50, 30, 20],
        "traffic": {"specs": [{
            "tc": 0,
            "arrival": {"kind": "deterministic", "value": period},
            "holding": {"kind": "deterministic", "value": 30.0},
            "bandwidth": {"kind": "deterministic", "value": 10},
            "src": 0, "dst": 1,
        }]},
        "routing": "STATIC",
        "stop": {"max_time": stop_time},
        "seeds": list(seeds),
        "switches": list(switches),
    }


def wait_done(client, sid, timeout=10.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        state = client.get(f"/sessions/{sid}").json()
        if state["status"] == "DONE":
            return state
        time.sleep(0.02)
    raise AssertionError("session did not finish in time")


class TestSessionLifecycle:
    def test_create_returns_201_and_state(self, client):
        resp = client.post("/sessions", json=det_scenario())
        assert resp.status_code == 201
        state = resp.json()
        assert state["status"] == "IDLE"
        assert state["session_id"]

    def test_invalid_scenario_400(self, client):
        bad = det_scenario()
        bad["bam"] = {"model": "ATCS"}
        bad["bc_all"] = [60, 30, 20]  # sum > capacity
        resp = client.post("/sessions", json=bad)
        assert resp.status_code == 400

    def test_unknown_session_404(self, client):
        assert client.get("/sessions/nope").status_code == 404
        assert client.post("/sessions/nope/start").status_code == 404

    def test_full_run(self, client):
        sid = client.post("/sessions", json=det_scenario()).json()["session_id"]
        assert client.post(f"/sessions/{sid}/start").status_code == 200
        state = wait_done(client, sid)
        assert state["counters"]["requests"] == 10
        report = client.get(f"/sessions/{sid}/report").json()
        assert report["runs"][0]["grants"] == 10

    def test_start_on_done_409(self, client):
        sid = client.post("/sessions", json=det_scenario()).json()["session_id"]
        client.post(f"/sessions/{sid}/start")
        wait_done(client, sid)
        assert client.post(f"/sessions/{sid}/start").status_code == 409

    def test_resume_on_idle_409(self, client):
        sid = client.post("/sessions", json=det_scenario()).json()["session_id"]
        assert client.post(f"/sessions/{sid}/resume").status_code == 409


class TestStepping:
    def test_step_applies_exactly_n_events(self, client):
        sid = client.post("/sessions", json=det_scenario()).json()["session_id"]
        client.post(f"/sessions/{sid}/start", params={"paused": "true"})
        assert client.get(f"/sessions/{sid}").json()["events_processed"] == 0
        state = client.post(f"/sessions/{sid}/step", params={"events": 1}).json()
        assert state["events_processed"] == 1
        trace = client.get(f"/sessions/{sid}/trace").text.strip().splitlines()
        assert len(trace) == 1
        state = client.post(f"/sessions/{sid}/step", params={"events": 3}).json()
        assert state["events_processed"] == 4

    def test_step_requires_paused(self, client):
        sid = client.post("/sessions", json=det_scenario()).json()["session_id"]
        assert client.post(f"/sessions/{sid}/step").status_code == 409


class TestModelSwitch:
    def test_live_switch_returns_report(self, client):
        sid = client.post("/sessions", json=det_scenario(stop_time=1200.0)).json()["session_id"]
        client.post(f"/sessions/{sid}/start", params={"paused": "true"})
        resp = client.post(f"/sessions/{sid}/model",
                           json={"bam": {"model": "ATCS"}, "bc": [40, 30, 30]})
        assert resp.status_code == 200
        report = resp.json()
        assert report["model"] == "ATCS"
        assert "non_conformant" in report
        state = client.get(f"/sessions/{sid}").json()
        assert state["model"] == "ATCS"

    def test_invalid_switch_400(self, client):
        sid = client.post("/sessions", json=det_scenario()).json()["session_id"]
        client.post(f"/sessions/{sid}/start", params={"paused": "true"})
        resp = client.post(f"/sessions/{sid}/model", json={"bam": {"model": "RDM"}})
        assert resp.status_code == 400  # bc [50,30,20] is not a valid nesting

    def test_switch_on_idle_409(self, client):
        sid = client.post("/sessions", json=det_scenario()).json()["session_id"]
        resp = client.post(f"/sessions/{sid}/model", json={"bam": {"model": "ATCS"}})
        assert resp.status_code == 409

    def test_bc_retune(self, client):
        sid = client.post("/sessions", json=det_scenario()).json()["session_id"]
        client.post(f"/sessions/{sid}/start", params={"paused": "true"})
        resp = client.post(f"/sessions/{sid}/bc", json={"bc": [60, 25, 15]})
        assert resp.status_code == 200
        assert resp.json()["recharged"] >= 0


class TestMetrics:
    def test_since_cursor_delta(self, client):
        sid = client.post("/sessions", json=det_scenario()).json()["session_id"]
        client.post(f"/sessions/{sid}/start")
        wait_done(client, sid)
        first = client.get(f"/sessions/{sid}/metrics").json()
        assert first["samples"], "expected consolidated samples"
        cursor = first["samples"][3]["cursor"] + 1
        rest = client.get(f"/sessions/{sid}/metrics", params={"since": cursor}).json()
        assert rest["samples"][0]["cursor"] == cursor
        assert len(first["samples"]) == cursor + len(rest["samples"])

    def test_stream_delivers_all_slots(self, client):
        sid = client.post("/sessions", json=det_scenario()).json()["session_id"]
        client.post(f"/sessions/{sid}/start")
        wait_done(client, sid)
        collected = []
        with client.stream("GET", f"/sessions/{sid}/stream") as resp:
            for line in resp.iter_lines():
                if line.startswith("data: "):
                    collected.append(json.loads(line[6:]))
                if line.startswith("event: end"):
                    break
        expected = client.get(f"/sessions/{sid}/metrics").json()["samples"]
        assert [s["cursor"] for s in collected] == [s["cursor"] for s in expected]

    def test_stream_reconnect_with_cursor_no_gaps_or_dups(self, client):
        sid = client.post("/sessions", json=det_scenario()).json()["session_id"]
        client.post(f"/sessions/{sid}/start")
        wait_done(client, sid)
        part1 = []
        with client.stream("GET", f"/sessions/{sid}/stream") as resp:
            for line in resp.iter_lines():
                if line.startswith("data: "):
                    part1.append(json.loads(line[6:]))
                    if len(part1) >= 5:
                        break  # simulate a dropped connection
        since = part1[-1]["cursor"] + 1
        part2 = []
        with client.stream("GET", f"/sessions/{sid}/stream", params={"since": since}) as resp:
            for line in resp.iter_lines():
                if line.startswith("data: "):
                    part2.append(json.loads(line[6:]))
                if line.startswith("event: end"):
                    break
        cursors = [s["cursor"] for s in part1 + part2]
        assert cursors == list(range(len(cursors))), "gap or duplicate in slot stream"


class TestAdvisorEndpoints:
    def test_recommend(self, client):
        resp = client.post("/advisor/recommend", json={"features": [1.0, 0.0, 0.0]})
        assert resp.status_code == 200
        body = resp.json()
        assert body["model"] == "ATCS"
        assert body["confidence"] == pytest.approx(1.0)

    def test_dimension_mismatch_400(self, client):
        resp = client.post("/advisor/recommend", json={"features": [1.0]})
        assert resp.status_code == 400

    def test_retain_grows_base(self, client):
        resp = client.post("/advisor/retain", json={
            "features": [0.2, 0.3, 0.5], "model": "RDM",
            "bc_fractions": [1.0, 0.6, 0.3], "score": 0.8})
        assert resp.status_code == 201
        assert resp.json()["cases"] == 2
