"""Deterministic discrete-event core: event queue, LSP lifecycle, model switches.

Event ordering: the heap is keyed by (time, tier, insertion counter) where
control events (model/profile switches) occupy tier 0, stats ticks tier 1 and
traffic tier 2, so reconfiguration at time T always lands before traffic at T.
The public `seq` on trace records is the processing index, which makes traces
from a batch-scheduled switch and a live-injected switch byte-identical.

Multi-link admission is all-or-nothing: resolution (devolution, then
preemption) runs on scratch copies of the path's link states and commits only
if every link succeeds; a failure anywhere leaves the network untouched.
"""

from __future__ import annotations

import heapq
import json
import time as _time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

from . import bam
from .bam import (
    AdmissionKind,
    GbamConfig,
    InvalidConfigError,
    LinkState,
    SwitchPolicy,
)
from .domain import (
    Bandwidth,
    BlockReason,
    Decision,
    DecisionKind,
    LspRequest,
    RequestFactory,
    SimError,
    link_id,
    validate_constraints,
)
from .routing import RouteMatrix, cspf, default_matrix, static_route
from .stats import StatsStore
from .topology import Topology, with_bc
from .traffic import ClassStream, ClassTrafficSpec, Exponential, ProfileSchedule

__all__ = [
    "EventKind", "RoutingMode", "ModelSwitchSpec", "StopCondition", "Scenario",
    "RunReport", "SingleRun", "run", "ScenarioInvalidError",
]


class ScenarioInvalidError(SimError):
    pass


class EventKind(str, Enum):
    ARRIVAL = "ARRIVAL"
    DEPARTURE = "DEPARTURE"
    PROFILE_SWITCH = "PROFILE_SWITCH"
    MODEL_SWITCH = "MODEL_SWITCH"
    STATS_TICK = "STATS_TICK"


_TIER = {
    EventKind.MODEL_SWITCH: 0,
    EventKind.PROFILE_SWITCH: 0,
    EventKind.STATS_TICK: 1,
    EventKind.ARRIVAL: 2,
    EventKind.DEPARTURE: 2,
}


class RoutingMode(str, Enum):
    STATIC = "STATIC"
    CSPF = "CSPF"


@dataclass(frozen=True)
class ModelSwitchSpec:
    time: float
    cfg: GbamConfig
    bc: tuple[Bandwidth, ...] | None = None
    policy: SwitchPolicy = SwitchPolicy.GRANDFATHER
    links: tuple[str, ...] | None = None   # None = every link (BC retune may target one)


@dataclass(frozen=True)
class StopCondition:
    max_time: float | None = None
    max_lsps: int | None = None

    def __post_init__(self):
        if self.max_time is None and self.max_lsps is None:
            raise ScenarioInvalidError("a stop condition is required")


@dataclass
class Scenario:
    name: str
    topology: Topology
    class_count: int
    bam: GbamConfig
    routing: RoutingMode
    traffic_specs: tuple[ClassTrafficSpec, ...]
    stop: StopCondition
    seeds: tuple[int, ...]
    static_routes: RouteMatrix | None = None
    schedule: ProfileSchedule | None = None
    trace_requests: tuple[LspRequest, ...] | None = None
    model_switches: tuple[ModelSwitchSpec, ...] = ()
    stats_step: float = 60.0
    ring_slots: int = 4096

    @property
    def runs(self) -> int:
        return len(self.seeds)

    def validate(self) -> None:
        if not self.seeds:
            raise ScenarioInvalidError("at least one seed is required")
        if self.class_count < 1:
            raise ScenarioInvalidError("class_count must be >= 1")
        if self.bam.class_count != self.class_count:
            raise ScenarioInvalidError("bam config class count mismatch")
        if self.topology.class_count != self.class_count:
            raise ScenarioInvalidError("topology class count mismatch")
        if self.trace_requests is None and not self.traffic_specs:
            raise ScenarioInvalidError("traffic specs or a trace are required")
        if self.schedule is not None:
            for spec in self.traffic_specs:
                if not isinstance(spec.interarrival, Exponential):
                    raise ScenarioInvalidError(
                        "phase schedules require exponential interarrival streams")
        if self.routing is RoutingMode.STATIC and self.static_routes is None:
            raise ScenarioInvalidError("static routing requires a route matrix")
        for link in self.topology.links:
            result = validate_constraints(self.bam, link)
            if not result.ok:
                raise ScenarioInvalidError(
                    f"link {link.link_id}: " + "; ".join(result.violations))
        for switch in self.model_switches:
            bc = switch.bc
            for link in self.topology.links:
                spec = link if bc is None else replace(link, bc=bc)
                result = validate_constraints(switch.cfg, spec)
                if not result.ok:
                    raise ScenarioInvalidError(
                        f"model switch at {switch.time}s invalid on {link.link_id}: "
                        + "; ".join(result.violations))


@dataclass
class RunReport:
    run_index: int
    seed: int
    requests: int
    grants: int
    grants_with_preemption: int
    blocks: dict[str, int]
    preemptions: int
    devolutions: int
    switch_reports: list[dict]
    event_count: int
    end_time: float
    wall_time_s: float
    stats: StatsStore = field(repr=False, compare=False)
    trace: list[dict] = field(repr=False, compare=False)

    @property
    def blocked_total(self) -> int:
        return sum(self.blocks.values())

    def canonical_dict(self) -> dict:
        """Deterministic payload: excludes wall-clock diagnostics."""
        return {
            "run_index": self.run_index,
            "seed": self.seed,
            "requests": self.requests,
            "grants": self.grants,
            "grants_with_preemption": self.grants_with_preemption,
            "blocks": dict(sorted(self.blocks.items())),
            "preemptions": self.preemptions,
            "devolutions": self.devolutions,
            "switch_reports": self.switch_reports,
            "event_count": self.event_count,
            "end_time": self.end_time,
        }

    def canonical_json(self) -> str:
        return json.dumps(self.canonical_dict(), sort_keys=True)


@dataclass
class _ActiveLsp:
    lsp_id: int
    request: LspRequest
    path: tuple[int, ...]
    links: tuple[str, ...]
    departure_key: int   # insertion id of the departure event, for tombstoning


class SingleRun:
    """One seeded execution of a scenario; exposes stepping for live steering."""

    def __init__(self, scenario: Scenario, run_index: int):
        scenario.validate()
        self.scenario = scenario
        self.run_index = run_index
        self.seed = scenario.seeds[run_index]
        self.cfg = scenario.bam
        self.topology = scenario.topology
        self.states: dict[str, LinkState] = {
            l.link_id: LinkState.from_spec(l, self.cfg) for l in self.topology.links
        }
        self.stats = StatsStore(
            {l.link_id: l.capacity.millis for l in self.topology.links},
            scenario.class_count, scenario.stats_step, scenario.ring_slots)
        self.factory = RequestFactory()
        self.clock = 0.0
        self.seq = 0                      # processing index, stamped on trace records
        self._insert_counter = 0
        self._heap: list[tuple[float, int, int, EventKind, object]] = []
        self._tombstones: set[int] = set()
        self._active: dict[int, _ActiveLsp] = {}
        self._pending_arrival: dict[int, int] = {}   # tc -> insertion id
        self.trace: list[dict] = []
        self.requests_seen = 0
        self.done = False
        self._started_wall = _time.perf_counter()
        self._wall_time = 0.0
        self.switch_reports: list[dict] = []
        self._phase_idx: int | None = 0 if scenario.schedule else None

        self.streams: dict[int, ClassStream] = {}
        if scenario.trace_requests is None:
            for spec in scenario.traffic_specs:
                self.streams[spec.tc] = ClassStream(self.seed, spec)

        if scenario.routing is RoutingMode.STATIC:
            self.matrix = scenario.static_routes
        else:
            self.matrix = None

        for switch in scenario.model_switches:
            self._push(switch.time, EventKind.MODEL_SWITCH, switch)
        if scenario.schedule:
            for idx, phase in enumerate(scenario.schedule.phases[1:], start=1):
                self._push(phase.start, EventKind.PROFILE_SWITCH, idx)
        self._push(scenario.stats_step, EventKind.STATS_TICK, None)
        if scenario.trace_requests is not None:
            for req in scenario.trace_requests:
                self._push(req.arrival_time, EventKind.ARRIVAL, req)
        else:
            for tc in sorted(self.streams):
                self._schedule_next_arrival(tc, 0.0)

    # --- queue helpers -----------------------------------------------------

    def _push(self, t: float, kind: EventKind, payload) -> int:
        self._insert_counter += 1
        heapq.heappush(self._heap, (t, _TIER[kind], self._insert_counter, kind, payload))
        return self._insert_counter

    def _rate_for(self, tc: int) -> float | None:
        if self._phase_idx is None:
            return None
        schedule = self.scenario.schedule
        idx = min(self._phase_idx, len(schedule.phases) - 1)
        return schedule.phases[idx].rates[tc]

    def _schedule_next_arrival(self, tc: int, now: float) -> None:
        stream = self.streams[tc]
        gap = stream.next_interarrival(self._rate_for(tc))
        arrival = now + gap
        holding = stream.sample_holding()
        bw = stream.sample_bandwidth()
        src, dst = stream.sample_endpoints(len(self.topology.nodes))
        req = self.factory.new_request(tc, bw, src, dst, arrival, holding)
        self._pending_arrival[tc] = self._push(arrival, EventKind.ARRIVAL, req)

    # --- stepping ------------------------------------------------------------

    @property
    def next_event_time(self) -> float | None:
        while self._heap and self._heap[0][2] in self._tombstones:
            heapq.heappop(self._heap)
        return self._heap[0][0] if self._heap else None

    def _stopped_by(self, t: float) -> bool:
        stop = self.scenario.stop
        if stop.max_time is not None and t > stop.max_time:
            return True
        return False

    def step(self) -> bool:
        """Process one event; returns False once the run is complete."""
        if self.done:
            return False
        while self._heap:
            t, _, ins, kind, payload = heapq.heappop(self._heap)
            if ins in self._tombstones:
                self._tombstones.discard(ins)
                continue
            if self._stopped_by(t):
                self._finish(self.scenario.stop.max_time)
                return False
            self.clock = t
            self._dispatch(t, kind, payload)
            stop = self.scenario.stop
            if (stop.max_lsps is not None and kind is EventKind.ARRIVAL
                    and self.requests_seen >= stop.max_lsps):
                self._finish(t)
                return False
            return True
        self._finish(self.clock)
        return False

    def run_to_completion(self) -> "RunReport":
        while self.step():
            pass
        return self.report()

    def _finish(self, end_time: float) -> None:
        if not self.done:
            self.done = True
            self.end_time = end_time
            self.stats.finalize(end_time)
            self._wall_time = _time.perf_counter() - self._started_wall

    # --- dispatch ------------------------------------------------------------

    def _dispatch(self, t: float, kind: EventKind, payload) -> None:
        if kind is EventKind.ARRIVAL:
            self._on_arrival(t, payload)
        elif kind is EventKind.DEPARTURE:
            self._on_departure(t, payload)
        elif kind is EventKind.PROFILE_SWITCH:
            self._on_profile_switch(t, payload)
        elif kind is EventKind.MODEL_SWITCH:
            self._on_model_switch(t, payload)
        elif kind is EventKind.STATS_TICK:
            self.stats.tick(t)
            self._push(t + self.scenario.stats_step, EventKind.STATS_TICK, None)
            self._emit(t, EventKind.STATS_TICK, {})

    def _emit(self, t: float, kind: EventKind, payload: dict) -> None:
        self.trace.append({"time": t, "seq": self.seq, "kind": kind.value, "payload": payload})
        self.seq += 1

    # --- arrivals ------------------------------------------------------------

    def _route(self, request: LspRequest) -> tuple[int, ...] | None:
        if self.scenario.routing is RoutingMode.STATIC:
            return static_route(self.matrix, request.src, request.dst)
        return cspf(self.topology, self.states, request.src, request.dst,
                    request.tc, request.bandwidth.millis, self.cfg)

    def _on_arrival(self, t: float, request: LspRequest) -> None:
        self.requests_seen += 1
        self.stats.on_request(request.tc)
        # Stream-generated arrivals re-arm their stream; trace mode never does.
        if request.tc in self.streams:
            self._pending_arrival.pop(request.tc, None)
            self._schedule_next_arrival(request.tc, t)

        decision = self._admit_on_path(t, request)
        payload = {"request": _request_dict(request), "decision": _decision_dict(decision)}
        self._emit(t, EventKind.ARRIVAL, payload)

    def _admit_on_path(self, t: float, request: LspRequest) -> Decision:
        path = self._route(request)
        if path is None:
            decision = Decision(DecisionKind.BLOCKED, block_reason=BlockReason.NO_ROUTE)
            self.stats.on_block(request.tc, BlockReason.NO_ROUTE, [])
            return decision
        links = tuple(link_id(a, b) for a, b in zip(path, path[1:]))
        bw = request.bandwidth.millis
        tc = request.tc

        results = {lid: bam.check_admission(self.states[lid], tc, bw, self.cfg) for lid in links}
        if all(r.kind is AdmissionKind.FIT for r in results.values()):
            for lid in links:
                bam.admit(self.states[lid], request.request_id, tc, bw, results[lid].plan)
            return self._commit_grant(t, request, path, links, victims=(), devolved=0)

        for lid in links:
            if results[lid].kind is AdmissionKind.REJECT:
                reason = BlockReason(results[lid].reason.value)
                self.stats.on_block(tc, reason, list(links))
                return Decision(DecisionKind.BLOCKED, block_reason=reason)

        # Resolution phase: devolve, then preempt, on scratch copies.
        scratch = {lid: self.states[lid].clone() for lid in links}
        victims: list[int] = []
        devolved = 0
        for lid in links:
            state = scratch[lid]
            plan = bam.greedy_plan(state, tc, bw, self.cfg)
            if plan is None:
                rearranged = bam.rearrangement_plan(state, tc, bw, self.cfg)
                if rearranged is not None:
                    moves, plan = rearranged
                    bam.apply_moves(state, moves)
                    devolved += self._count_devolutions(moves, state, lid)
                else:
                    res = bam.check_admission(state, tc, bw, self.cfg)
                    if res.kind is not AdmissionKind.NEEDS_PREEMPTION:
                        reason = BlockReason((res.reason or bam.RejectReason.CONSTRAINT).value)
                        self.stats.on_block(tc, reason, list(links))
                        return Decision(DecisionKind.BLOCKED, block_reason=reason)
                    chosen = bam.select_preemption_victims(state, res.deficits, tc, self.cfg)
                    if chosen is None:
                        self.stats.on_block(tc, BlockReason.CONSTRAINT, list(links))
                        return Decision(DecisionKind.BLOCKED, block_reason=BlockReason.CONSTRAINT)
                    for victim in chosen:
                        victims.append(victim)
                        for vlid in self._active[victim].links:
                            if vlid in scratch:
                                bam.release(scratch[vlid], victim)
                    plan = bam.greedy_plan(state, tc, bw, self.cfg)
                    if plan is None:
                        rearranged = bam.rearrangement_plan(state, tc, bw, self.cfg)
                        if rearranged is None:
                            raise SimError("victim set did not cover the deficit")  # engine invariant
                        moves, plan = rearranged
                        bam.apply_moves(state, moves)
                        devolved += self._count_devolutions(moves, state, lid)
            bam.admit(state, request.request_id, tc, bw, plan)

        # Commit: swap scratch states in, tear victims down everywhere.
        for lid, state in scratch.items():
            self.states[lid] = state
        for victim in victims:
            info = self._active.pop(victim)
            self._tombstones.add(info.departure_key)
            for vlid in info.links:
                if vlid not in scratch:
                    bam.release(self.states[vlid], victim)
            self.stats.on_preemption(info.request.tc, list(info.links))
            for vlid in info.links:
                self.stats.on_reserved_change(vlid, t, self.states[vlid].reserved_millis())
        return self._commit_grant(t, request, path, links, tuple(victims), devolved)

    def _count_devolutions(self, moves, state: LinkState, lid: str) -> int:
        touched = set()
        for lsp, _, _, _ in moves:
            if lsp not in touched:
                touched.add(lsp)
                self.stats.on_devolution(state.lsp_tc[lsp], lid)
        return len(touched)

    def _commit_grant(self, t: float, request: LspRequest, path: tuple[int, ...],
                      links: tuple[str, ...], victims: tuple[int, ...], devolved: int) -> Decision:
        departure_key = self._push(t + request.holding_time, EventKind.DEPARTURE, request.request_id)
        self._active[request.request_id] = _ActiveLsp(request.request_id, request, path, links, departure_key)
        for lid in links:
            self.stats.on_reserved_change(lid, t, self.states[lid].reserved_millis())
        self.stats.on_grant(request.tc, list(links), bool(victims))
        if victims:
            return Decision(DecisionKind.GRANTED_WITH_PREEMPTION, path=path, victims=victims)
        return Decision(DecisionKind.GRANTED, path=path)

    # --- departures / switches ------------------------------------------------

    def _on_departure(self, t: float, lsp_id: int) -> None:
        info = self._active.pop(lsp_id, None)
        if info is None:
            raise SimError(f"departure for unknown lsp {lsp_id}")  # engine invariant
        released = {}
        for lid in info.links:
            bam.release(self.states[lid], lsp_id)
            self.stats.on_reserved_change(lid, t, self.states[lid].reserved_millis())
            released[lid] = info.request.bandwidth.mbps
        self._emit(t, EventKind.DEPARTURE, {
            "lsp_id": lsp_id, "tc": info.request.tc, "links": list(info.links),
            "bandwidth_mbps": info.request.bandwidth.mbps,
        })

    def _on_profile_switch(self, t: float, phase_idx: int) -> None:
        self._phase_idx = phase_idx
        # Re-sample pending arrivals under the new rates (memoryless restart).
        for tc in sorted(self.streams):
            key = self._pending_arrival.pop(tc, None)
            if key is not None:
                self._tombstones.add(key)
            self._schedule_next_arrival(tc, t)
        self._emit(t, EventKind.PROFILE_SWITCH, {"phase": phase_idx})

    def _on_model_switch(self, t: float, switch: ModelSwitchSpec) -> None:
        report = self.apply_model_switch(switch.cfg, switch.bc, switch.policy, t, switch.links)
        self._emit(t, EventKind.MODEL_SWITCH, report)

    def apply_model_switch(self, cfg: GbamConfig, bc: tuple[Bandwidth, ...] | None,
                           policy: SwitchPolicy, t: float,
                           links: tuple[str, ...] | None = None) -> dict:
        """Validate everywhere first, then switch; no partial application."""
        selected = set(links) if links is not None else set(self.states)
        for link in self.topology.links:
            if link.link_id not in selected:
                continue
            spec = link if bc is None else replace(link, bc=bc)
            result = validate_constraints(cfg, spec)
            if not result.ok:
                raise InvalidConfigError(f"{link.link_id}: " + "; ".join(result.violations))
        total_recharged = 0
        non_conformant: list[list] = []
        preempted: set[int] = set()
        for lid in sorted(selected):
            rep = bam.switch_model(self.states[lid], cfg, bc, policy)
            total_recharged += rep.recharged
            for lsp in rep.non_conformant:
                non_conformant.append([lid, lsp])
            preempted.update(rep.preempted)
        for victim in sorted(preempted):
            info = self._active.pop(victim)
            self._tombstones.add(info.departure_key)
            for vlid in info.links:
                if victim in self.states[vlid].lsp_bw:
                    bam.release(self.states[vlid], victim)
            self.stats.on_preemption(info.request.tc, list(info.links))
        if links is None:
            self.cfg = cfg
            if bc is not None:
                self.topology = with_bc(self.topology, bc)
        elif bc is not None:
            updated = tuple(replace(l, bc=bc) if l.link_id in selected else l
                            for l in self.topology.links)
            self.topology = Topology(self.topology.name, self.topology.nodes,
                                     updated, self.topology.route_entries)
        for lid in sorted(selected):
            self.stats.on_reserved_change(lid, t, self.states[lid].reserved_millis())
        self.stats.on_model_switch()
        report = {
            "time": t,
            "model": cfg.model.value,
            "links": sorted(selected) if links is not None else "all",
            "recharged": total_recharged,
            "non_conformant": sorted(non_conformant),
            "preempted": sorted(preempted),
        }
        self.switch_reports.append(report)
        return report

    # --- live steering hooks ---------------------------------------------------

    def inject_model_switch(self, cfg: GbamConfig, bc: tuple[Bandwidth, ...] | None,
                            policy: SwitchPolicy, at_time: float | None,
                            links: tuple[str, ...] | None = None) -> float:
        """Queue a switch at the given boundary (default: the next one)."""
        if at_time is None:
            nxt = self.next_event_time
            t = self.clock if nxt is None else max(self.clock, nxt)
        else:
            t = at_time
        if t < self.clock:
            raise ScenarioInvalidError(f"switch time {t} is in the past (clock {self.clock})")
        self._push(t, EventKind.MODEL_SWITCH, ModelSwitchSpec(t, cfg, bc, policy, links))
        return t

    def inject_bc_retune(self, bc: tuple[Bandwidth, ...], at_time: float | None,
                         links: tuple[str, ...] | None = None) -> float:
        return self.inject_model_switch(self.cfg, bc, SwitchPolicy.GRANDFATHER, at_time, links)

    # --- reporting ---------------------------------------------------------------

    def active_count(self) -> int:
        return len(self._active)

    def report(self) -> RunReport:
        totals = self.stats.totals
        return RunReport(
            run_index=self.run_index,
            seed=self.seed,
            requests=totals.requests,
            grants=totals.grants,
            grants_with_preemption=totals.grants_with_preemption,
            blocks=dict(totals.blocks),
            preemptions=totals.preemptions,
            devolutions=totals.devolutions,
            switch_reports=list(self.switch_reports),
            event_count=self.seq,
            end_time=getattr(self, "end_time", self.clock),
            wall_time_s=self._wall_time,
            stats=self.stats,
            trace=self.trace,
        )

    def drain_check(self) -> bool:
        """Release everything still active; True iff all links return to zero."""
        for lsp_id in sorted(self._active):
            info = self._active[lsp_id]
            for lid in info.links:
                bam.release(self.states[lid], lsp_id)
        self._active.clear()
        return all(
            s.total_used == 0 and all(v == 0 for v in s.pool_used) for s in self.states.values()
        )


def _request_dict(req: LspRequest) -> dict:
    return {
        "request_id": req.request_id,
        "tc": req.tc,
        "bandwidth_mbps": req.bandwidth.mbps,
        "src": req.src,
        "dst": req.dst,
        "arrival_time": req.arrival_time,
        "holding_time": req.holding_time,
    }


def _decision_dict(decision: Decision) -> dict:
    out: dict = {"kind": decision.kind.value}
    if decision.path is not None:
        out["path"] = list(decision.path)
    if decision.victims:
        out["victims"] = list(decision.victims)
    if decision.block_reason is not None:
        out["block_reason"] = decision.block_reason.value
    return out


def run(scenario: Scenario, parallel: bool = False) -> list[RunReport]:
    """Execute every seeded run; each run owns fresh state and substreams."""
    scenario.validate()
    if parallel and scenario.runs > 1:
        with ThreadPoolExecutor(max_workers=min(scenario.runs, 8)) as pool:
            futures = [pool.submit(_run_one, scenario, i) for i in range(scenario.runs)]
            return [f.result() for f in futures]
    return [_run_one(scenario, i) for i in range(scenario.runs)]


def _run_one(scenario: Scenario, run_index: int) -> RunReport:
    return SingleRun(scenario, run_index).run_to_completion()


def trace_to_jsonl(trace: list[dict]) -> str:
    return "\n".join(json.dumps(rec, sort_keys=True) for rec in trace) + ("\n" if trace else "")
