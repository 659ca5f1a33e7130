"""Session lifecycle and live steering.

Each session owns a worker thread that advances its current run event by
event. All mutations (pause, step, model switch, BC retune) travel through one
per-session command queue and are applied between events, never mid-event, so
a live-steered run stays deterministic and byte-identical to its batch twin.
"""

from __future__ import annotations

import itertools
import queue
import threading
from concurrent.futures import Future
from dataclasses import dataclass, field
from enum import Enum

from ..bam import GbamConfig, InvalidConfigError, SwitchPolicy
from ..domain import Bandwidth, SimError
from ..engine import RunReport, Scenario, SingleRun


class SessionError(SimError):
    def __init__(self, status_code: int, message: str):
        self.status_code = status_code
        super().__init__(message)


class SessionStatus(str, Enum):
    IDLE = "IDLE"
    RUNNING = "RUNNING"
    PAUSED = "PAUSED"
    DONE = "DONE"


@dataclass
class _Command:
    kind: str
    payload: dict = field(default_factory=dict)
    reply: Future = field(default_factory=Future)


class Session:
    def __init__(self, session_id: str, scenario: Scenario):
        scenario.validate()
        self.id = session_id
        self.scenario = scenario
        self.status = SessionStatus.IDLE
        self.run_index = 0
        self.sim = SingleRun(scenario, 0)
        self.reports: list[RunReport] = []
        self.samples: list[dict] = []          # session-global emit log
        self._samples_seen = 0
        self._lock = threading.RLock()
        self._samples_cv = threading.Condition(self._lock)
        self._commands: "queue.Queue[_Command]" = queue.Queue()
        self._thread: threading.Thread | None = None

    # --- public control surface (thread-safe) --------------------------------

    def start(self, paused: bool = False) -> dict:
        """Begin execution; `paused` holds at the first event boundary so the
        run can be stepped deterministically from event zero."""
        with self._lock:
            if self.status is not SessionStatus.IDLE:
                raise SessionError(409, f"cannot start a {self.status.value} session")
            self.status = SessionStatus.PAUSED if paused else SessionStatus.RUNNING
            self._thread = threading.Thread(target=self._worker, daemon=True,
                                            name=f"session-{self.id}")
            self._thread.start()
        return self.state()

    def pause(self) -> dict:
        self._require({SessionStatus.RUNNING}, "pause")
        self._submit("pause")
        return self.state()

    def resume(self) -> dict:
        self._require({SessionStatus.PAUSED}, "resume")
        self._submit("resume")
        return self.state()

    def step(self, events: int = 1) -> dict:
        self._require({SessionStatus.PAUSED}, "step")
        if events < 1:
            raise SessionError(400, "events must be >= 1")
        self._submit("step", {"events": events})
        return self.state()

    def model_switch(self, cfg: GbamConfig, bc: tuple[Bandwidth, ...] | None,
                     policy: SwitchPolicy, at_time: float | None,
                     links: tuple[str, ...] | None = None) -> dict:
        self._require({SessionStatus.RUNNING, SessionStatus.PAUSED}, "switch model on")
        return self._submit("switch", {
            "cfg": cfg, "bc": bc, "policy": policy, "at_time": at_time, "links": links,
        })

    def _require(self, allowed: set[SessionStatus], action: str) -> None:
        with self._lock:
            if self.status not in allowed:
                raise SessionError(409, f"cannot {action} a {self.status.value} session")

    def _submit(self, kind: str, payload: dict | None = None):
        cmd = _Command(kind, payload or {})
        self._commands.put(cmd)
        result = cmd.reply.result(timeout=30.0)
        if isinstance(result, Exception):
            raise result
        return result

    # --- queries ---------------------------------------------------------------

    def state(self) -> dict:
        with self._lock:
            sim = self.sim
            counters = sim.stats.totals
            return {
                "session_id": self.id,
                "status": self.status.value,
                "run_index": self.run_index,
                "runs": self.scenario.runs,
                "current_time": sim.clock,
                "next_event_time": sim.next_event_time,
                "events_processed": sim.seq,
                "active_lsps": sim.active_count(),
                "model": sim.cfg.model.value,
                "counters": counters.to_dict(),
            }

    def samples_since(self, cursor: int) -> list[dict]:
        with self._lock:
            return list(self.samples[cursor:])

    def wait_for_samples(self, cursor: int, timeout: float) -> list[dict]:
        with self._samples_cv:
            if len(self.samples) <= cursor:
                self._samples_cv.wait(timeout)
            return list(self.samples[cursor:])

    def trace(self, run_index: int | None = None) -> list[dict]:
        with self._lock:
            if run_index is None or run_index == self.run_index:
                return list(self.sim.trace)
            return list(self.reports[run_index].trace)

    def report_dicts(self) -> list[dict]:
        with self._lock:
            out = [r.canonical_dict() for r in self.reports]
            return out

    def join(self, timeout: float = 60.0) -> None:
        thread = self._thread
        if thread is not None:
            thread.join(timeout)

    # --- worker -----------------------------------------------------------------

    def _worker(self) -> None:
        while True:
            with self._lock:
                status = self.status
            if status is SessionStatus.DONE:
                return
            if status is SessionStatus.PAUSED:
                try:
                    cmd = self._commands.get(timeout=0.5)
                except queue.Empty:
                    continue
                self._handle(cmd)
                continue
            # RUNNING: interleave commands with event processing
            try:
                cmd = self._commands.get_nowait()
            except queue.Empty:
                cmd = None
            if cmd is not None:
                self._handle(cmd)
                continue
            self._advance()

    def _advance(self) -> None:
        progressed = self.sim.step()
        self._collect_samples()
        if not progressed:
            self._finish_run()

    def _finish_run(self) -> None:
        report = self.sim.report()
        with self._samples_cv:
            self.reports.append(report)
            self._collect_samples_locked()
            if self.run_index + 1 < self.scenario.runs:
                self.run_index += 1
                self.sim = SingleRun(self.scenario, self.run_index)
                self._samples_seen = 0
            else:
                self.status = SessionStatus.DONE
            self._samples_cv.notify_all()

    def _collect_samples(self) -> None:
        with self._samples_cv:
            self._collect_samples_locked()
            self._samples_cv.notify_all()

    def _collect_samples_locked(self) -> None:
        emitted = self.sim.stats.emitted
        while self._samples_seen < len(emitted):
            sample = dict(emitted[self._samples_seen])
            sample["run_index"] = self.run_index
            sample["cursor"] = len(self.samples)
            self.samples.append(sample)
            self._samples_seen += 1

    def _handle(self, cmd: _Command) -> None:
        try:
            if cmd.kind == "pause":
                with self._lock:
                    self.status = SessionStatus.PAUSED
                cmd.reply.set_result(None)
            elif cmd.kind == "resume":
                with self._lock:
                    self.status = SessionStatus.RUNNING
                cmd.reply.set_result(None)
            elif cmd.kind == "step":
                done = False
                for _ in range(cmd.payload["events"]):
                    if not self.sim.step():
                        done = True
                        break
                self._collect_samples()
                if done:
                    self._finish_run()
                cmd.reply.set_result(None)
            elif cmd.kind == "switch":
                cmd.reply.set_result(self._do_switch(cmd.payload))
            else:
                cmd.reply.set_result(SessionError(400, f"unknown command {cmd.kind}"))
        except Exception as exc:  # surfaced to the HTTP caller
            cmd.reply.set_result(exc)

    def _do_switch(self, payload: dict) -> dict:
        sim = self.sim
        at_time = payload["at_time"]
        nxt = sim.next_event_time
        if self.status is SessionStatus.PAUSED and at_time is not None and nxt is not None \
                and at_time > nxt:
            raise SessionError(400, "a paused session can only switch at or before "
                                    f"the next event boundary ({nxt})")
        before = len(sim.switch_reports)
        sim.inject_model_switch(payload["cfg"], payload["bc"], payload["policy"],
                                at_time, payload["links"])
        # Drive the run just far enough to apply the switch; the switch event
        # outranks same-or-later traffic, so while paused this consumes only it.
        while len(sim.switch_reports) == before:
            if not sim.step():
                self._finish_run()
                raise SessionError(409, "run completed before the switch applied")
        self._collect_samples()
        return sim.switch_reports[-1]


class SessionManager:
    def __init__(self):
        self._sessions: dict[str, Session] = {}
        self._ids = itertools.count(1)
        self._lock = threading.Lock()

    def create(self, scenario: Scenario) -> Session:
        with self._lock:
            session_id = f"s{next(self._ids)}"
            session = Session(session_id, scenario)
            self._sessions[session_id] = session
            return session

    def get(self, session_id: str) -> Session:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise SessionError(404, f"unknown session {session_id}") from None

    def all_states(self) -> list[dict]:
        with self._lock:
            return [s.state() for s in self._sessions.values()]
