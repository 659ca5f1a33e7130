// Page wiring: scenario builder form, live-run steering console, comparison
// table. All state shown here is reconstructed from the API; reloading the
// page mid-run rebuilds the same view from GET /sessions + /metrics.

import { ApiClient, ApiError } from "./api.js";
import { applyTable1Template, canSubmit, defaultBuilder, toScenario, validate, BuilderState } from "./builder.js";
import { makeChart, ChartHandle } from "./charts.js";
import { SessionViewModel } from "./model.js";
import { comparisonTable, ComparisonInput, COMPARISON_COLUMNS } from "./compare.js";
import { consumeStream, StreamHandle } from "./sse.js";
import type { RunReportDict } from "./types.js";

const api = new ApiClient("");

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

// --- scenario builder ---------------------------------------------------------

let builder: BuilderState = defaultBuilder();

function renderBuilder(): void {
  ($("name") as HTMLInputElement).value = builder.name;
  ($("topology") as HTMLSelectElement).value = builder.topologyBuiltin;
  ($("classes") as HTMLInputElement).value = String(builder.classes);
  ($("model") as HTMLSelectElement).value = builder.model;
  ($("bc") as HTMLInputElement).value = builder.bcAll.join(" ");
  ($("seeds") as HTMLInputElement).value = builder.seeds.join(" ");
  ($("stop-time") as HTMLInputElement).value = builder.stopTime === null ? "" : String(builder.stopTime);
  ($("use-table1") as HTMLInputElement).checked = builder.useTable1;
  ($("preemption") as HTMLInputElement).checked = builder.preemption;
  ($("routing") as HTMLSelectElement).value = builder.routing;
  const errors = validate(builder);
  $("builder-errors").innerHTML = errors.map((e) => `<li>${e}</li>`).join("");
  ($("create") as HTMLButtonElement).disabled = !canSubmit(builder);
}

function readBuilder(): void {
  builder = {
    ...builder,
    name: ($("name") as HTMLInputElement).value || "console-session",
    topologyBuiltin: ($("topology") as HTMLSelectElement).value,
    classes: Number(($("classes") as HTMLInputElement).value),
    model: ($("model") as HTMLSelectElement).value as BuilderState["model"],
    bcAll: ($("bc") as HTMLInputElement).value.trim().split(/\s+/).filter(Boolean).map(Number),
    seeds: ($("seeds") as HTMLInputElement).value.trim().split(/\s+/).filter(Boolean).map(Number),
    stopTime: ($("stop-time") as HTMLInputElement).value === ""
      ? null : Number(($("stop-time") as HTMLInputElement).value),
    useTable1: ($("use-table1") as HTMLInputElement).checked,
    preemption: ($("preemption") as HTMLInputElement).checked,
    routing: ($("routing") as HTMLSelectElement).value as BuilderState["routing"],
  };
  renderBuilder();
}

// --- live run view --------------------------------------------------------------

const vm = new SessionViewModel();
let sessionId: string | null = null;
let stream: StreamHandle | null = null;
let utilChart: ChartHandle | null = null;
let rateChart: ChartHandle | null = null;

function renderState(): void {
  const s = vm.state;
  if (!s) return;
  $("session-label").textContent = `${s.session_id} [${s.status}]`;
  $("sim-clock").textContent = `t=${s.current_time.toFixed(1)}s  run ${s.run_index + 1}/${s.runs}  ` +
    `model ${s.model}  active ${s.active_lsps}`;
  const c = s.counters;
  $("counters").textContent =
    `requests ${c.requests}  grants ${c.grants}  blocked ${c.blocked_total}  ` +
    `preemptions ${c.preemptions}  devolutions ${c.devolutions}`;
  for (const id of ["pause", "resume", "step", "switch", "retune"]) {
    ($(id) as HTMLButtonElement).disabled = s.status === "DONE" || vm.actionPending;
  }
}

function renderAnnotations(): void {
  $("annotations").innerHTML = vm.annotations
    .map((a) => `<li>t=${a.time.toFixed(0)}s — ${a.label}</li>`)
    .join("");
}

async function refreshState(): Promise<void> {
  if (!sessionId) return;
  vm.applyState(await api.getSession(sessionId));
  renderState();
}

function attachCharts(): void {
  utilChart?.destroy();
  rateChart?.destroy();
  utilChart = makeChart($("util-chart"), "link utilization (%)", vm.buffers,
    () => vm.buffers.metricIds().filter((m) => m.startsWith("util.")),
    () => vm.annotations, { thresholdPercent: 90, yMax: 100 });
  rateChart = makeChart($("rate-chart"), "blocking / preemption per class", vm.buffers,
    () => vm.buffers.metricIds().filter((m) => !m.startsWith("util.")),
    () => vm.annotations, { yMax: 1 });
}

function startStream(): void {
  if (!sessionId) return;
  stream?.stop();
  stream = consumeStream(
    (since) => api.streamUrl(sessionId!, since),
    vm.buffers.cursor + 1,
    {
      onSample: (sample) => {
        vm.applySample(sample);
        utilChart?.update();
        rateChart?.update();
      },
      onEnd: () => void refreshState(),
      onReconnect: () => { $("stream-status").textContent = "stream: reconnecting"; },
    },
  );
  $("stream-status").textContent = "stream: live";
}

async function openSession(id: string): Promise<void> {
  sessionId = id;
  vm.state = null;
  vm.annotations = [];
  // rebuild the whole view from the API (also the page-reload path)
  const state = await api.getSession(id);
  vm.applyState(state);
  const backlog = await api.metrics(id, 0);
  vm.buffers = new (vm.buffers.constructor as any)();
  for (const sample of backlog.samples) vm.applySample(sample);
  const report = await api.report(id);
  for (const run of report.runs) {
    for (const sw of run.switch_reports) vm.applySwitchReport(sw);
  }
  attachCharts();
  utilChart?.update();
  rateChart?.update();
  renderState();
  renderAnnotations();
  startStream();
  void refreshSessions();
}

async function refreshSessions(): Promise<void> {
  const sessions = await api.listSessions();
  $("sessions").innerHTML = sessions
    .map((s) => `<li><a href="#" data-sid="${s.session_id}">${s.session_id}</a> ` +
      `${s.status} (${s.counters.requests} req)</li>`)
    .join("");
  for (const link of $("sessions").querySelectorAll("a")) {
    link.addEventListener("click", (e) => {
      e.preventDefault();
      void openSession((e.target as HTMLElement).dataset.sid!);
    });
  }
}

// --- comparison view -------------------------------------------------------------

const finished: ComparisonInput[] = [];

async function addToComparison(): Promise<void> {
  if (!sessionId) return;
  const { runs } = await api.report(sessionId);
  const csv = await api.exportCsv(sessionId);
  const utilRows = csv.split("\n").filter((l) => l.startsWith("util."));
  const values = utilRows
    .map((l) => Number(l.split(",")[2]))
    .filter((v) => Number.isFinite(v));
  const meanUtil = values.length ? values.reduce((a, b) => a + b, 0) / values.length : null;
  runs.forEach((run: RunReportDict) => {
    finished.push({
      label: `${sessionId} run${run.run_index} (${vm.state?.model ?? "?"})`,
      report: run,
      utilizationPercent: meanUtil,
    });
  });
  renderComparison();
}

function renderComparison(): void {
  const rows = comparisonTable(finished);
  const head = `<tr><th>run</th>${COMPARISON_COLUMNS.map((c) => `<th>${c}</th>`).join("")}</tr>`;
  const body = rows.map((row) =>
    `<tr><td>${row.label}</td>` + row.cells.map((cell, i) =>
      `<td class="${row.best[i] ? "best" : ""}">${cell}</td>`).join("") + "</tr>")
    .join("");
  $("comparison").innerHTML = head + body;
}

// --- control actions ---------------------------------------------------------------

function wireControls(): void {
  for (const id of ["name", "topology", "classes", "model", "bc", "seeds",
                    "stop-time", "use-table1", "preemption", "routing"]) {
    $(id).addEventListener("change", readBuilder);
    $(id).addEventListener("input", readBuilder);
  }
  $("table1-template").addEventListener("click", () => {
    builder = applyTable1Template(builder);
    renderBuilder();
  });
  $("create").addEventListener("click", () => {
    void (async () => {
      try {
        const state = await api.createSession(toScenario(builder));
        await api.start(state.session_id);
        await openSession(state.session_id);
      } catch (err) {
        $("builder-errors").innerHTML = `<li>${err instanceof ApiError ? err.message : err}</li>`;
      }
    })();
  });
  $("pause").addEventListener("click", () => doAction(() => api.pause(sessionId!)));
  $("resume").addEventListener("click", () => doAction(() => api.resume(sessionId!)));
  $("step").addEventListener("click", () => doAction(() => api.step(sessionId!, 10)));
  $("switch").addEventListener("click", () => {
    const model = ($("switch-model") as HTMLSelectElement).value as BuilderState["model"];
    const bcRaw = ($("switch-bc") as HTMLInputElement).value.trim();
    const bc = bcRaw ? bcRaw.split(/\s+/).map(Number) : undefined;
    void vm.mutate(async () => {
      const report = await api.switchModel(sessionId!, { model }, bc);
      vm.applySwitchReport(report);
      renderAnnotations();
      utilChart?.update();
      rateChart?.update();
      await refreshState();
    }).catch(showActionError);
  });
  $("retune").addEventListener("click", () => {
    const bc = ($("retune-bc") as HTMLInputElement).value.trim().split(/\s+/).map(Number);
    void vm.mutate(async () => {
      const report = await api.retuneBc(sessionId!, bc);
      vm.applySwitchReport(report);
      renderAnnotations();
      await refreshState();
    }).catch(showActionError);
  });
  $("advise").addEventListener("click", () => {
    void (async () => {
      const features = ($("advisor-features") as HTMLInputElement).value
        .trim().split(/\s+/).map(Number);
      try {
        const rec = await api.recommend(features);
        $("advisor-result").textContent =
          `${rec.model} (confidence ${rec.confidence.toFixed(3)}), ` +
          `BC fractions ${rec.bc_fractions.map((f) => f.toFixed(2)).join("/")}`;
        ($("advisor-apply") as HTMLButtonElement).dataset.model = rec.model;
      } catch (err) {
        $("advisor-result").textContent = String(err);
      }
    })();
  });
  $("advisor-apply").addEventListener("click", (e) => {
    const model = (e.target as HTMLElement).dataset.model as BuilderState["model"] | undefined;
    if (!model || !sessionId) return;
    void vm.mutate(async () => {
      const report = await api.switchModel(sessionId!, { model });
      vm.applySwitchReport(report);
      renderAnnotations();
      await refreshState();
    }).catch(showActionError);
  });
  $("compare-add").addEventListener("click", () => void addToComparison());
  $("refresh-sessions").addEventListener("click", () => void refreshSessions());
}

function doAction(action: () => Promise<unknown>): void {
  void vm.mutate(async () => {
    await action();
    await refreshState();
  }).catch(showActionError);
}

function showActionError(err: unknown): void {
  $("action-error").textContent = err instanceof ApiError
    ? `API ${err.status}: ${err.message}` : String(err);
  setTimeout(() => { $("action-error").textContent = ""; }, 6000);
  renderState();
}

window.addEventListener("DOMContentLoaded", () => {
  renderBuilder();
  wireControls();
  void refreshSessions();
  setInterval(() => void refreshState().catch(() => {}), 1000);
});
