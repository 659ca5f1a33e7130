// View-model for a live session. Holds only what came back from the API:
// consolidated samples keyed by metric, the latest session state, and chart
// annotations derived from acknowledged control actions. Rebuilding this
// object from the API must reproduce the rendered state exactly.

import type { Sample, SessionState, SwitchReport } from "./types.js";

export interface Annotation {
  time: number;
  label: string;
}

export class ContinuityError extends Error {}

export class SeriesBuffers {
  private byMetric = new Map<string, { slots: number[]; values: (number | null)[] }>();
  private lastCursor = -1;

  /** Append a sample; cursors must arrive strictly in order, gap-free. */
  push(sample: Sample): void {
    if (sample.cursor !== this.lastCursor + 1) {
      throw new ContinuityError(
        `sample cursor ${sample.cursor} after ${this.lastCursor} (gap or duplicate)`);
    }
    this.lastCursor = sample.cursor;
    let series = this.byMetric.get(sample.metric_id);
    if (!series) {
      series = { slots: [], values: [] };
      this.byMetric.set(sample.metric_id, series);
    }
    series.slots.push(sample.slot_start_s);
    series.values.push(sample.value);
  }

  get cursor(): number {
    return this.lastCursor;
  }

  metricIds(): string[] {
    return [...this.byMetric.keys()].sort();
  }

  series(metricId: string): { slots: number[]; values: (number | null)[] } {
    return this.byMetric.get(metricId) ?? { slots: [], values: [] };
  }

  /** Stable fingerprint used to verify reload-reconstruction equivalence. */
  fingerprint(): string {
    const entries = this.metricIds().map((id) => {
      const s = this.series(id);
      return [id, s.slots, s.values];
    });
    return JSON.stringify(entries);
  }
}

export class SessionViewModel {
  state: SessionState | null = null;
  buffers = new SeriesBuffers();
  annotations: Annotation[] = [];
  /** True while a mutation is in flight; the UI must not emit another. */
  actionPending = false;

  applyState(state: SessionState): void {
    this.state = state;
  }

  applySample(sample: Sample): void {
    this.buffers.push(sample);
  }

  applySwitchReport(report: SwitchReport): void {
    this.annotations.push({
      time: report.time,
      label: `${report.model}: ${report.recharged} recharged, ` +
        `${report.non_conformant.length} non-conformant` +
        (report.preempted.length ? `, ${report.preempted.length} preempted` : ""),
    });
  }

  /** Guarded mutation wrapper: one in-flight control action at a time. */
  async mutate<T>(action: () => Promise<T>): Promise<T> {
    if (this.actionPending) {
      throw new Error("a control action is already awaiting acknowledgment");
    }
    this.actionPending = true;
    try {
      return await action();
    } finally {
      this.actionPending = false;
    }
  }

  fingerprint(): string {
    return JSON.stringify({
      state: this.state,
      series: this.buffers.fingerprint(),
      annotations: this.annotations,
    });
  }
}

/** Rebuild a view-model purely from API responses (the page-reload path). */
export function reconstruct(
  state: SessionState,
  samples: Sample[],
  switchReports: SwitchReport[],
): SessionViewModel {
  const vm = new SessionViewModel();
  vm.applyState(state);
  for (const sample of samples) vm.applySample(sample);
  for (const report of switchReports) vm.applySwitchReport(report);
  return vm;
}

/** Parse the server's metrics CSV export into rows (slot comparison helper). */
export function parseMetricsCsv(text: string): { metric_id: string; slot_start_s: number; value: number | null }[] {
  const rows: { metric_id: string; slot_start_s: number; value: number | null }[] = [];
  const lines = text.trim().split("\n");
  for (const line of lines.slice(1)) {
    if (!line) continue;
    const [metric, slot, value] = splitCsvRow(line);
    rows.push({
      metric_id: metric,
      slot_start_s: Number(slot),
      value: value === "" ? null : Number(value),
    });
  }
  return rows;
}

function splitCsvRow(line: string): [string, string, string] {
  const parts = line.split(",");
  return [parts[0], parts[1], parts.slice(2).join(",")];
}
