// Side-by-side comparison of completed runs: blocking, preemption and
// utilization per run, with the best value highlighted per column.

import type { RunReportDict } from "./types.js";

export interface ComparisonRow {
  label: string;
  cells: string[];       // one per metric column
  best: boolean[];       // true where this row wins the column
}

export interface ComparisonInput {
  label: string;
  report: RunReportDict;
  utilizationPercent: number | null;   // from the metrics export; null if absent
}

export const COMPARISON_COLUMNS = ["blocking", "preemption rate", "utilization %"] as const;

const MISSING = "—";  // em dash placeholder for absent metrics

function blockingOf(r: RunReportDict): number | null {
  return r.requests === 0 ? null : (r.requests - r.grants) / r.requests;
}

function preemptionRateOf(r: RunReportDict): number | null {
  return r.grants === 0 ? null : r.preemptions / r.grants;
}

export function comparisonTable(inputs: ComparisonInput[]): ComparisonRow[] {
  const numeric: (number | null)[][] = inputs.map((input) => [
    blockingOf(input.report),
    preemptionRateOf(input.report),
    input.utilizationPercent,
  ]);
  // lower is better for blocking/preemption, higher for utilization
  const better = [(a: number, b: number) => a < b,
                  (a: number, b: number) => a < b,
                  (a: number, b: number) => a > b];
  const bestPerColumn = COMPARISON_COLUMNS.map((_, col) => {
    let best: number | null = null;
    for (const row of numeric) {
      const v = row[col];
      if (v === null) continue;
      if (best === null || better[col](v, best)) best = v;
    }
    return best;
  });
  return inputs.map((input, i) => ({
    label: input.label,
    cells: numeric[i].map((v, col) =>
      v === null ? MISSING : col === 2 ? v.toFixed(2) : v.toFixed(4)),
    best: numeric[i].map((v, col) => v !== null && v === bestPerColumn[col]),
  }));
}
