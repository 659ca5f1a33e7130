import { describe, expect, it } from "vitest";

import { comparisonTable, ComparisonInput } from "../src/compare.js";
import type { RunReportDict } from "../src/types.js";

const report = (overrides: Partial<RunReportDict> = {}): RunReportDict => ({
  run_index: 0,
  seed: 1,
  requests: 100,
  grants: 90,
  grants_with_preemption: 2,
  blocks: { CONSTRAINT: 10 },
  preemptions: 5,
  devolutions: 0,
  switch_reports: [],
  event_count: 500,
  end_time: 3600,
  ...overrides,
});

describe("comparisonTable", () => {
  it("identical runs produce identical rows", () => {
    const input: ComparisonInput[] = [
      { label: "a", report: report(), utilizationPercent: 80 },
      { label: "b", report: report(), utilizationPercent: 80 },
    ];
    const rows = comparisonTable(input);
    expect(rows[0].cells).toEqual(rows[1].cells);
  });

  it("missing metrics render an em dash, not zero", () => {
    const rows = comparisonTable([
      { label: "a", report: report({ requests: 0, grants: 0 }), utilizationPercent: null },
    ]);
    expect(rows[0].cells).toEqual(["—", "—", "—"]);
  });

  it("highlights lowest blocking and highest utilization", () => {
    const rows = comparisonTable([
      { label: "mam", report: report({ grants: 70 }), utilizationPercent: 85 },
      { label: "atcs", report: report({ grants: 95, preemptions: 9 }), utilizationPercent: 95 },
    ]);
    expect(rows[1].best[0]).toBe(true);   // blocking: atcs wins
    expect(rows[0].best[1]).toBe(true);   // preemption rate: mam wins
    expect(rows[1].best[2]).toBe(true);   // utilization: atcs wins
    expect(rows[0].best[0]).toBe(false);
  });
});
