// Scenario builder: form state, the six-phase demand template, and client-side
// validation mirroring the API's constraint rules so mistakes surface before
// submit.

import type { BamModel, ScenarioIn } from "./types.js";

export interface BuilderState {
  name: string;
  topologyBuiltin: string;
  topologyText: string | null;   // overrides builtin when set
  classes: number;
  model: BamModel;
  htl: boolean;
  lth: boolean;
  preemption: boolean;
  oversubscription: boolean;
  bcAll: number[];
  linkCapacity: number;          // for local validation only
  useTable1: boolean;
  table1HoldMean: number;
  table1BwValues: number[];
  table1Src: number;
  table1Dst: number;
  specs: { tc: number; rate: number; holdMean: number; bwMbps: number }[];
  routing: "STATIC" | "CSPF";
  stopTime: number | null;
  stopLsps: number | null;
  seeds: number[];
  statsStep: number;
}

export function defaultBuilder(): BuilderState {
  return {
    name: "console-session",
    topologyBuiltin: "PTP-2n-1e",
    topologyText: null,
    classes: 3,
    model: "MAM",
    htl: false,
    lth: false,
    preemption: true,
    oversubscription: false,
    bcAll: [40, 30, 30],
    linkCapacity: 100,
    useTable1: false,
    table1HoldMean: 90,
    table1BwValues: [1, 2],
    table1Src: 0,
    table1Dst: 1,
    specs: [{ tc: 0, rate: 0.05, holdMean: 90, bwMbps: 2 }],
    routing: "STATIC",
    stopTime: 3600,
    stopLsps: null,
    seeds: [42],
    statsStep: 60,
  };
}

/** The six-phase study prefill: three mixed-level hours, three overload hours. */
export function applyTable1Template(state: BuilderState): BuilderState {
  return {
    ...state,
    classes: 3,
    useTable1: true,
    table1HoldMean: 90,
    table1BwValues: [1, 2],
    stopTime: 6 * 3600,
    stopLsps: null,
  };
}

export const TABLE1_PHASES = [
  { start: 0, levels: ["HIGH", "LOW", "LOW"] },
  { start: 3600, levels: ["MEDIUM", "LOW", "HIGH"] },
  { start: 7200, levels: ["LOW", "MEDIUM", "HIGH"] },
  { start: 10800, levels: ["HIGH", "HIGH", "HIGH"] },
  { start: 14400, levels: ["HIGH", "HIGH", "HIGH"] },
  { start: 18000, levels: ["HIGH", "HIGH", "HIGH"] },
] as const;

export function validate(state: BuilderState): string[] {
  const errors: string[] = [];
  if (state.classes < 1) errors.push("class count must be >= 1");
  if (state.bcAll.length !== state.classes) {
    errors.push(`BC vector needs ${state.classes} entries`);
  }
  if (state.bcAll.some((v) => v < 0)) errors.push("BC values must be >= 0");
  const cap = state.linkCapacity;
  const sum = state.bcAll.reduce((a, b) => a + b, 0);
  if (state.model === "ATCS" || (state.model === "GBAM" && (state.htl || state.lth))) {
    if (sum > cap) errors.push(`sum of BC exceeds capacity (${sum} > ${cap})`);
  } else if (state.model === "RDM") {
    if (state.bcAll[0] !== cap) errors.push(`RDM requires bc[0] == capacity (${state.bcAll[0]} != ${cap})`);
    for (let i = 1; i < state.bcAll.length; i++) {
      if (state.bcAll[i] > state.bcAll[i - 1]) {
        errors.push("RDM requires a nonincreasing BC vector");
        break;
      }
    }
  } else {
    if (state.bcAll.some((v) => v > cap)) errors.push("each BC must be <= capacity");
    if (!state.oversubscription && sum > cap) {
      errors.push(`sum of BC exceeds capacity (${sum} > ${cap}) and oversubscription is off`);
    }
  }
  if (state.useTable1 && state.classes !== 3) errors.push("the six-phase template is defined for 3 classes");
  if (!state.useTable1 && state.specs.length === 0) errors.push("at least one traffic stream is required");
  if (state.stopTime === null && state.stopLsps === null) errors.push("a stop condition is required");
  if (state.seeds.length === 0) errors.push("at least one seed is required");
  return errors;
}

export function canSubmit(state: BuilderState): boolean {
  return validate(state).length === 0;
}

export function toScenario(state: BuilderState): ScenarioIn {
  const errors = validate(state);
  if (errors.length) throw new Error(`invalid scenario: ${errors.join("; ")}`);
  return {
    name: state.name,
    topology: state.topologyText !== null
      ? { text: state.topologyText }
      : { builtin: state.topologyBuiltin },
    classes: state.classes,
    bam: {
      model: state.model,
      htl: state.htl,
      lth: state.lth,
      preemption: state.preemption,
      oversubscription: state.oversubscription,
    },
    bc_all: state.bcAll,
    traffic: state.useTable1
      ? {
          table1: {
            hold_mean: state.table1HoldMean,
            bw_values: state.table1BwValues,
            src: state.table1Src,
            dst: state.table1Dst,
          },
        }
      : {
          specs: state.specs.map((s) => ({
            tc: s.tc,
            arrival: { kind: "poisson", rate: s.rate },
            holding: { kind: "exponential", mean: s.holdMean },
            bandwidth: { kind: "deterministic", value: s.bwMbps },
            src: 0,
            dst: 1,
          })),
        },
    routing: state.routing,
    stop: {
      max_time: state.stopTime ?? undefined,
      max_lsps: state.stopLsps ?? undefined,
    },
    seeds: state.seeds,
    stats_step: state.statsStep,
  };
}
