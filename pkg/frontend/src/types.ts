// Wire types mirroring the control-plane API.

export type SessionStatus = "IDLE" | "RUNNING" | "PAUSED" | "DONE";

export interface Counters {
  requests: number;
  grants: number;
  grants_with_preemption: number;
  blocks: Record<string, number>;
  blocked_total: number;
  preemptions: number;
  devolutions: number;
  model_switches: number;
}

export interface SessionState {
  session_id: string;
  status: SessionStatus;
  run_index: number;
  runs: number;
  current_time: number;
  next_event_time: number | null;
  events_processed: number;
  active_lsps: number;
  model: string;
  counters: Counters;
}

export interface Sample {
  cursor: number;
  metric_id: string;
  slot_start_s: number;
  value: number | null;
  run_index?: number;
}

export interface SwitchReport {
  time: number;
  model: string;
  links: string[] | "all";
  recharged: number;
  non_conformant: [string, number][];
  preempted: number[];
}

export interface RunReportDict {
  run_index: number;
  seed: number;
  requests: number;
  grants: number;
  grants_with_preemption: number;
  blocks: Record<string, number>;
  preemptions: number;
  devolutions: number;
  switch_reports: SwitchReport[];
  event_count: number;
  end_time: number;
}

export type BamModel = "MAM" | "RDM" | "ATCS" | "GBAM";

export interface BamIn {
  model: BamModel;
  htl?: boolean;
  lth?: boolean;
  preemption?: boolean;
  oversubscription?: boolean;
}

export interface TrafficSpecIn {
  tc: number;
  arrival: { kind: string; rate?: number; mean?: number; lo?: number; hi?: number; value?: number };
  holding: { kind: string; rate?: number; mean?: number; lo?: number; hi?: number; value?: number };
  bandwidth: { kind: string; value?: number; values?: number[] };
  src?: number;
  dst?: number;
}

export interface ScenarioIn {
  name: string;
  topology: { builtin?: string; text?: string };
  classes: number;
  bam: BamIn;
  bc_all?: number[];
  traffic: {
    specs?: TrafficSpecIn[];
    table1?: { hold_mean: number; bw_values: number[]; src: number; dst: number };
    trace_csv?: string;
  };
  routing: "STATIC" | "CSPF";
  stop: { max_time?: number; max_lsps?: number };
  seeds: number[];
  stats_step?: number;
  switches?: { time: number; bam: BamIn; bc?: number[]; policy?: string }[];
}
