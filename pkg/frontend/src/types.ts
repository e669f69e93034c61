/** Shapes mirrored from the optimisation service's JSON responses. */

export interface TraceRow {
  iteration: number;
  x: number[];
  y: number;
  acq_value: number | null;
  score: number | null;
  rec_x: number[];
  stable_gain: number;
  manual_override: boolean;
}

export interface PerPointEntry {
  x: number[];
  y: number;
  score: number;
  contribution: number;
}

export interface Recommendation {
  x_star: number[];
  stable_gain: number;
  per_point: PerPointEntry[];
}

export interface AcqProfile {
  x: number[];
  mean: number[];
  sd: number[];
  score: number[];
  acq: number[];
}

export interface SessionSummary {
  id: string;
  revision: number;
  created: string;
  updated: string;
  observations: number;
  pending: boolean;
}

export interface SessionView {
  id: string;
  revision: number;
  created: string;
  updated: string;
  objective: string | null;
  config: Record<string, unknown> & { bounds: number[][] };
  plan: { params: Record<string, unknown>; report: Record<string, unknown> };
  pending: number[] | null;
  trace: TraceRow[];
  recommendation: Recommendation | null;
}

export interface SuggestResponse {
  x: number[];
  acq_value: number | null;
  score: number | null;
  revision: number;
  acq_profile: AcqProfile | null;
}

export interface TellResponse {
  trace_row: TraceRow;
  recommendation: Recommendation;
  revision: number;
}
