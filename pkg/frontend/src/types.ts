/** Wire-protocol types shared with the oracle bridge (protocol_version 1). */

export type QueryKind =
  | "list_objects"
  | "decompose"
  | "select_view"
  | "detect_part"
  | "verify"
  | "generate_action";

export type DecisionKind =
  | "objects"
  | "plan"
  | "view_index"
  | "part_box"
  | "verdict"
  | "program";

export const EXPECTED_DECISION: Record<QueryKind, DecisionKind> = {
  list_objects: "objects",
  decompose: "plan",
  select_view: "view_index",
  detect_part: "part_box",
  verify: "verdict",
  generate_action: "program",
};

export interface PendingQuery {
  id: string;
  protocol_version: number;
  episode_id: string;
  subtask_index: number;
  attempt: number;
  kind: QueryKind;
  payload: Record<string, unknown>;
  /** set client-side when first seen, for the deadline hint */
  received_at?: number;
}

export interface PlanEntryPayload {
  description: string;
  condition: string;
  kind: "agent_centric" | "object_centric";
  target: { object: string; part: string } | null;
}

export interface Decision {
  kind: DecisionKind;
  payload: Record<string, unknown>;
}

export interface BoxPixels {
  x_min: number;
  y_min: number;
  x_max: number;
  y_max: number;
}

/** One executed step of a stored episode (steps.jsonl line). */
export interface StepRecord {
  index: number;
  kind: "move" | "gripper";
  ee_pos: [number, number, number];
  ee_quat: [number, number, number, number];
  gripper: "open" | "close";
  aperture: number;
  attached: [string, string] | null;
  subtask_index: number;
  attempt: number;
  source: "grasp" | "program" | "recovery";
  events: string[];
  objects: Record<string, { pos: [number, number, number]; joint: number | null }>;
}

export interface TranscriptEntry {
  kind: QueryKind;
  subtask_index: number;
  attempt: number;
  query: Record<string, unknown>;
  decision: Decision | Record<string, never>;
  latency_s: number;
  backend_id: string;
  retry_count?: number;
  error?: string;
}

export interface EpisodeMeta {
  format_version: number;
  task_id: string;
  instruction: string;
  seed: number;
  outcome: string;
  budgets: [number, number];
  plan: Array<{
    index: number;
    description: string;
    condition: string;
    kind: string;
    target: [string, string] | null;
  }>;
  try_counts: number[];
  initial_ee_pos: [number, number, number];
  keyframes: number[];
  step_count: number;
  views: Array<{ step_index: number; label: string; view_name: string; dir: string }>;
}

export const SUPPORTED_FORMAT_VERSION = 1;
