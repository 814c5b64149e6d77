// Wire types mirroring the orchestrator HTTP API.

export type SessionState =
  | 'Ordered'
  | 'Retrieved'
  | 'Reconciling'
  | 'AwaitingUser'
  | 'Resolved'
  | 'Compiled'
  | 'Executing'
  | 'Served'
  | 'Failed'
  | 'Aborted';

export interface SessionEvent {
  seq: number;
  ts: string;
  kind: string;
  payload: Record<string, unknown>;
}

export interface Prompt {
  anomaly_id: string;
  text: string;
  options: string[];
}

export interface SessionView {
  session_id: string;
  state: SessionState;
  order_text: string;
  recipe_id: string | null;
  program_id: string | null;
  prompts: Prompt[];
  last_seq: number;
  report?: ExecutionReport;
}

export interface PourOutcome {
  final_mass_g: number;
  within_tolerance: boolean;
  duration_s: number;
}

export interface PourTrace {
  item_id: string;
  target_mass_g: number;
  tolerance_rel: number;
  samples: [number, number, number, number][];
  outcome: PourOutcome;
}

export interface ExecutionReport {
  program_id: string;
  ok: boolean;
  traces: PourTrace[];
  final_state: Record<string, unknown>;
}

export interface InventoryItem {
  item_id: string;
  label: string;
  pose_world: [number, number, number];
  available_ml: number;
  readable: boolean;
}

export interface InventorySnapshot {
  timestamp: string;
  items: InventoryItem[];
}
