/** Wire types mirroring the service's JSON payloads (field names unchanged). */

export interface ApiEvent {
  seq: number;
  ts: string;
  type: string;
  payload: Record<string, any>;
}

export interface ThresholdState {
  value: number;
  adaptation: string;
  q: number;
  alpha: number;
}

export interface BlockState {
  id: string;
  role: string;
  target: string | null;
  threshold: ThresholdState;
  novelty: { fill: number; capacity: number; pending: number };
  familiarity: { fill: number; cap: number | null; evicted: number };
  strategy: Record<string, any>;
  trigger_pending: boolean;
  updates_accepted: number;
  updates_rejected: number;
  prediction_error: number;
  fitting_error: number;
}

export interface PendingUpdate {
  update_id: number;
  block: string;
  errors: {
    novel_before: number;
    novel_after: number;
    retained_before: number;
    retained_after: number;
  };
  forgetting_ratio: number;
  training_time: number;
  strategy: Record<string, any>;
  status: string;
  warnings: string[];
}

export interface StateSnapshot {
  mode: { state: string; block: string | null; update_id: number | null };
  seq: number;
  ingested: number;
  backend: string;
  version: number | null;
  version_count: number;
  targets: string[];
  auto_policy: { enabled: boolean; rho_max: number };
  pending_update: PendingUpdate | null;
  blocks: BlockState[];
}

export interface ChartPoint {
  seq: number;
  ts: string;
  score: number;
  threshold: number;
  label: string;
}

export interface TimelineEntry {
  seq: number;
  kind: string; // proposed | accept | reject | rollback | version | target | note
  text: string;
  forgetting_ratio?: number;
  version?: number;
}

export type ConnectionStatus = "connecting" | "live" | "degraded" | "closed";
