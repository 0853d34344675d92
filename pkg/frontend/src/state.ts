/**
 * Console state: a mirror of GET /state plus rolling score windows and the
 * decision timeline, advanced incrementally by applying events.
 *
 * Numbers shown in the UI come either from a /state snapshot or straight from
 * an event payload; nothing is recomputed client-side. Events whose effects
 * span more than their payload (decisions, target additions, scaler updates,
 * hyperparameter edits) flag `needsRefresh` so the wiring re-fetches /state.
 */

import type {
  ApiEvent,
  BlockState,
  ChartPoint,
  PendingUpdate,
  StateSnapshot,
  TimelineEntry,
} from "./types.js";

export const DEFAULT_WINDOW = 2000;

const REFRESH_TYPES = new Set([
  "decision",
  "target_added",
  "hyperparameters_changed",
  "scaler_updated",
  "initial_fit",
  "update_triggered",
  "version_created",
]);

export class ConsoleState {
  snapshot: StateSnapshot | null = null;
  lastSeq = 0;
  gaps = 0;
  duplicates = 0;
  scoreWindows = new Map<string, ChartPoint[]>();
  latestPredictions = new Map<string, number>();
  pendingUpdate: PendingUpdate | null = null;
  timeline: TimelineEntry[] = [];
  notices: string[] = [];

  constructor(public maxPoints: number = DEFAULT_WINDOW) {}

  block(id: string): BlockState | undefined {
    return this.snapshot?.blocks.find((b) => b.id === id);
  }

  /** Replace the structural mirror with a fresh GET /state snapshot. */
  applyState(snapshot: StateSnapshot): void {
    this.snapshot = snapshot;
    this.pendingUpdate = snapshot.pending_update;
    for (const block of snapshot.blocks) {
      if (!this.scoreWindows.has(block.id)) {
        this.scoreWindows.set(block.id, []);
      }
    }
  }

  /** Apply one event; returns true when a /state refresh should follow. */
  applyEvent(event: ApiEvent): boolean {
    if (event.seq <= this.lastSeq) {
      this.duplicates += 1;
      return false;
    }
    if (this.lastSeq > 0 && event.seq !== this.lastSeq + 1) {
      this.gaps += 1;
    }
    this.lastSeq = event.seq;
    const p = event.payload;
    switch (event.type) {
      case "score": {
        const window = this.scoreWindows.get(p.block) ?? [];
        window.push({
          seq: event.seq,
          ts: p.sample_ts,
          score: p.score,
          threshold: p.threshold,
          label: p.label,
        });
        this.scoreWindows.set(p.block, decimate(window, this.maxPoints));
        break;
      }
      case "prediction":
        this.latestPredictions.set(p.target, p.prediction);
        break;
      case "update_proposed":
        this.pendingUpdate = {
          update_id: p.update_id,
          block: p.block,
          errors: p.errors,
          forgetting_ratio: p.forgetting_ratio,
          training_time: p.training_time,
          strategy: p.strategy,
          status: p.status,
          warnings: p.warnings ?? [],
        };
        this.timeline.push({
          seq: event.seq,
          kind: "proposed",
          text: `update ${p.update_id} proposed on ${p.block} ` +
            `(forgetting ${Number.isFinite(p.forgetting_ratio)
              ? p.forgetting_ratio.toFixed(3) : "undefined"})`,
          forgetting_ratio: p.forgetting_ratio,
        });
        break;
      case "decision": {
        if (this.pendingUpdate && this.pendingUpdate.update_id === p.update_id) {
          this.pendingUpdate = null;
        }
        const text =
          p.verdict === "rollback"
            ? `rollback to version ${p.version} (${p.issued_by})`
            : `update ${p.update_id} ${p.verdict}ed by ${p.issued_by}`;
        this.timeline.push({ seq: event.seq, kind: p.verdict, text, version: p.version });
        break;
      }
      case "version_created":
        this.timeline.push({
          seq: event.seq,
          kind: "version",
          text: `version ${p.version}: ${p.reason}`,
          version: p.version,
        });
        break;
      case "target_added":
        this.timeline.push({
          seq: event.seq,
          kind: "target",
          text: `target ${p.target} added (${p.warmup_count} warm-up samples)`,
        });
        break;
      case "threshold_adjusted": {
        const block = this.block(p.block);
        if (block) block.threshold.value = p.new;
        break;
      }
      case "update_triggered": {
        const block = this.block(p.block);
        if (block) block.trigger_pending = true;
        break;
      }
      case "warning":
        this.notices.push(`${p.block ?? ""} ${p.message ?? ""}`.trim());
        break;
      case "checkpoint":
        this.timeline.push({
          seq: event.seq,
          kind: "note",
          text: `checkpoint ${p.label}`,
        });
        break;
      default:
        break;
    }
    return REFRESH_TYPES.has(event.type);
  }
}

/** Halve the window once it overflows; always keeps the newest point. */
export function decimate(points: ChartPoint[], maxPoints: number): ChartPoint[] {
  if (points.length <= maxPoints) return points;
  const kept: ChartPoint[] = [];
  for (let i = points.length - 1; i >= 0; i -= 2) {
    kept.push(points[i]!);
  }
  kept.reverse();
  return kept;
}

/**
 * Client-side mirror of the server's hyperparameter invariants, used to
 * reject bad form input before any request is made.
 */
export function validateHyperparameterEdits(edits: {
  threshold_value?: number;
  novelty_capacity?: number;
  lambda?: number;
  mix_ratio?: number;
}): string[] {
  const problems: string[] = [];
  if (edits.threshold_value !== undefined && !(edits.threshold_value >= 0)) {
    problems.push("threshold must be >= 0");
  }
  if (
    edits.novelty_capacity !== undefined &&
    (!Number.isInteger(edits.novelty_capacity) || edits.novelty_capacity < 1)
  ) {
    problems.push("novelty capacity must be an integer >= 1");
  }
  if (edits.lambda !== undefined && !(edits.lambda >= 0)) {
    problems.push("lambda must be >= 0");
  }
  if (
    edits.mix_ratio !== undefined &&
    !(edits.mix_ratio >= 0 && edits.mix_ratio <= 1)
  ) {
    problems.push("mix ratio must lie in [0, 1]");
  }
  return problems;
}
