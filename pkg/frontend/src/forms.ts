/** Operator forms: the pending-update decision card, hyperparameter edits,
 * version rollback, and target addition. Submission locks the form until the
 * confirming event/state refresh lands. */

import { ServiceClient, ServiceError } from "./client.js";
import { ConsoleState, validateHyperparameterEdits } from "./state.js";

function show(el: HTMLElement, message: string, kind: "error" | "ok"): void {
  el.textContent = message;
  el.className = `form-note ${kind}`;
}

export class DecisionCard {
  private busy = false;

  constructor(
    private root: HTMLElement,
    private client: ServiceClient,
    private state: ConsoleState,
    private onDecided: () => void,
  ) {}

  render(): void {
    const pending = this.state.pendingUpdate;
    if (!pending) {
      this.root.innerHTML = `<p class="muted">no update awaiting a decision</p>`;
      return;
    }
    const e = pending.errors;
    const forgetting = Number.isFinite(pending.forgetting_ratio)
      ? pending.forgetting_ratio.toFixed(4)
      : "undefined (error appeared on a clean retained set)";
    this.root.innerHTML = `
      <h3>update ${pending.update_id} on ${pending.block}</h3>
      <table class="kv">
        <tr><td>novel error</td><td>${e.novel_before.toFixed(5)} &rarr; ${e.novel_after.toFixed(5)}</td></tr>
        <tr><td>retained error</td><td>${e.retained_before.toFixed(5)} &rarr; ${e.retained_after.toFixed(5)}</td></tr>
        <tr><td>forgetting ratio</td><td>${forgetting}</td></tr>
        <tr><td>strategy</td><td>${pending.strategy.kind}</td></tr>
        <tr><td>training time</td><td>${pending.training_time.toFixed(2)}s</td></tr>
      </table>
      ${pending.warnings.map((w) => `<p class="warn">${w}</p>`).join("")}
      <textarea id="decision-note" placeholder="operator note (logged)"></textarea>
      <div class="row">
        <button id="btn-accept" class="accept">accept</button>
        <button id="btn-reject" class="reject">reject</button>
      </div>
      <p id="decision-msg" class="form-note"></p>`;
    this.root.querySelector("#btn-accept")!.addEventListener("click", () =>
      this.submit("accept"),
    );
    this.root.querySelector("#btn-reject")!.addEventListener("click", () =>
      this.submit("reject"),
    );
  }

  private async submit(verdict: "accept" | "reject"): Promise<void> {
    const pending = this.state.pendingUpdate;
    if (!pending || this.busy) return;
    this.busy = true;
    this.setButtonsEnabled(false);
    const note =
      (this.root.querySelector("#decision-note") as HTMLTextAreaElement | null)
        ?.value || undefined;
    const msg = this.root.querySelector("#decision-msg") as HTMLElement;
    try {
      await this.client.postDecision({
        update_id: pending.update_id,
        verdict,
        note,
      });
      this.onDecided();
    } catch (err) {
      if (err instanceof ServiceError && err.status === 409) {
        show(msg, "already decided elsewhere; refreshing", "error");
        this.onDecided();
      } else {
        show(msg, String(err), "error");
        this.setButtonsEnabled(true);
      }
    } finally {
      this.busy = false;
    }
  }

  private setButtonsEnabled(enabled: boolean): void {
    for (const id of ["#btn-accept", "#btn-reject"]) {
      const btn = this.root.querySelector(id) as HTMLButtonElement | null;
      if (btn) btn.disabled = !enabled;
    }
  }
}

export class HyperparameterForm {
  constructor(
    private root: HTMLElement,
    private client: ServiceClient,
    private state: ConsoleState,
    private onApplied: () => void,
  ) {}

  render(): void {
    const blocks = this.state.snapshot?.blocks ?? [];
    const options = blocks
      .map((b) => `<option value="${b.id}">${b.id}</option>`)
      .join("");
    this.root.innerHTML = `
      <div class="row">
        <select id="hp-block">${options}</select>
        <input id="hp-threshold" type="number" step="any" placeholder="threshold" />
        <input id="hp-capacity" type="number" step="1" placeholder="capacity" />
        <input id="hp-lambda" type="number" step="any" placeholder="lambda" />
        <button id="hp-apply">apply</button>
      </div>
      <p id="hp-msg" class="form-note"></p>`;
    this.root.querySelector("#hp-apply")!.addEventListener("click", () => this.apply());
  }

  private numberValue(id: string): number | undefined {
    const el = this.root.querySelector(id) as HTMLInputElement;
    return el.value === "" ? undefined : Number(el.value);
  }

  private async apply(): Promise<void> {
    const msg = this.root.querySelector("#hp-msg") as HTMLElement;
    const blockId = (this.root.querySelector("#hp-block") as HTMLSelectElement).value;
    const edits = {
      threshold_value: this.numberValue("#hp-threshold"),
      novelty_capacity: this.numberValue("#hp-capacity"),
      lambda: this.numberValue("#hp-lambda"),
    };
    const problems = validateHyperparameterEdits(edits);
    if (problems.length) {
      show(msg, problems.join("; "), "error");
      return; // invalid input never reaches the service
    }
    const body: Record<string, any> = {};
    if (edits.threshold_value !== undefined) body.threshold_value = edits.threshold_value;
    if (edits.novelty_capacity !== undefined) body.novelty_capacity = edits.novelty_capacity;
    if (edits.lambda !== undefined) body.strategy = { lambda: edits.lambda };
    if (Object.keys(body).length === 0) {
      show(msg, "nothing to apply", "error");
      return;
    }
    try {
      await this.client.patchHyperparameters({ blocks: { [blockId]: body } });
      show(msg, "applied", "ok");
      this.onApplied();
    } catch (err) {
      show(msg, err instanceof ServiceError ? JSON.stringify(err.body) : String(err), "error");
    }
  }
}

export class TargetForm {
  constructor(
    private root: HTMLElement,
    private client: ServiceClient,
    private state: ConsoleState,
    private onAdded: () => void,
  ) {}

  render(): void {
    const heads = (this.state.snapshot?.targets ?? [])
      .map((t) => `<li>${t}</li>`)
      .join("");
    this.root.innerHTML = `
      <ul class="head-list">${heads}</ul>
      <div class="row">
        <input id="target-id" placeholder="new target id" />
        <button id="target-add">add target</button>
      </div>
      <p id="target-msg" class="form-note"></p>`;
    this.root.querySelector("#target-add")!.addEventListener("click", () => this.add());
  }

  private async add(): Promise<void> {
    const msg = this.root.querySelector("#target-msg") as HTMLElement;
    const id = (this.root.querySelector("#target-id") as HTMLInputElement).value.trim();
    if (!id) {
      show(msg, "target id required", "error");
      return;
    }
    try {
      await this.client.postTarget({ target_id: id });
      show(msg, `target ${id} registered`, "ok");
      this.onAdded();
    } catch (err) {
      show(msg, err instanceof ServiceError ? JSON.stringify(err.body) : String(err), "error");
    }
  }
}

export class RollbackForm {
  constructor(
    private root: HTMLElement,
    private client: ServiceClient,
    private state: ConsoleState,
    private onRolledBack: () => void,
  ) {}

  render(): void {
    const count = this.state.snapshot?.version_count ?? 0;
    this.root.innerHTML = `
      <div class="row">
        <input id="rb-version" type="number" min="0" max="${Math.max(0, count - 1)}"
               placeholder="version" />
        <button id="rb-go">rollback</button>
      </div>
      <p id="rb-msg" class="form-note"></p>`;
    this.root.querySelector("#rb-go")!.addEventListener("click", () => this.rollback());
  }

  private async rollback(): Promise<void> {
    const msg = this.root.querySelector("#rb-msg") as HTMLElement;
    const raw = (this.root.querySelector("#rb-version") as HTMLInputElement).value;
    const version = Number(raw);
    if (raw === "" || !Number.isInteger(version) || version < 0) {
      show(msg, "version must be a non-negative integer", "error");
      return;
    }
    try {
      await this.client.postRollback(version);
      show(msg, `rolled back to version ${version}`, "ok");
      this.onRolledBack();
    } catch (err) {
      show(msg, err instanceof ServiceError ? JSON.stringify(err.body) : String(err), "error");
    }
  }
}
