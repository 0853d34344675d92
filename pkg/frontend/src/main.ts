/** Dashboard wiring: one event-application loop per connection feeding the
 * console state, with renders after every batch so the UI never shows a
 * half-applied update. */

import { EventStream, ServiceClient } from "./client.js";
import { drawScoreChart, renderBufferGauge } from "./charts.js";
import { DecisionCard, HyperparameterForm, RollbackForm, TargetForm } from "./forms.js";
import { ConsoleState } from "./state.js";
import type { ConnectionStatus } from "./types.js";

function element<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
}

const params = new URLSearchParams(location.search);
const base = params.get("service") ?? `${location.protocol}//${location.host}`;

const client = new ServiceClient(base);
const state = new ConsoleState();

const banner = element<HTMLElement>("banner");
const modeLabel = element<HTMLElement>("mode-label");
const versionLabel = element<HTMLElement>("version-label");
const ingestedLabel = element<HTMLElement>("ingested-label");
const blocksRoot = element<HTMLElement>("blocks");
const timelineRoot = element<HTMLElement>("timeline");

const decisionCard = new DecisionCard(element("decision-card"), client, state, refresh);
const hyperForm = new HyperparameterForm(element("hyper-form"), client, state, refresh);
const targetForm = new TargetForm(element("target-form"), client, state, refresh);
const rollbackForm = new RollbackForm(element("rollback-form"), client, state, refresh);

function setStatus(status: ConnectionStatus): void {
  banner.dataset.status = status;
  banner.textContent =
    status === "live"
      ? `live — ${base}`
      : status === "degraded"
        ? "connection lost, retrying…"
        : status;
}

function renderBlocks(): void {
  const snapshot = state.snapshot;
  if (!snapshot) return;
  for (const block of snapshot.blocks) {
    let card = document.getElementById(`block-${block.id}`);
    if (!card) {
      card = document.createElement("section");
      card.id = `block-${block.id}`;
      card.className = "block-card";
      card.innerHTML = `
        <h3>${block.id}${block.target ? ` (${block.target})` : ""}</h3>
        <canvas width="560" height="120"></canvas>
        <div class="gauges"></div>
        <p class="block-stats"></p>`;
      blocksRoot.appendChild(card);
    }
    const points = state.scoreWindows.get(block.id) ?? [];
    drawScoreChart(card.querySelector("canvas")!, points, block.threshold.value);
    renderBufferGauge(card.querySelector(".gauges")!, block);
    card.querySelector(".block-stats")!.textContent =
      `threshold ${block.threshold.value.toFixed(5)} · ` +
      `accepted ${block.updates_accepted} / rejected ${block.updates_rejected} · ` +
      `stream error ${block.prediction_error.toFixed(5)}`;
  }
}

function renderTimeline(): void {
  timelineRoot.innerHTML = state.timeline
    .slice(-40)
    .reverse()
    .map((entry) => `<li class="${entry.kind}"><span>#${entry.seq}</span> ${entry.text}</li>`)
    .join("");
}

function render(): void {
  const snapshot = state.snapshot;
  if (snapshot) {
    modeLabel.textContent = snapshot.mode.state;
    versionLabel.textContent = `v${snapshot.version ?? "-"} (${snapshot.version_count} stored)`;
    ingestedLabel.textContent = String(snapshot.ingested);
  }
  renderBlocks();
  renderTimeline();
  decisionCard.render();
}

async function refresh(): Promise<void> {
  state.applyState(await client.fetchState());
  render();
  hyperForm.render();
  targetForm.render();
  rollbackForm.render();
}

async function run(): Promise<void> {
  setStatus("connecting");
  for (;;) {
    try {
      await refresh();
      break;
    } catch {
      setStatus("degraded");
      await new Promise((resolve) => setTimeout(resolve, 1500));
    }
  }
  const stream = new EventStream(base, { since: state.lastSeq, onStatus: setStatus });
  let needsRefresh = false;
  let renderQueued = false;
  for await (const event of stream.events()) {
    needsRefresh = state.applyEvent(event) || needsRefresh;
    if (!renderQueued) {
      renderQueued = true;
      queueMicrotask(async () => {
        renderQueued = false;
        if (needsRefresh) {
          needsRefresh = false;
          await refresh().catch(() => setStatus("degraded"));
        } else {
          render();
        }
      });
    }
  }
}

run();
