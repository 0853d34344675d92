/** Hand-rolled canvas charts: per-block score series with the threshold line,
 * and buffer fill gauges. No chart library, no client-side math beyond
 * pixel mapping. */

import type { BlockState, ChartPoint } from "./types.js";

const SCORE_COLOR = "#4da3ff";
const NOVEL_COLOR = "#ff5c5c";
const THRESHOLD_COLOR = "#ffb347";

export function drawScoreChart(
  canvas: HTMLCanvasElement,
  points: ChartPoint[],
  thresholdValue: number,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  if (points.length === 0) return;

  let max = thresholdValue;
  for (const p of points) max = Math.max(max, p.score);
  if (max <= 0) max = 1;
  const pad = 4;
  const xOf = (i: number) =>
    pad + (i / Math.max(1, points.length - 1)) * (width - 2 * pad);
  const yOf = (v: number) => height - pad - (v / max) * (height - 2 * pad) * 0.92;

  // threshold line
  ctx.strokeStyle = THRESHOLD_COLOR;
  ctx.setLineDash([5, 4]);
  ctx.beginPath();
  ctx.moveTo(pad, yOf(thresholdValue));
  ctx.lineTo(width - pad, yOf(thresholdValue));
  ctx.stroke();
  ctx.setLineDash([]);

  // score polyline
  ctx.strokeStyle = SCORE_COLOR;
  ctx.lineWidth = 1;
  ctx.beginPath();
  points.forEach((p, i) => {
    const x = xOf(i);
    const y = yOf(p.score);
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();

  // novel samples as dots
  ctx.fillStyle = NOVEL_COLOR;
  points.forEach((p, i) => {
    if (p.label === "novel") {
      ctx.beginPath();
      ctx.arc(xOf(i), yOf(p.score), 2, 0, 2 * Math.PI);
      ctx.fill();
    }
  });
}

export function renderBufferGauge(container: HTMLElement, block: BlockState): void {
  const novelPct = block.novelty.capacity
    ? Math.min(100, (100 * block.novelty.fill) / block.novelty.capacity)
    : 0;
  const pendingBadge = block.novelty.pending
    ? `<span class="badge pending" title="overflow waiting for the next drain">+${block.novelty.pending} pending</span>`
    : "";
  const triggerBadge = block.trigger_pending
    ? `<span class="badge trigger">update queued</span>`
    : "";
  container.innerHTML = `
    <div class="gauge-row">
      <span class="gauge-label">novelty ${block.novelty.fill}/${block.novelty.capacity}</span>
      <div class="gauge"><div class="gauge-fill" style="width:${novelPct}%"></div></div>
      ${pendingBadge}${triggerBadge}
    </div>
    <div class="gauge-row">
      <span class="gauge-label">familiarity ${block.familiarity.fill}${
        block.familiarity.cap ? "/" + block.familiarity.cap : ""
      }</span>
    </div>`;
}
