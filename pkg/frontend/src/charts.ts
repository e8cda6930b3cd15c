/** Minimal canvas strip charts. Gaps between segments stay empty: a NULL
 * reading is visible as missing line, never bridged. */

import type { ChartSegment } from "./model.js";

const PAD = 4;

export function drawChart(canvas: HTMLCanvasElement, segments: ChartSegment[], windowLength: number): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);

  const all = segments.flatMap((s) => s.points);
  if (all.length === 0) {
    ctx.fillStyle = "#666";
    ctx.font = "10px monospace";
    ctx.fillText("no data", 6, height / 2);
    return;
  }

  const maxSeq = Math.max(...all.map((p) => p.seq));
  const minSeq = maxSeq - windowLength + 1;
  let lo = Math.min(...all.map((p) => p.value));
  let hi = Math.max(...all.map((p) => p.value));
  if (hi === lo) {
    hi += 1;
    lo -= 1;
  }

  const x = (seq: number) => PAD + ((seq - minSeq) / (maxSeq - minSeq || 1)) * (width - 2 * PAD);
  const y = (v: number) => height - PAD - ((v - lo) / (hi - lo)) * (height - 2 * PAD);

  ctx.strokeStyle = "#4cc2ff";
  ctx.fillStyle = "#4cc2ff";
  ctx.lineWidth = 1.25;
  for (const segment of segments) {
    if (segment.points.length === 1) {
      const p = segment.points[0];
      ctx.fillRect(x(p.seq) - 1, y(p.value) - 1, 2.5, 2.5);
      continue;
    }
    ctx.beginPath();
    segment.points.forEach((p, i) => {
      if (i === 0) ctx.moveTo(x(p.seq), y(p.value));
      else ctx.lineTo(x(p.seq), y(p.value));
    });
    ctx.stroke();
  }

  ctx.fillStyle = "#9aa";
  ctx.font = "9px monospace";
  ctx.fillText(String(hi), 2, 9);
  ctx.fillText(String(lo), 2, height - 2);
}
