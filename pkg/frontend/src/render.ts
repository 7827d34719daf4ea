/** Canvas rendering: heatmap, region overlay, histogram panel, timing. */

import type { QueryResponse } from "./api.js";
import type { Region } from "./api.js";
import { HistogramSeries } from "./colors.js";
import { regionOutline, ViewTransform } from "./geometry.js";

/** Draw the server-rendered raster PNG stretched onto the canvas. */
export function drawHeatmap(
  ctx: CanvasRenderingContext2D,
  rasterPngB64: string,
): Promise<void> {
  return new Promise((resolve, reject) => {
    const img = new Image();
    img.onload = () => {
      ctx.imageSmoothingEnabled = false;
      ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
      ctx.drawImage(img, 0, 0, ctx.canvas.width, ctx.canvas.height);
      resolve();
    };
    img.onerror = () => reject(new Error("raster decode failed"));
    img.src = `data:image/png;base64,${rasterPngB64}`;
  });
}

export function drawRegionOutline(
  ctx: CanvasRenderingContext2D,
  region: Region,
  transform: ViewTransform,
  color = "#16c95e",
): void {
  const pts = regionOutline(region).map(([x, y]) => transform.toScreen({ x, y }));
  ctx.save();
  ctx.strokeStyle = color;
  ctx.lineWidth = 2;
  ctx.beginPath();
  pts.forEach((p, i) => (i === 0 ? ctx.moveTo(p.x, p.y) : ctx.lineTo(p.x, p.y)));
  ctx.stroke();
  ctx.restore();
}

export function drawProbeMarker(
  ctx: CanvasRenderingContext2D,
  point: [number, number],
  transform: ViewTransform,
  color = "#ffffff",
): void {
  const p = transform.toScreen({ x: point[0], y: point[1] });
  ctx.save();
  ctx.strokeStyle = color;
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  ctx.moveTo(p.x - 6, p.y);
  ctx.lineTo(p.x + 6, p.y);
  ctx.moveTo(p.x, p.y - 6);
  ctx.lineTo(p.x, p.y + 6);
  ctx.stroke();
  ctx.restore();
}

/** Grouped-bar histogram panel: one lane per invariant half. */
export function drawHistogramPanel(
  ctx: CanvasRenderingContext2D,
  series: HistogramSeries[],
): void {
  const { width, height } = ctx.canvas;
  ctx.clearRect(0, 0, width, height);
  if (series.length === 0) return;
  const peak = Math.max(...series.map((s) => Math.max(...s.values, 0)), 1e-12);
  const laneWidth = width / 2;
  const lanes: Record<string, number> = { strain: 0, rotation: laneWidth };
  ctx.save();
  for (const s of series) {
    const lane = s.label.includes("rotation") ? lanes.rotation : lanes.strain;
    const n = s.values.length;
    const barW = (laneWidth - 16) / n;
    ctx.fillStyle = s.color;
    ctx.globalAlpha = s.label.startsWith("reference") ? 0.9 : 0.62;
    s.values.forEach((v, i) => {
      const h = (v / peak) * (height - 18);
      ctx.fillRect(lane + 8 + i * barW, height - h, Math.max(barW - 1, 1), h);
    });
  }
  ctx.globalAlpha = 1;
  ctx.fillStyle = "#9aa0a6";
  ctx.font = "11px system-ui";
  ctx.fillText("strain invariant", 8, 12);
  ctx.fillText("rotation invariant", laneWidth + 8, 12);
  ctx.restore();
}

export function legendHtml(series: HistogramSeries[]): string {
  return series
    .map(
      (s) =>
        `<span class="legend-item"><span class="swatch" style="background:${s.color}"></span>${s.label}</span>`,
    )
    .join(" ");
}

export function timingText(resp: QueryResponse): string {
  const { reference_ms, field_ms } = resp.timing;
  return `reference ${reference_ms.toFixed(1)} ms + field ${field_ms.toFixed(1)} ms`;
}
