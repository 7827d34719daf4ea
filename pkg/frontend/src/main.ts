/** Explorer app wiring: cache picker, region drawing, histogram panel. */

import { ApiClient, CacheSummary, QueryResponse, Region } from "./api.js";
import { histogramSeries } from "./colors.js";
import {
  circleFromDrag,
  DegenerateRegionError,
  ellipseFromDrag,
  Point,
  polygonFromClicks,
  ViewTransform,
} from "./geometry.js";
import {
  drawHeatmap,
  drawHistogramPanel,
  drawProbeMarker,
  drawRegionOutline,
  legendHtml,
  timingText,
} from "./render.js";
import { ExplorerState } from "./state.js";

type Mode = "circle" | "ellipse" | "polygon" | "probe";

const api = new ApiClient("");
const state = new ExplorerState((cacheId, req) => api.query(cacheId, req));

const fieldCanvas = document.getElementById("field") as HTMLCanvasElement;
const histCanvas = document.getElementById("histograms") as HTMLCanvasElement;
const cacheSelect = document.getElementById("cache") as HTMLSelectElement;
const modeSelect = document.getElementById("mode") as HTMLSelectElement;
const colormapSelect = document.getElementById("colormap") as HTMLSelectElement;
const binsInput = document.getElementById("bins") as HTMLInputElement;
const statusLine = document.getElementById("status") as HTMLElement;
const legendLine = document.getElementById("legend") as HTMLElement;
const provenanceLine = document.getElementById("provenance") as HTMLElement;

let caches: CacheSummary[] = [];
let transform: ViewTransform | null = null;
let dragStart: Point | null = null;
let polygonPoints: Point[] = [];

function note(text: string, isError = false): void {
  statusLine.textContent = text;
  statusLine.classList.toggle("error", isError);
}

function currentCache(): CacheSummary | undefined {
  return caches.find((c) => c.id === state.view.cacheId);
}

function rebuildTransform(): void {
  const cache = currentCache();
  if (!cache) return;
  transform = new ViewTransform(
    { x0: cache.origin[0], y0: cache.origin[1], x1: cache.extent[0], y1: cache.extent[1] },
    fieldCanvas.width,
    fieldCanvas.height,
  );
}

async function repaint(resp: QueryResponse): Promise<void> {
  const ctx = fieldCanvas.getContext("2d")!;
  if (resp.field.raster_png_b64) {
    await drawHeatmap(ctx, resp.field.raster_png_b64);
  }
  // the overlay is drawn from the response provenance, never from the
  // optimistic editing state, so field and outline always agree
  if (transform) {
    drawRegionOutline(ctx, resp.provenance.region as unknown as Region, transform);
    const compare = resp.probe ?? resp.most_dissimilar;
    if (compare) drawProbeMarker(ctx, compare.seed, transform);
  }
  const compare = resp.probe ?? resp.most_dissimilar;
  const series = histogramSeries(
    resp.reference_bins,
    compare?.bins ?? null,
    resp.probe ? "probe" : "most dissimilar",
  );
  drawHistogramPanel(histCanvas.getContext("2d")!, series);
  legendLine.innerHTML = legendHtml(series);
  const div = compare?.divergence;
  note(`${timingText(resp)}${div != null ? ` - compare divergence ${div.toFixed(3)}` : ""}`);
  provenanceLine.textContent =
    `showing: ${JSON.stringify(resp.provenance.region)} @ bins=${resp.provenance.bins}`;
}

state.onResponse = (resp) => {
  void repaint(resp);
};
state.onError = (err) => note(String(err), true);

function canvasPoint(ev: MouseEvent): Point {
  const rect = fieldCanvas.getBoundingClientRect();
  return {
    x: ((ev.clientX - rect.left) / rect.width) * fieldCanvas.width,
    y: ((ev.clientY - rect.top) / rect.height) * fieldCanvas.height,
  };
}

fieldCanvas.addEventListener("mousedown", (ev) => {
  if (!transform) return;
  const mode = modeSelect.value as Mode;
  const p = transform.toDomain(canvasPoint(ev));
  if (mode === "probe") {
    state.setProbe([p.x, p.y]);
    return;
  }
  if (mode === "polygon") {
    polygonPoints.push(p);
    note(`polygon: ${polygonPoints.length} points (double-click to commit)`);
    return;
  }
  dragStart = p;
});

fieldCanvas.addEventListener("mouseup", (ev) => {
  if (!transform || dragStart === null) return;
  const mode = modeSelect.value as Mode;
  const end = transform.toDomain(canvasPoint(ev));
  try {
    if (mode === "circle") state.commitRegion(circleFromDrag(dragStart, end));
    else if (mode === "ellipse") state.commitRegion(ellipseFromDrag(dragStart, end));
  } catch (err) {
    if (err instanceof DegenerateRegionError) note(`rejected: ${err.message}`, true);
    else throw err;
  }
  dragStart = null;
});

fieldCanvas.addEventListener("dblclick", () => {
  if ((modeSelect.value as Mode) !== "polygon") return;
  try {
    state.commitRegion(polygonFromClicks(polygonPoints));
  } catch (err) {
    if (err instanceof DegenerateRegionError) note(`rejected: ${err.message}`, true);
    else throw err;
  }
  polygonPoints = [];
});

cacheSelect.addEventListener("change", () => {
  state.selectCache(cacheSelect.value);
  rebuildTransform();
  note("draw a reference region to query");
});

colormapSelect.addEventListener("change", () => {
  state.setColormap(colormapSelect.value as "viridis" | "grayscale" | "diverging");
});

binsInput.addEventListener("change", () => {
  const raw = binsInput.value.trim();
  state.setBins(raw === "" || raw === "auto" ? "auto" : Number(raw));
});

async function boot(): Promise<void> {
  try {
    caches = await api.datasets();
  } catch (err) {
    note(`cannot reach the query service: ${err}`, true);
    return;
  }
  cacheSelect.innerHTML = caches
    .map((c) => `<option value="${c.id}">${c.id} (${c.nx}x${c.ny}, N=${c.n_steps})</option>`)
    .join("");
  if (caches.length > 0) {
    state.selectCache(caches[0].id);
    rebuildTransform();
    note("draw a reference region to query");
  } else {
    note("no caches loaded on the server", true);
  }
}

void boot();
