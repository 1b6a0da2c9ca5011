// Browser entry point: DOM wiring only; all state rules live in state.ts
// and every number shown comes from a service response.

import { ServiceClient } from "./api.js";
import { drawSignalPlot, signalPlotGeometry } from "./plot.js";
import type { WorkbenchState } from "./state.js";
import { Workbench } from "./workbench.js";

const client = new ServiceClient("");
const workbench = new Workbench(client);

const el = <T extends HTMLElement>(id: string): T => {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
};

const fileInput = el<HTMLInputElement>("file");
const ppmmInput = el<HTMLInputElement>("ppmm");
const imageCanvas = el<HTMLCanvasElement>("image-canvas");
const overlayImg = el<HTMLImageElement>("overlay");
const bandImg = el<HTMLImageElement>("band");
const plotCanvas = el<HTMLCanvasElement>("plot");
const thresholdSlider = el<HTMLInputElement>("threshold");
const thresholdValue = el<HTMLSpanElement>("threshold-value");
const smoothingSlider = el<HTMLInputElement>("smoothing");
const bandLoInput = el<HTMLInputElement>("band-lo");
const bandHiInput = el<HTMLInputElement>("band-hi");
const variantToggle = el<HTMLInputElement>("variant");
const undoButton = el<HTMLButtonElement>("undo");
const exportButton = el<HTMLButtonElement>("export");
const statusLine = el<HTMLDivElement>("status");
const reportPane = el<HTMLPreElement>("report");
const historyPane = el<HTMLPreElement>("history");

let sourceBitmap: ImageBitmap | null = null;

function drawBase(state: WorkbenchState): void {
  const ctx = imageCanvas.getContext("2d");
  if (!ctx || !sourceBitmap) return;
  imageCanvas.width = sourceBitmap.width;
  imageCanvas.height = sourceBitmap.height;
  ctx.drawImage(sourceBitmap, 0, 0);
  const patch = state.params.patch;
  if (patch) {
    ctx.strokeStyle = "#e8790f";
    ctx.lineWidth = 2;
    ctx.strokeRect(patch.x0, patch.y0, patch.w, patch.h);
  }
}

function render(state: WorkbenchState): void {
  drawBase(state);
  overlayImg.src = state.overlayUrl ?? "";
  overlayImg.style.display = state.overlayUrl ? "block" : "none";
  const band = state.manifest?.bands.at(-1);
  bandImg.src = band ? band.url : "";
  bandImg.style.display = band ? "block" : "none";

  if (state.signal) {
    const geometry = signalPlotGeometry(state.signal, state.report, plotCanvas.width, plotCanvas.height);
    const ctx = plotCanvas.getContext("2d");
    if (ctx) drawSignalPlot(ctx, geometry, plotCanvas.width, plotCanvas.height);
    thresholdSlider.max = String(Math.ceil(geometry.valueRange[1] * 100) / 100);
    thresholdValue.textContent = state.signal.threshold.toFixed(3);
  }

  reportPane.textContent = state.report ? JSON.stringify(state.report, null, 2) : "(no report)";
  historyPane.textContent = state.history
    .map((h, i) => `${i + 1}. ${h.action}`)
    .join("\n");
  exportButton.disabled = !state.reportId;
  statusLine.textContent = state.error ?? state.warnings.join("; ");
}

workbench.onChange(render);

fileInput.addEventListener("change", async () => {
  const file = fileInput.files?.[0];
  if (!file) return;
  const bytes = await file.arrayBuffer();
  sourceBitmap = await createImageBitmap(new Blob([bytes]));
  const ppmm = ppmmInput.value ? Number(ppmmInput.value) : null;
  await workbench.loadImage(bytes, file.name, ppmm);
});

let dragStart: { x: number; y: number } | null = null;
imageCanvas.addEventListener("mousedown", (ev) => {
  const r = imageCanvas.getBoundingClientRect();
  dragStart = { x: ev.clientX - r.left, y: ev.clientY - r.top };
});
imageCanvas.addEventListener("mouseup", async (ev) => {
  if (!dragStart) return;
  const r = imageCanvas.getBoundingClientRect();
  const end = { x: ev.clientX - r.left, y: ev.clientY - r.top };
  const rect = {
    x0: Math.min(dragStart.x, end.x),
    y0: Math.min(dragStart.y, end.y),
    w: Math.abs(end.x - dragStart.x),
    h: Math.abs(end.y - dragStart.y),
  };
  dragStart = null;
  await workbench.selectPatch(rect);
});

thresholdSlider.addEventListener("change", async () => {
  await workbench.setThreshold(Number(thresholdSlider.value));
});
smoothingSlider.addEventListener("change", async () => {
  await workbench.setSmoothing(Number(smoothingSlider.value));
});
bandLoInput.addEventListener("change", async () => {
  await workbench.setBand(Number(bandLoInput.value), Number(bandHiInput.value));
});
bandHiInput.addEventListener("change", async () => {
  await workbench.setBand(Number(bandLoInput.value), Number(bandHiInput.value));
});
variantToggle.addEventListener("change", async () => {
  await workbench.setVariant(variantToggle.checked ? "anisotropic" : "isotropic");
});
undoButton.addEventListener("click", async () => {
  await workbench.undoPatchSelection();
});

overlayImg.addEventListener("click", async (ev) => {
  // clicking near a drawn line toggles its omission
  const state = workbench.state;
  if (!state.report || !state.params.patch) return;
  const r = overlayImg.getBoundingClientRect();
  const x = ((ev.clientX - r.left) / r.width) * state.params.patch.w;
  let best = -1;
  let bestDist = 6;
  state.report.positions_px.forEach((p, i) => {
    const d = Math.abs(p - x);
    if (d < bestDist) {
      best = i;
      bestDist = d;
    }
  });
  if (best >= 0) await workbench.omitLine(best);
});

exportButton.addEventListener("click", async () => {
  const bundle = await workbench.exportBundle();
  if (!bundle) return;
  const payload = {
    report: JSON.parse(bundle.reportJson),
    parameter_history: bundle.history,
  };
  const blob = new Blob([JSON.stringify(payload, null, 2)], { type: "application/json" });
  const link = document.createElement("a");
  link.href = URL.createObjectURL(blob);
  link.download = "paperlines-report.json";
  link.click();
  if (bundle.overlayPng) {
    const pngLink = document.createElement("a");
    pngLink.href = URL.createObjectURL(new Blob([bundle.overlayPng.slice()], { type: "image/png" }));
    pngLink.download = "paperlines-overlay.png";
    pngLink.click();
  }
});
