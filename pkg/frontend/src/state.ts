// Workbench state and its pure update rules.
//
// The state carries a response id for the displayed decomposition and
// report; responses from superseded requests are discarded, so the panels
// always agree on one parameter set (latest wins). The parameter history
// is append-only and travels with the export, so a published measurement
// can cite the exact settings that produced it.

import type { ChainReport, Manifest, ParameterSet, Rect, SignalSamples } from "./types.js";

export interface HistoryEntry {
  action: string;
  params: ParameterSet;
}

export interface WorkbenchState {
  sessionId: string | null;
  sourceName: string;
  imageWidth: number;
  imageHeight: number;
  params: ParameterSet;
  previousPatches: Rect[];
  history: HistoryEntry[];
  manifest: Manifest | null;
  report: ChainReport | null;
  reportId: string | null;
  overlayUrl: string | null;
  signal: SignalSamples | null;
  displayedResponseId: number;
  warnings: string[];
  error: string | null;
}

export function defaultParams(): ParameterSet {
  return {
    patch: null,
    band: [0.026, 1.0],
    variant: "isotropic",
    flow: { dt: 0.013, t_max: 1.3, inner_tol: 1e-5, inner_max_iter: 500 },
    peaks: { smooth_sigma: 2.0, threshold: null, min_separation: null },
    orientation: "vertical",
    filterWidthPx: 1,
    filterHeightFraction: 2 / 3,
  };
}

export function initialState(): WorkbenchState {
  return {
    sessionId: null,
    sourceName: "",
    imageWidth: 0,
    imageHeight: 0,
    params: defaultParams(),
    previousPatches: [],
    history: [],
    manifest: null,
    report: null,
    reportId: null,
    overlayUrl: null,
    signal: null,
    displayedResponseId: 0,
    warnings: [],
    error: null,
  };
}

export function isZeroArea(rect: Rect): boolean {
  return Math.round(rect.w) <= 0 || Math.round(rect.h) <= 0;
}

export function clampRect(rect: Rect, width: number, height: number): Rect {
  const x0 = Math.max(0, Math.min(Math.round(rect.x0), width - 1));
  const y0 = Math.max(0, Math.min(Math.round(rect.y0), height - 1));
  const w = Math.max(0, Math.min(Math.round(rect.w), width - x0));
  const h = Math.max(0, Math.min(Math.round(rect.h), height - y0));
  return { x0, y0, w, h };
}

function cloneParams(params: ParameterSet): ParameterSet {
  return JSON.parse(JSON.stringify(params)) as ParameterSet;
}

export function recordHistory(state: WorkbenchState, action: string): WorkbenchState {
  return {
    ...state,
    history: [...state.history, { action, params: cloneParams(state.params) }],
  };
}

/** Patch selection; a zero-area drag leaves the state untouched. */
export function withPatch(state: WorkbenchState, rect: Rect): WorkbenchState {
  const clamped = clampRect(rect, state.imageWidth, state.imageHeight);
  if (isZeroArea(clamped)) {
    return state;
  }
  const previous = state.params.patch;
  const next: WorkbenchState = {
    ...state,
    params: { ...cloneParams(state.params), patch: clamped },
    previousPatches: previous ? [...state.previousPatches, previous] : state.previousPatches,
    // stale panels must not outlive a patch change
    manifest: null,
    report: null,
    reportId: null,
    overlayUrl: null,
    signal: null,
  };
  return recordHistory(next, "patch-select");
}

/** Undo the last patch selection, restoring the previous rectangle. */
export function undoPatch(state: WorkbenchState): WorkbenchState {
  if (state.previousPatches.length === 0) {
    return state;
  }
  const previous = state.previousPatches[state.previousPatches.length - 1];
  const next: WorkbenchState = {
    ...state,
    params: { ...cloneParams(state.params), patch: previous },
    previousPatches: state.previousPatches.slice(0, -1),
    manifest: null,
    report: null,
    reportId: null,
    overlayUrl: null,
    signal: null,
  };
  return recordHistory(next, "patch-undo");
}

export function withParams(
  state: WorkbenchState,
  action: string,
  update: Partial<ParameterSet>,
): WorkbenchState {
  const next: WorkbenchState = {
    ...state,
    params: { ...cloneParams(state.params), ...update },
  };
  return recordHistory(next, action);
}

/** Apply a response only if it belongs to the newest issued request. */
export function applyIfCurrent(
  state: WorkbenchState,
  responseId: number,
  latestIssued: number,
  apply: (s: WorkbenchState) => WorkbenchState,
): WorkbenchState {
  if (responseId !== latestIssued) {
    return state; // superseded while in flight
  }
  return { ...apply(state), displayedResponseId: responseId };
}

export function toggleOmission(current: number[], index: number): number[] {
  const set = new Set(current);
  if (set.has(index)) {
    set.delete(index);
  } else {
    set.add(index);
  }
  return [...set].sort((a, b) => a - b);
}
