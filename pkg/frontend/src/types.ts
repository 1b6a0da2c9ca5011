// Payload shapes of the analysis service. Everything shown in the UI comes
// from these responses; no measurement is ever computed in the browser.

export interface Rect {
  x0: number;
  y0: number;
  w: number;
  h: number;
}

export type Variant = "isotropic" | "anisotropic";

export interface FlowParams {
  dt: number;
  t_max: number;
  inner_tol: number;
  inner_max_iter: number;
}

export interface PeakParams {
  smooth_sigma: number;
  threshold: number | null;
  min_separation: number | null;
}

export interface ParameterSet {
  patch: Rect | null;
  band: [number, number];
  variant: Variant;
  flow: FlowParams;
  peaks: PeakParams;
  orientation: "vertical" | "horizontal";
  filterWidthPx: number;
  filterHeightFraction: number;
}

export interface SessionInfo {
  session_id: string;
  width: number;
  height: number;
}

export interface BandEntry {
  url: string;
  t_lo: number;
  t_hi: number;
  vmin: number;
  vmax: number;
}

export interface Manifest {
  schema: number;
  band_edges: number[];
  variant: string;
  flow: FlowParams;
  mean: number;
  bands: BandEntry[];
  spectrum: { times: number[]; amplitude: number[] };
  converged: boolean;
  patch: number[] | null;
}

export interface DecomposeResponse {
  cached: boolean;
  manifest: Manifest;
}

export interface ChainReport {
  schema: number;
  kind: "chain";
  orientation: string;
  position_basis: string;
  positions_px: number[];
  omitted_indices: number[];
  pixels_per_mm: number | null;
  distances_mm: number[] | null;
  mean_distance_mm: number | null;
  plausible_range_mm: number[];
  plausibility_warning: boolean;
  params: Record<string, unknown>;
  provenance: Record<string, unknown>;
}

export interface SignalSamples {
  values: number[];
  threshold: number;
  offset0: number;
}

export interface DetectResponse {
  report_id: string | null;
  report: ChainReport | null;
  overlay_url: string | null;
  cached_stack: boolean;
  warnings: string[];
  signal: SignalSamples;
}

export interface PatchedReportResponse {
  report_id: string;
  report: ChainReport;
  overlay_url: string;
}
