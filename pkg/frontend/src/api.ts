// Thin typed client for the analysis service.

import type {
  ChainReport,
  DecomposeResponse,
  DetectResponse,
  ParameterSet,
  PatchedReportResponse,
  SessionInfo,
} from "./types.js";

async function asJson<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    const body = await resp.text();
    throw new Error(`service returned ${resp.status}: ${body}`);
  }
  return (await resp.json()) as T;
}

export class ServiceClient {
  constructor(private readonly baseUrl: string) {}

  url(path: string): string {
    return this.baseUrl + path;
  }

  async upload(bytes: BlobPart, filename: string): Promise<SessionInfo> {
    const form = new FormData();
    form.append("file", new Blob([bytes], { type: "image/png" }), filename);
    return asJson(await fetch(this.url("/sessions"), { method: "POST", body: form }));
  }

  async calibrate(sessionId: string, pixelsPerMm: number): Promise<void> {
    await asJson(
      await fetch(this.url(`/sessions/${sessionId}/calibrate`), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ method: "explicit", pixels_per_mm: pixelsPerMm }),
      }),
    );
  }

  async decompose(sessionId: string, params: ParameterSet): Promise<DecomposeResponse> {
    const body = {
      patch: params.patch ? [params.patch.x0, params.patch.y0, params.patch.w, params.patch.h] : null,
      band_edges: [params.band[0], params.band[1]],
      variant: params.variant,
      flow: params.flow,
    };
    return asJson(
      await fetch(this.url(`/sessions/${sessionId}/decompose`), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(body),
      }),
    );
  }

  async detectChains(sessionId: string, params: ParameterSet): Promise<DetectResponse> {
    const body = {
      patch: params.patch ? [params.patch.x0, params.patch.y0, params.patch.w, params.patch.h] : null,
      band: [params.band[0], params.band[1]],
      variant: params.variant,
      flow: params.flow,
      peaks: params.peaks,
      orientation: params.orientation,
      filter_width_px: params.filterWidthPx,
      filter_height_fraction: params.filterHeightFraction,
    };
    return asJson(
      await fetch(this.url(`/sessions/${sessionId}/detect/chains`), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(body),
      }),
    );
  }

  async patchOmissions(
    sessionId: string,
    reportId: string,
    omit: number[],
  ): Promise<PatchedReportResponse> {
    return asJson(
      await fetch(this.url(`/sessions/${sessionId}/reports/${reportId}`), {
        method: "PATCH",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ omit }),
      }),
    );
  }

  async getReport(sessionId: string, reportId: string): Promise<{ report: ChainReport }> {
    return asJson(await fetch(this.url(`/sessions/${sessionId}/reports/${reportId}`)));
  }

  async fetchBinary(path: string): Promise<Uint8Array> {
    const resp = await fetch(this.url(path));
    if (!resp.ok) throw new Error(`artifact fetch failed: ${resp.status}`);
    return new Uint8Array(await resp.arrayBuffer());
  }
}
