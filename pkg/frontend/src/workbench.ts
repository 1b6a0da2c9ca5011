// Controller wiring the state rules to the service client.
//
// Threshold and smoothing edits re-run detection only (the service reuses
// its cached flow stack, so these are fast); patch, band and variant edits
// re-run the decomposition and then detection. In-flight responses that a
// newer request has superseded are dropped.

import { ServiceClient } from "./api.js";
import {
  applyIfCurrent,
  initialState,
  isZeroArea,
  recordHistory,
  toggleOmission,
  undoPatch,
  withParams,
  withPatch,
  type WorkbenchState,
} from "./state.js";
import type { Rect, Variant } from "./types.js";

export interface ExportBundle {
  reportJson: string;
  overlayPng: Uint8Array | null;
  history: WorkbenchState["history"];
}

export class Workbench {
  state: WorkbenchState = initialState();
  private requestCounter = 0;
  private listeners: Array<(s: WorkbenchState) => void> = [];

  constructor(private readonly client: ServiceClient) {}

  onChange(listener: (s: WorkbenchState) => void): void {
    this.listeners.push(listener);
  }

  private setState(next: WorkbenchState): void {
    this.state = next;
    for (const listener of this.listeners) {
      listener(next);
    }
  }

  async loadImage(bytes: BlobPart, filename: string, pixelsPerMm: number | null): Promise<void> {
    const info = await this.client.upload(bytes, filename);
    if (pixelsPerMm !== null) {
      await this.client.calibrate(info.session_id, pixelsPerMm);
    }
    this.setState({
      ...initialState(),
      sessionId: info.session_id,
      sourceName: filename,
      imageWidth: info.width,
      imageHeight: info.height,
    });
  }

  /** Drag handler: clamp, store, and re-run the pipeline. */
  async selectPatch(rect: Rect): Promise<void> {
    const before = this.state;
    const next = withPatch(before, rect);
    if (next === before) {
      return; // zero-area drag
    }
    this.setState(next);
    await this.rerunAll();
  }

  async undoPatchSelection(): Promise<void> {
    const before = this.state;
    const next = undoPatch(before);
    if (next === before) {
      return;
    }
    this.setState(next);
    await this.rerunAll();
  }

  async setThreshold(threshold: number | null): Promise<void> {
    this.setState(withParams(this.state, "threshold", {
      peaks: { ...this.state.params.peaks, threshold },
    }));
    await this.rerunDetection();
  }

  async setSmoothing(sigma: number): Promise<void> {
    this.setState(withParams(this.state, "smoothing", {
      peaks: { ...this.state.params.peaks, smooth_sigma: sigma },
    }));
    await this.rerunDetection();
  }

  async setBand(lo: number, hi: number): Promise<void> {
    if (!(lo >= 0 && lo < hi && hi <= this.state.params.flow.t_max)) {
      this.setState({ ...this.state, error: `band [${lo}, ${hi}] outside the flow range` });
      return;
    }
    this.setState(withParams(this.state, "band", { band: [lo, hi] }));
    await this.rerunAll();
  }

  async setVariant(variant: Variant): Promise<void> {
    this.setState(withParams(this.state, "variant", { variant }));
    await this.rerunAll();
  }

  /** Toggle one detected line in or out of the measurement. */
  async omitLine(index: number): Promise<void> {
    const { sessionId, reportId, report } = this.state;
    if (!sessionId || !reportId || !report) {
      return;
    }
    const omit = toggleOmission(report.omitted_indices, index);
    try {
      const resp = await this.client.patchOmissions(sessionId, reportId, omit);
      this.setState(recordHistory(
        { ...this.state, report: resp.report, overlayUrl: resp.overlay_url },
        "omission",
      ));
    } catch (err) {
      this.setState({ ...this.state, error: String(err) });
    }
  }

  async rerunAll(): Promise<void> {
    const sessionId = this.state.sessionId;
    if (!sessionId || !this.state.params.patch || isZeroArea(this.state.params.patch)) {
      return;
    }
    const responseId = ++this.requestCounter;
    try {
      const dec = await this.client.decompose(sessionId, this.state.params);
      this.setState(applyIfCurrent(this.state, responseId, this.requestCounter, (s) => ({
        ...s,
        manifest: dec.manifest,
        error: null,
      })));
    } catch (err) {
      this.setState({ ...this.state, error: String(err) });
      return;
    }
    await this.rerunDetection();
  }

  async rerunDetection(): Promise<void> {
    const sessionId = this.state.sessionId;
    if (!sessionId || !this.state.params.patch) {
      return;
    }
    const responseId = ++this.requestCounter;
    try {
      const det = await this.client.detectChains(sessionId, this.state.params);
      this.setState(applyIfCurrent(this.state, responseId, this.requestCounter, (s) => ({
        ...s,
        report: det.report,
        reportId: det.report_id,
        overlayUrl: det.overlay_url,
        signal: det.signal,
        warnings: det.warnings,
        error: null,
      })));
    } catch (err) {
      this.setState({ ...this.state, error: String(err) });
    }
  }

  /** Bundle for download: the service's report verbatim plus the history. */
  async exportBundle(): Promise<ExportBundle | null> {
    const { sessionId, reportId, overlayUrl } = this.state;
    if (!sessionId || !reportId) {
      return null;
    }
    const fresh = await this.client.getReport(sessionId, reportId);
    const overlay = overlayUrl ? await this.client.fetchBinary(overlayUrl) : null;
    return {
      reportJson: JSON.stringify(fresh.report),
      overlayPng: overlay,
      history: this.state.history,
    };
  }
}
