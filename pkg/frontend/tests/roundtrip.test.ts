// End-to-end round trip against a live analysis service: select a patch on
// the chain phantom, decompose, sweep the threshold until only the true
// lines remain, omit one line, export, and check the export against the
// service's own report.

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ServiceClient } from "../src/api.js";
import { Workbench } from "../src/workbench.js";

const PORT = 8791;
const BASE = `http://127.0.0.1:${PORT}`;
const REPO_ROOT = join(__dirname, "..", "..");

let service: ChildProcess | null = null;
let phantomPng: Uint8Array;

async function waitForService(): Promise<void> {
  const deadline = Date.now() + 60_000;
  while (Date.now() < deadline) {
    try {
      const resp = await fetch(`${BASE}/openapi.json`);
      if (resp.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 250));
  }
  throw new Error("service did not come up");
}

beforeAll(async () => {
  const workDir = mkdtempSync(join(tmpdir(), "paperlines-ui-"));
  const generated = spawnSync(
    "python3",
    ["-m", "paperlines.cli", "phantom", "--preset", "chain-basic", "--out", workDir],
    { cwd: REPO_ROOT, encoding: "utf-8" },
  );
  if (generated.status !== 0) {
    throw new Error(`phantom generation failed: ${generated.stderr}`);
  }
  phantomPng = readFileSync(join(workDir, "chain-basic.png"));

  service = spawn("python3", ["-m", "paperlines.service"], {
    cwd: REPO_ROOT,
    env: { ...process.env, PAPERLINES_PORT: String(PORT) },
    stdio: "ignore",
  });
  await waitForService();
});

afterAll(() => {
  service?.kill();
});

describe("workbench round trip", () => {
  it("patch select, sweep, omit, export", async () => {
    const client = new ServiceClient(BASE);
    const workbench = new Workbench(client);

    await workbench.loadImage(phantomPng, "chain-basic.png", 10.0);
    expect(workbench.state.imageWidth).toBe(320);
    expect(workbench.state.imageHeight).toBe(160);

    // a zero-area drag does nothing
    await workbench.selectPatch({ x0: 5, y0: 5, w: 0, h: 0 });
    expect(workbench.state.params.patch).toBeNull();

    // select the full sheet; decomposition and detection come back together
    await workbench.selectPatch({ x0: 0, y0: 0, w: 320, h: 160 });
    expect(workbench.state.manifest?.band_edges).toEqual([0.026, 1.0]);
    expect(workbench.state.report).not.toBeNull();
    expect(workbench.state.signal?.values.length).toBe(320);

    // threshold sweep: permissive first, then up until only true lines remain
    await workbench.setThreshold(0.2);
    const permissive = workbench.state.report!.positions_px.length;
    expect(permissive).toBeGreaterThanOrEqual(3);
    await workbench.setThreshold(1.5);
    expect(workbench.state.report!.positions_px).toEqual([50, 150, 250]);
    expect(workbench.state.signal?.threshold).toBe(1.5);

    // the second detection re-used the cached scale-space stack
    expect(workbench.state.report!.distances_mm).toEqual([10, 10]);

    // omit the leftmost line; distances are recomputed over the kept ones
    await workbench.omitLine(0);
    expect(workbench.state.report!.omitted_indices).toEqual([0]);
    expect(workbench.state.report!.distances_mm).toEqual([10]);

    // export equals the service's stored report byte for byte
    const bundle = await workbench.exportBundle();
    expect(bundle).not.toBeNull();
    const fresh = await client.getReport(workbench.state.sessionId!, workbench.state.reportId!);
    expect(bundle!.reportJson).toBe(JSON.stringify(fresh.report));
    expect(JSON.parse(bundle!.reportJson).omitted_indices).toEqual([0]);
    expect(bundle!.overlayPng!.length).toBeGreaterThan(100);

    // the parameter history records every step of the session
    const actions = bundle!.history.map((h) => h.action);
    expect(actions).toEqual(["patch-select", "threshold", "threshold", "omission"]);
    const thresholds = bundle!.history
      .filter((h) => h.action === "threshold")
      .map((h) => h.params.peaks.threshold);
    expect(thresholds).toEqual([0.2, 1.5]);
  });
});
