// Headless end-to-end walkthrough against a live local service: create a
// session, render frame 0 with overlays, relabel one box, submit it, and
// watch the round counter increment once retraining lands.

import { ChildProcess, execFileSync, spawn } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { SessionClient } from "../src/api.js";
import { runWalkthrough } from "../src/walkthrough.js";

const PORT = 8900 + Math.floor(Math.random() * 500);
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess | null = null;
let dataDir = "";

const QUICK_HIL = {
  t_initial_s: 0.1,
  t_update_s: 0.1,
  max_update: 1,
  retrain: { epochs: 30, lr: 0.03 },
  hidden_dims: [16, 16],
  aggregator: "maxpool",
  detector_decay: 0.6,
};

beforeAll(async () => {
  dataDir = mkdtempSync(join(tmpdir(), "gazeloop-ui-"));
  execFileSync("gazeloop", [
    "gen-scene", "--out", join(dataDir, "scene.jsonl"), "--seed", "7",
    "--frames", "60",
  ]);
  server = spawn("gazeloop", ["serve", "--port", String(PORT), "--data-dir", dataDir], {
    stdio: "ignore",
  });
  const client = new SessionClient(BASE);
  const deadline = Date.now() + 30000;
  while (!(await client.health())) {
    if (Date.now() > deadline) throw new Error("service did not come up");
    await new Promise((r) => setTimeout(r, 200));
  }
}, 60000);

afterAll(() => {
  server?.kill();
  if (dataDir) rmSync(dataDir, { recursive: true, force: true });
});

describe("console walkthrough (A10)", () => {
  it("drives a live session end to end", async () => {
    const client = new SessionClient(BASE);
    const result = await runWalkthrough(client, "scene.jsonl", QUICK_HIL);

    // frame 0 rendered with box overlays and the fixation marker
    expect(result.frameZeroCommands[0]!.kind).toBe("image");
    expect(result.overlayBoxCount).toBeGreaterThan(0);
    expect(result.fixationMarked).toBe(true);
    expect(result.fixationAoiAgrees).toBe(true);

    // one box relabeled and submitted
    expect(result.relabeled.to).not.toBe(result.relabeled.from);
    expect(result.submitAccepted).toBe(true);

    // round counter incremented and the metrics panel has content
    expect(result.roundsBefore).toBe(0);
    expect(result.roundsAfter).toBe(1);
    expect(result.metrics.rounds[0]!.map_50).toBeGreaterThanOrEqual(0);
    expect(result.metrics.rounds[0]!.map_50).toBeLessThanOrEqual(1);
    expect(result.finalPhase).toBe("streaming");
  }, 120000);

  it("rejects feedback for the wrong frame with diagnostics", async () => {
    const client = new SessionClient(BASE);
    const sessionId = await client.createSession({
      dataset_path: "scene.jsonl",
      hil: QUICK_HIL,
      model_seed: 4,
    });
    await expect(
      client.submitFeedback(sessionId, 7, [
        { box: [0, 0, 10, 10], label: "book", instance: 0 },
      ]),
    ).rejects.toMatchObject({ status: 400 });
  }, 30000);

  it("surfaces unknown sessions as 404", async () => {
    const client = new SessionClient(BASE);
    await expect(client.getFrame("s999", 0)).rejects.toMatchObject({ status: 404 });
  }, 30000);
});
