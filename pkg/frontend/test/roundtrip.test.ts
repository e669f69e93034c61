/**
 * Integration round trip against the real service: six suggest/enter/submit
 * cycles driven through the controller must reproduce exactly the (x, y)
 * pairs and final recommendation of the command-line session with the same
 * seed, and a stale-revision conflict must recover without losing data.
 */

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api";
import { CampaignController } from "../src/controller";

const PYTHON = process.env.PYTHON ?? "python3";
const SEED = 4242;
const CYCLES = 6;

let service: ChildProcess | null = null;
let baseUrl = "";
let workDir = "";
let configPath = "";
let config: Record<string, unknown>;

function py(args: string[], input?: string): string {
  return execFileSync(PYTHON, args, { input, encoding: "utf8" });
}

function cliSession(args: string[]): Record<string, unknown> {
  const out = py(["-m", "stablebo.cli", "session", ...args]);
  const lines = out.trim().split("\n");
  return JSON.parse(lines[lines.length - 1]) as Record<string, unknown>;
}

async function waitForService(url: string, timeoutMs = 30000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    try {
      const response = await fetch(`${url}/sessions`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) throw new Error("service did not come up");
    await new Promise((resolve) => setTimeout(resolve, 250));
  }
}

beforeAll(async () => {
  workDir = mkdtempSync(join(tmpdir(), "stablebo-ui-"));
  // generate the campaign config from the package itself so both transports
  // consume byte-identical settings
  const blob = py([
    "-c",
    [
      "import json",
      "from stablebo.bench import synthetic_config",
      `cfg = synthetic_config('ucbsg', seed=${SEED}, budget=${CYCLES}).to_json()`,
      "cfg['acq_opt']['grid_resolution'] = 201",
      "cfg['mc']['n_samples'] = 500",
      "print(json.dumps(cfg))",
    ].join("\n"),
  ]);
  config = JSON.parse(blob) as Record<string, unknown>;
  configPath = join(workDir, "config.json");
  writeFileSync(configPath, blob);

  const port = 8700 + Math.floor(Math.random() * 800);
  baseUrl = `http://127.0.0.1:${port}`;
  service = spawn(
    PYTHON,
    ["-m", "stablebo.service", "--data-dir", join(workDir, "data"), "--port", String(port)],
    { stdio: "ignore" },
  );
  await waitForService(baseUrl);
}, 60000);

afterAll(() => {
  service?.kill();
});

describe("dashboard round trip", () => {
  it("reproduces the CLI campaign and survives a stale revision", async () => {
    const api = new ApiClient(baseUrl);
    const created = await api.createSession(config);
    const controller = new CampaignController(api, created.id);
    await controller.refresh();

    const enteredY = Array.from({ length: CYCLES }, (_, i) => (1 + 0.1 * i).toFixed(3));
    const uiPairs: Array<[number, string]> = [];
    for (let i = 0; i < CYCLES; i++) {
      const suggestion = await controller.requestSuggestion();
      const x = suggestion.x[0];

      if (i === 1) {
        // a second tab tells with an outdated revision: conflict, no loss
        const stale = await fetch(`${baseUrl}/sessions/${created.id}/tell`, {
          method: "POST",
          headers: { "Content-Type": "application/json" },
          body: JSON.stringify({ x: [x], y: 99.0, revision: suggestion.revision - 1 }),
        });
        expect(stale.status).toBe(409);
        await controller.refresh();
        expect(controller.snapshot().session?.trace).toHaveLength(1);
      }

      const ok = await controller.submitObservation(enteredY[i]);
      expect(ok).toBe(true);
      uiPairs.push([x, enteredY[i]]);
    }
    const finalView = controller.snapshot().session!;
    expect(finalView.trace).toHaveLength(CYCLES);
    const uiRecommendation = finalView.recommendation!;

    // same campaign through the command line
    const sessionPath = join(workDir, "cli-session.json");
    cliSession(["new", "--session", sessionPath, "--config", configPath]);
    const cliPairs: Array<[number, string]> = [];
    for (let i = 0; i < CYCLES; i++) {
      const sug = cliSession(["suggest", "--session", sessionPath]) as { x: number[] };
      cliSession([
        "tell",
        "--session",
        sessionPath,
        "--x",
        String(sug.x[0]),
        "--y",
        enteredY[i],
      ]);
      cliPairs.push([sug.x[0], enteredY[i]]);
    }
    const cliRec = cliSession(["recommend", "--session", sessionPath]) as {
      x_star: number[];
      stable_gain: number;
    };

    expect(uiPairs).toEqual(cliPairs);
    expect(uiRecommendation.x_star).toEqual(cliRec.x_star);
    expect(uiRecommendation.stable_gain).toBeCloseTo(cliRec.stable_gain, 12);

    // the export endpoint serves the canonical CSV for this trace (one retry
    // in case a pooled keep-alive socket was closed by the server meanwhile)
    let csv: string;
    try {
      csv = await (await fetch(api.traceCsvUrl(created.id))).text();
    } catch {
      csv = await (await fetch(api.traceCsvUrl(created.id))).text();
    }
    expect(csv.split("\n")[0]).toBe("iter,x0,y,acq,score,rec_x0,stable_gain,manual_override");
    expect(csv.trim().split("\n")).toHaveLength(CYCLES + 1);
  }, 120000);
});
