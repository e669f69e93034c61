import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api";
import { CampaignController } from "../src/controller";
import type { SessionView } from "../src/types";

function sessionView(overrides: Partial<SessionView> = {}): SessionView {
  return {
    id: "abc",
    revision: 0,
    created: "t0",
    updated: "t0",
    objective: null,
    config: { bounds: [[0, 1]] },
    plan: { params: {}, report: {} },
    pending: null,
    trace: [],
    recommendation: null,
    ...overrides,
  };
}

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("CampaignController", () => {
  it("rejects non-numeric entries before any request", async () => {
    const fetchSpy = vi.fn();
    vi.stubGlobal("fetch", fetchSpy);
    const controller = new CampaignController(new ApiClient("http://x"), "abc");
    // seed a fake pending suggestion
    (controller as unknown as { state: { suggestion: unknown } }).state = {
      phase: "awaiting-entry",
      session: sessionView(),
      suggestion: { x: [0.5], acq_value: 1, score: 1, revision: 1, acq_profile: null },
      warning: null,
    };
    expect(await controller.submitObservation("")).toBe(false);
    expect(await controller.submitObservation("abc")).toBe(false);
    expect(await controller.submitObservation("NaN")).toBe(false);
    expect(fetchSpy).not.toHaveBeenCalled();
    expect(controller.snapshot().warning).toContain("not a finite number");
  });

  it("appends the told row optimistically and clears the suggestion", async () => {
    const row = {
      iteration: 0,
      x: [0.5],
      y: 1.05,
      acq_value: 1,
      score: 0.9,
      rec_x: [0.5],
      stable_gain: 0.9,
      manual_override: false,
    };
    const responses = [
      jsonResponse({ trace_row: row, recommendation: { x_star: [0.5], stable_gain: 0.9, per_point: [] }, revision: 2 }),
      jsonResponse(sessionView({ revision: 2, trace: [row] })),
    ];
    vi.stubGlobal("fetch", vi.fn(async () => responses.shift()!));
    const controller = new CampaignController(new ApiClient("http://x"), "abc");
    (controller as unknown as { state: unknown }).state = {
      phase: "awaiting-entry",
      session: sessionView({ revision: 1 }),
      suggestion: { x: [0.5], acq_value: 1, score: 1, revision: 1, acq_profile: null },
      warning: null,
    };
    expect(await controller.submitObservation("1.05")).toBe(true);
    const state = controller.snapshot();
    expect(state.suggestion).toBeNull();
    expect(state.session?.trace).toHaveLength(1);
    expect(state.session?.trace[0].y).toBe(1.05);
  });

  it("recovers from a stale revision without losing data", async () => {
    const serverTrace = [
      {
        iteration: 0,
        x: [0.3],
        y: 2.0,
        acq_value: null,
        score: null,
        rec_x: [0.3],
        stable_gain: 2,
        manual_override: false,
      },
    ];
    const responses = [
      jsonResponse({ detail: "stale revision", revision: 5 }, 409),
      jsonResponse(sessionView({ revision: 5, trace: serverTrace, pending: [0.7] })),
    ];
    vi.stubGlobal("fetch", vi.fn(async () => responses.shift()!));
    const controller = new CampaignController(new ApiClient("http://x"), "abc");
    (controller as unknown as { state: unknown }).state = {
      phase: "awaiting-entry",
      session: sessionView({ revision: 1 }),
      suggestion: { x: [0.7], acq_value: 1, score: 1, revision: 1, acq_profile: null },
      warning: null,
    };
    expect(await controller.submitObservation("1.0")).toBe(false);
    const state = controller.snapshot();
    expect(state.warning).toContain("advanced elsewhere");
    expect(state.session?.trace).toHaveLength(1); // server state adopted, nothing lost
    expect(state.suggestion?.revision).toBe(5); // resubmission will use the fresh revision
    expect(state.phase).toBe("awaiting-entry");
  });

  it("flags disconnection on network failure", async () => {
    vi.stubGlobal("fetch", vi.fn(async () => {
      throw new TypeError("fetch failed");
    }));
    const controller = new CampaignController(new ApiClient("http://x"), "abc");
    await controller.refresh();
    expect(controller.snapshot().phase).toBe("disconnected");
    expect(controller.snapshot().warning).toBe("connection lost");
  });

  it("recovers an already-pending suggestion after a 409 on suggest", async () => {
    const responses = [
      jsonResponse({ detail: "a suggestion is already pending" }, 409),
      jsonResponse(sessionView({ revision: 3, pending: [0.25] })),
    ];
    vi.stubGlobal("fetch", vi.fn(async () => responses.shift()!));
    const controller = new CampaignController(new ApiClient("http://x"), "abc");
    const suggestion = await controller.requestSuggestion();
    expect(suggestion.x).toEqual([0.25]);
    expect(suggestion.revision).toBe(3);
  });
});
