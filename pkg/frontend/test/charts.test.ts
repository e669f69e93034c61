import { describe, expect, it } from "vitest";

import { bandPath, linePath, linearScale, normalisedToMax, paddedRange } from "../src/charts";

describe("linearScale", () => {
  it("maps the data range onto the pixel range", () => {
    const s = linearScale(0, 1, 10, 110);
    expect(s.toPx(0)).toBe(10);
    expect(s.toPx(1)).toBe(110);
    expect(s.toPx(0.5)).toBe(60);
  });

  it("tolerates a degenerate range", () => {
    const s = linearScale(2, 2, 0, 100);
    expect(Number.isFinite(s.toPx(2))).toBe(true);
  });
});

describe("linePath", () => {
  it("emits one MoveTo followed by LineTos", () => {
    const sx = linearScale(0, 2, 0, 200);
    const sy = linearScale(0, 1, 100, 0);
    const d = linePath([0, 1, 2], [0, 0.5, 1], sx, sy);
    expect(d).toBe("M0 100 L100 50 L200 0");
  });

  it("is empty for no points", () => {
    const s = linearScale(0, 1, 0, 1);
    expect(linePath([], [], s, s)).toBe("");
  });
});

describe("bandPath", () => {
  it("closes the region between mean-k*sd and mean+k*sd", () => {
    const sx = linearScale(0, 1, 0, 100);
    const sy = linearScale(0, 4, 100, 0);
    const d = bandPath([0, 1], [2, 2], [0.5, 0.5], 2, sx, sy);
    expect(d.startsWith("M0 25")).toBe(true); // upper edge: 2 + 1 = 3 -> y=25
    expect(d.endsWith("Z")).toBe(true);
    expect(d).toContain("L0 75"); // lower edge at the left end: 2 - 1 = 1
  });
});

describe("normalisedToMax", () => {
  it("scales the peak magnitude to one", () => {
    expect(normalisedToMax([0, 2, -4])).toEqual([0, 0.5, -1]);
  });

  it("maps an all-zero series to zeros", () => {
    expect(normalisedToMax([0, 0])).toEqual([0, 0]);
  });
});

describe("paddedRange", () => {
  it("pads both ends by the fraction", () => {
    const [lo, hi] = paddedRange([0, 10], 0.1);
    expect(lo).toBeCloseTo(-1);
    expect(hi).toBeCloseTo(11);
  });

  it("expands a constant series", () => {
    const [lo, hi] = paddedRange([3, 3]);
    expect(lo).toBeLessThan(3);
    expect(hi).toBeGreaterThan(3);
  });
});
