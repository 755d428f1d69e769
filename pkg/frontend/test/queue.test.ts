import { describe, expect, it } from "vitest";

import {
  displayedBoxToSource,
  objectsDecision,
  partBoxDecision,
  planDecision,
  programDecision,
  verdictDecision,
  viewIndexDecision,
} from "../src/queue.js";

describe("decision builders", () => {
  it("bounds view indices", () => {
    expect(viewIndexDecision(3, 4)).toEqual({ kind: "view_index", payload: { index: 3 } });
    expect(() => viewIndexDecision(0, 4)).toThrow();
    expect(() => viewIndexDecision(5, 4)).toThrow();
    expect(() => viewIndexDecision(1.5, 4)).toThrow();
  });

  it("builds verdicts with rationale", () => {
    expect(verdictDecision(true, "looks right")).toEqual({
      kind: "verdict",
      payload: { verdict: true, rationale: "looks right" },
    });
  });

  it("trims empty object names", () => {
    expect(objectsDecision([" block ", "", "plate"])).toEqual({
      kind: "objects",
      payload: { names: ["block", "plate"] },
    });
  });

  it("validates plan entries", () => {
    expect(() => planDecision([])).toThrow();
    expect(() =>
      planDecision([
        { description: "grasp", condition: "held?", kind: "object_centric", target: null },
      ]),
    ).toThrow(/target/);
    const ok = planDecision([
      {
        description: "grasp",
        condition: "held?",
        kind: "object_centric",
        target: { object: "block", part: "body" },
      },
      { description: "lift", condition: "up?", kind: "agent_centric", target: null },
    ]);
    expect((ok.payload["entries"] as unknown[]).length).toBe(2);
  });

  it("passes program offsets through", () => {
    expect(programDecision("rotate(yaw=90)", [0.1, 0, 0]).payload).toEqual({
      program: "rotate(yaw=90)",
      offset: [0.1, 0, 0],
    });
  });
});

describe("bbox display-to-source transform", () => {
  it("passes through at 1:1 scale", () => {
    const box = displayedBoxToSource(
      { x0: 10, y0: 10, x1: 50, y1: 60 },
      { width: 256, height: 256 },
      { width: 256, height: 256 },
    );
    expect(box).toEqual({ x_min: 10, y_min: 10, x_max: 50, y_max: 60 });
  });

  it("rescales when the image is displayed larger", () => {
    const box = displayedBoxToSource(
      { x0: 20, y0: 40, x1: 100, y1: 120 },
      { width: 512, height: 512 },
      { width: 256, height: 256 },
    );
    expect(box).toEqual({ x_min: 10, y_min: 20, x_max: 50, y_max: 60 });
  });

  it("normalizes reversed drags and clamps to the image", () => {
    const box = displayedBoxToSource(
      { x0: 300, y0: -10, x1: 100, y1: 80 },
      { width: 256, height: 256 },
      { width: 256, height: 256 },
    );
    expect(box.x_min).toBe(100);
    expect(box.x_max).toBe(256);
    expect(box.y_min).toBe(0);
    expect(box.y_max).toBe(80);
  });

  it("never produces an empty box", () => {
    const box = displayedBoxToSource(
      { x0: 30, y0: 30, x1: 30, y1: 30 },
      { width: 256, height: 256 },
      { width: 256, height: 256 },
    );
    expect(box.x_max - box.x_min).toBeGreaterThanOrEqual(1);
    expect(box.y_max - box.y_min).toBeGreaterThanOrEqual(1);
    expect(() => partBoxDecision(box)).not.toThrow();
  });
});
