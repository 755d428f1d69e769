import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import {
  ReplayLoadError,
  buildTimeline,
  computeRetrySpans,
  eeTrace,
  parseMeta,
  parseSteps,
} from "../src/replay.js";

const fixtures = join(dirname(fileURLToPath(import.meta.url)), "fixtures", "episode_retry3");
const metaText = readFileSync(join(fixtures, "meta.json"), "utf-8");
const stepsText = readFileSync(join(fixtures, "steps.jsonl"), "utf-8");
const transcriptText = readFileSync(join(fixtures, "transcript.jsonl"), "utf-8");

describe("replay timeline on the 3-retry fixture", () => {
  it("loads with the correct step count", () => {
    const t = buildTimeline(metaText, stepsText, transcriptText);
    expect(t.steps.length).toBe(t.meta.step_count);
    expect(t.meta.try_counts).toEqual([1, 3]);
    expect(t.meta.outcome).toBe("success");
  });

  it("renders three highlighted retry spans for the retried sub-task", () => {
    const t = buildTimeline(metaText, stepsText, transcriptText);
    const spans = t.retrySpans.filter((s) => s.subtaskIndex === 2);
    expect(spans.length).toBe(3);
    expect(spans.map((s) => s.attempt)).toEqual([1, 2, 3]);
    for (const span of spans) {
      expect(span.firstStep).toBeLessThanOrEqual(span.lastStep);
    }
    // sub-task 1 passed first try: no spans for it
    expect(t.retrySpans.some((s) => s.subtaskIndex === 1)).toBe(false);
  });

  it("slider range covers every step", () => {
    const t = buildTimeline(metaText, stepsText, transcriptText);
    // slider positions 0..n-1 map one-to-one onto steps
    expect(t.steps[0]!.index).toBe(1);
    expect(t.steps[t.steps.length - 1]!.index).toBe(t.steps.length);
  });

  it("aligns transcript entries to steps and keeps them all", () => {
    const t = buildTimeline(metaText, stepsText, transcriptText);
    let total = 0;
    t.transcriptByStep.forEach((list) => (total += list.length));
    expect(total).toBe(t.transcript.length);
    expect(t.transcript.every((e) => e.backend_id === "scripted")).toBe(true);
  });

  it("traces the ee from the initial pose", () => {
    const t = buildTimeline(metaText, stepsText, transcriptText);
    const pts = eeTrace(t.meta, t.steps);
    expect(pts.length).toBe(t.steps.length + 1);
    expect(pts[0]![0]).toBeCloseTo(t.meta.initial_ee_pos[0], 12);
  });
});

describe("strict parsing", () => {
  it("rejects unsupported format versions with a clear message", () => {
    const bad = JSON.stringify({ ...JSON.parse(metaText), format_version: 2 });
    expect(() => parseMeta(bad)).toThrowError(/unsupported episode format version 2/);
  });

  it("names the malformed steps line", () => {
    const lines = stepsText.trimEnd().split("\n");
    lines[2] = "{not json";
    expect(() => parseSteps(lines.join("\n"))).toThrowError(
      /steps\.jsonl line 3: malformed JSON/,
    );
  });

  it("rejects a step-count mismatch", () => {
    const lines = stepsText.trimEnd().split("\n");
    const truncated = lines.slice(0, -1).join("\n");
    expect(() => buildTimeline(metaText, truncated, transcriptText)).toThrowError(
      ReplayLoadError,
    );
  });

  it("computes no spans when nothing retried", () => {
    const meta = JSON.parse(metaText);
    meta.try_counts = [1, 1];
    const spans = computeRetrySpans(meta, parseSteps(stepsText));
    expect(spans).toEqual([]);
  });
});
