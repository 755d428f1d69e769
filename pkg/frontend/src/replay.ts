/**
 * Replay model: parses stored episode files into a scrubbing timeline with
 * per-attempt retry spans. Read-only over the episode data.
 */

import {
  EpisodeMeta,
  StepRecord,
  SUPPORTED_FORMAT_VERSION,
  TranscriptEntry,
} from "./types.js";

export class ReplayLoadError extends Error {}

export interface RetrySpan {
  subtaskIndex: number;
  attempt: number;
  /** inclusive step indices into the steps array (0-based positions) */
  firstStep: number;
  lastStep: number;
}

export interface Timeline {
  meta: EpisodeMeta;
  steps: StepRecord[];
  transcript: TranscriptEntry[];
  /** one span per attempt of every sub-task that needed more than one try */
  retrySpans: RetrySpan[];
  /** transcript entries aligned to the step index active when they were issued */
  transcriptByStep: Map<number, TranscriptEntry[]>;
}

export function parseMeta(text: string): EpisodeMeta {
  let meta: EpisodeMeta;
  try {
    meta = JSON.parse(text) as EpisodeMeta;
  } catch (err) {
    throw new ReplayLoadError(`meta.json is not valid JSON: ${String(err)}`);
  }
  if (meta.format_version !== SUPPORTED_FORMAT_VERSION) {
    throw new ReplayLoadError(
      `unsupported episode format version ${meta.format_version} ` +
        `(viewer supports ${SUPPORTED_FORMAT_VERSION})`,
    );
  }
  return meta;
}

export function parseSteps(text: string): StepRecord[] {
  const steps: StepRecord[] = [];
  const lines = text.split("\n");
  lines.forEach((line, i) => {
    if (!line.trim()) return;
    let parsed: StepRecord;
    try {
      parsed = JSON.parse(line) as StepRecord;
    } catch {
      throw new ReplayLoadError(`steps.jsonl line ${i + 1}: malformed JSON`);
    }
    if (typeof parsed.index !== "number" || !Array.isArray(parsed.ee_pos)) {
      throw new ReplayLoadError(`steps.jsonl line ${i + 1}: missing step fields`);
    }
    steps.push(parsed);
  });
  return steps;
}

export function parseTranscript(text: string): TranscriptEntry[] {
  const out: TranscriptEntry[] = [];
  text.split("\n").forEach((line, i) => {
    if (!line.trim()) return;
    try {
      out.push(JSON.parse(line) as TranscriptEntry);
    } catch {
      throw new ReplayLoadError(`transcript.jsonl line ${i + 1}: malformed JSON`);
    }
  });
  return out;
}

export function computeRetrySpans(meta: EpisodeMeta, steps: StepRecord[]): RetrySpan[] {
  const retried = new Set<number>();
  meta.try_counts.forEach((count, i) => {
    if (count > 1) retried.add(i + 1);
  });
  const spans = new Map<string, RetrySpan>();
  steps.forEach((step, pos) => {
    if (!retried.has(step.subtask_index)) return;
    const key = `${step.subtask_index}:${step.attempt}`;
    const span = spans.get(key);
    if (span) {
      span.lastStep = pos;
    } else {
      spans.set(key, {
        subtaskIndex: step.subtask_index,
        attempt: step.attempt,
        firstStep: pos,
        lastStep: pos,
      });
    }
  });
  // attempts that executed nothing (e.g. rejected programs) still count as
  // spans if a later attempt of the same sub-task did execute; the timeline
  // can only highlight attempts with steps, so spans come from steps alone.
  return [...spans.values()].sort(
    (a, b) => a.subtaskIndex - b.subtaskIndex || a.attempt - b.attempt,
  );
}

export function buildTimeline(
  metaText: string,
  stepsText: string,
  transcriptText: string,
): Timeline {
  const meta = parseMeta(metaText);
  const steps = parseSteps(stepsText);
  if (steps.length !== meta.step_count) {
    throw new ReplayLoadError(
      `steps.jsonl holds ${steps.length} steps, meta.json says ${meta.step_count}`,
    );
  }
  const transcript = parseTranscript(transcriptText);
  const transcriptByStep = new Map<number, TranscriptEntry[]>();
  // align oracle calls with the last step executed at call time: queries for
  // (subtask s, attempt a) precede that attempt's steps
  for (const entry of transcript) {
    let anchor = 0;
    for (let i = 0; i < steps.length; i++) {
      const st = steps[i]!;
      if (
        st.subtask_index < entry.subtask_index ||
        (st.subtask_index === entry.subtask_index && st.attempt < entry.attempt)
      ) {
        anchor = i + 1;
      }
    }
    const list = transcriptByStep.get(anchor) ?? [];
    list.push(entry);
    transcriptByStep.set(anchor, list);
  }
  return {
    meta,
    steps,
    transcript,
    retrySpans: computeRetrySpans(meta, steps),
    transcriptByStep,
  };
}

/** Top-down (x, y) polyline of the ee trace, starting at the initial pose. */
export function eeTrace(meta: EpisodeMeta, steps: StepRecord[]): Array<[number, number]> {
  const pts: Array<[number, number]> = [[meta.initial_ee_pos[0], meta.initial_ee_pos[1]]];
  for (const s of steps) pts.push([s.ee_pos[0], s.ee_pos[1]]);
  return pts;
}
