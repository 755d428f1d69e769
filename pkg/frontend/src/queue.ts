/**
 * Decision-queue model: polling, decision payload builders, and the
 * display-to-source coordinate transform for drawn bounding boxes.
 * Pure logic, no DOM; the widgets layer renders it.
 */

import { BridgeClient, BridgeError } from "./api.js";
import type { BoxPixels, Decision, PendingQuery, PlanEntryPayload } from "./types.js";

export function viewIndexDecision(index: number, k: number): Decision {
  if (!Number.isInteger(index) || index < 1 || index > k) {
    throw new Error(`view index ${index} outside [1, ${k}]`);
  }
  return { kind: "view_index", payload: { index } };
}

export function verdictDecision(verdict: boolean, rationale = ""): Decision {
  return { kind: "verdict", payload: { verdict, rationale } };
}

export function objectsDecision(names: string[]): Decision {
  const cleaned = names.map((n) => n.trim()).filter((n) => n.length > 0);
  return { kind: "objects", payload: { names: cleaned } };
}

export function planDecision(entries: PlanEntryPayload[]): Decision {
  if (entries.length === 0) throw new Error("a plan needs at least one sub-task");
  for (const e of entries) {
    if (!e.description.trim()) throw new Error("sub-task description required");
    if (!e.condition.trim()) throw new Error("verification condition required");
    if (e.kind === "object_centric" && !e.target) {
      throw new Error("object-centric sub-tasks need a target object/part");
    }
  }
  return { kind: "plan", payload: { entries } };
}

export function programDecision(
  text: string,
  offset: [number, number, number] | null = null,
): Decision {
  return { kind: "program", payload: { program: text, offset } };
}

/**
 * Convert a rectangle drawn in displayed-image coordinates to source pixels.
 * The image may be scaled in the page; corners may be dragged in any order.
 */
export function displayedBoxToSource(
  drag: { x0: number; y0: number; x1: number; y1: number },
  displayed: { width: number; height: number },
  source: { width: number; height: number },
): BoxPixels {
  if (displayed.width <= 0 || displayed.height <= 0) {
    throw new Error("displayed image has no size");
  }
  const sx = source.width / displayed.width;
  const sy = source.height / displayed.height;
  const clamp = (v: number, hi: number) => Math.min(Math.max(v, 0), hi);
  let xMin = clamp(Math.min(drag.x0, drag.x1) * sx, source.width);
  let xMax = clamp(Math.max(drag.x0, drag.x1) * sx, source.width);
  let yMin = clamp(Math.min(drag.y0, drag.y1) * sy, source.height);
  let yMax = clamp(Math.max(drag.y0, drag.y1) * sy, source.height);
  if (xMax - xMin < 1) xMax = Math.min(xMin + 1, source.width);
  if (yMax - yMin < 1) yMax = Math.min(yMin + 1, source.height);
  if (xMax - xMin < 1) xMin = xMax - 1;
  if (yMax - yMin < 1) yMin = yMax - 1;
  return { x_min: xMin, y_min: yMin, x_max: xMax, y_max: yMax };
}

export function partBoxDecision(box: BoxPixels, view = ""): Decision {
  if (!(box.x_min < box.x_max && box.y_min < box.y_max)) {
    throw new Error("bounding box is empty");
  }
  return { kind: "part_box", payload: { view, ...box } };
}

export type QueueEvent =
  | { type: "added"; query: PendingQuery }
  | { type: "removed"; id: string }
  | { type: "error"; message: string }
  | { type: "connected" };

/**
 * Polls the bridge's pending queue (1 s default) and keeps a local mirror.
 * Submissions are exactly-once: a 409 resolves the query locally (someone
 * else answered first) instead of surfacing as a failure.
 */
export class QueueModel {
  readonly queries = new Map<string, PendingQuery>();
  private timer: ReturnType<typeof setInterval> | null = null;
  private listeners: Array<(ev: QueueEvent) => void> = [];

  constructor(
    public client: BridgeClient,
    public pollIntervalMs = 1000,
  ) {}

  onEvent(fn: (ev: QueueEvent) => void): void {
    this.listeners.push(fn);
  }

  private emit(ev: QueueEvent): void {
    for (const fn of this.listeners) fn(ev);
  }

  start(): void {
    if (this.timer) return;
    void this.pollOnce();
    this.timer = setInterval(() => void this.pollOnce(), this.pollIntervalMs);
  }

  stop(): void {
    if (this.timer) clearInterval(this.timer);
    this.timer = null;
  }

  async pollOnce(): Promise<void> {
    let pending: PendingQuery[];
    try {
      pending = await this.client.getPending();
      this.emit({ type: "connected" });
    } catch (err) {
      this.emit({ type: "error", message: String(err) });
      return;
    }
    const seen = new Set<string>();
    for (const q of pending) {
      seen.add(q.id);
      if (!this.queries.has(q.id)) {
        q.received_at = Date.now();
        this.queries.set(q.id, q);
        this.emit({ type: "added", query: q });
      }
    }
    for (const id of [...this.queries.keys()]) {
      if (!seen.has(id)) {
        this.queries.delete(id);
        this.emit({ type: "removed", id });
      }
    }
  }

  async submit(id: string, decision: Decision): Promise<void> {
    try {
      await this.client.submitDecision(id, decision);
    } catch (err) {
      if (err instanceof BridgeError && err.status === 409) {
        // answered elsewhere; fall through to local removal
      } else {
        throw err;
      }
    }
    if (this.queries.delete(id)) this.emit({ type: "removed", id });
  }
}
