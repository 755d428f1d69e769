/** Replay viewer: step slider over the ee trace, snapshots, aligned transcript. */

import { BridgeClient } from "./api.js";
import { ReplayLoadError, Timeline, buildTimeline, eeTrace } from "./replay.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: Array<Node | string>
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) {
    if (k === "class") node.className = v;
    else node.setAttribute(k, v);
  }
  node.append(...children);
  return node;
}

const TRACE_SIZE = 360;
const WORLD_MIN = -0.6;
const WORLD_MAX = 0.6;

function toCanvas(x: number, y: number): [number, number] {
  const s = TRACE_SIZE / (WORLD_MAX - WORLD_MIN);
  return [(x - WORLD_MIN) * s, TRACE_SIZE - (y - WORLD_MIN) * s];
}

export class ReplayView {
  private timeline: Timeline | null = null;
  private episode = "";
  private slider = el("input", { type: "range", min: "0", value: "0" });
  private stepLabel = el("span", { class: "step-label" });
  private canvas = el("canvas", {
    width: String(TRACE_SIZE), height: String(TRACE_SIZE), class: "trace",
  });
  private snapshots = el("div", { class: "snapshots" });
  private transcriptPanel = el("div", { class: "transcript" });
  private error = el("p", { class: "error" });
  private info = el("p", { class: "hint" });

  constructor(
    private client: BridgeClient,
    private root: HTMLElement,
  ) {
    const picker = el("select", { class: "episode-pick" });
    const load = el("button", {}, "load");
    load.onclick = () => void this.load(picker.value);
    const refresh = el("button", {}, "refresh list");
    refresh.onclick = () => void this.fillPicker(picker);
    void this.fillPicker(picker);
    this.slider.oninput = () => this.showStep(Number(this.slider.value));
    root.append(
      el("div", { class: "row" }, picker, load, refresh),
      this.error, this.info,
      el("div", { class: "row" }, this.slider, this.stepLabel),
      el("div", { class: "row" }, this.canvas, this.snapshots),
      this.transcriptPanel,
    );
  }

  private async fillPicker(picker: HTMLSelectElement): Promise<void> {
    try {
      const names = await this.client.listEpisodes();
      picker.replaceChildren(...names.map((n) => el("option", { value: n }, n)));
    } catch (err) {
      this.error.textContent = String(err);
    }
  }

  async load(episode: string): Promise<void> {
    this.error.textContent = "";
    try {
      const [meta, steps, transcript] = await Promise.all([
        this.client.fetchEpisodeText(episode, "meta.json"),
        this.client.fetchEpisodeText(episode, "steps.jsonl"),
        this.client.fetchEpisodeText(episode, "transcript.jsonl").catch(() => ""),
      ]);
      this.timeline = buildTimeline(meta, steps, transcript);
      this.episode = episode;
    } catch (err) {
      this.error.textContent =
        err instanceof ReplayLoadError ? err.message : String(err);
      this.timeline = null;
      return;
    }
    const t = this.timeline;
    this.slider.max = String(Math.max(t.steps.length - 1, 0));
    this.slider.value = "0";
    this.info.textContent =
      `${t.meta.task_id} seed ${t.meta.seed}: ${t.meta.outcome}, ` +
      `${t.steps.length} steps, tries ${JSON.stringify(t.meta.try_counts)}, ` +
      `${t.retrySpans.length} retry spans`;
    this.showStep(0);
  }

  /** Draw the top-down ee trace up to the scrubbed step, retries highlighted. */
  private drawTrace(upTo: number): void {
    const t = this.timeline;
    if (!t) return;
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    ctx.fillStyle = "#14141a";
    ctx.fillRect(0, 0, TRACE_SIZE, TRACE_SIZE);
    const pts = eeTrace(t.meta, t.steps);
    const retrySteps = new Set<number>();
    for (const span of t.retrySpans) {
      for (let i = span.firstStep; i <= span.lastStep; i++) retrySteps.add(i);
    }
    for (let i = 1; i < pts.length && i <= upTo + 1; i++) {
      const [x0, y0] = toCanvas(pts[i - 1]![0], pts[i - 1]![1]);
      const [x1, y1] = toCanvas(pts[i]![0], pts[i]![1]);
      ctx.strokeStyle = retrySteps.has(i - 1) ? "#e0703a" : "#5aa0e0";
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.moveTo(x0, y0);
      ctx.lineTo(x1, y1);
      ctx.stroke();
    }
    const cur = pts[Math.min(upTo + 1, pts.length - 1)]!;
    const [cx, cy] = toCanvas(cur[0], cur[1]);
    ctx.fillStyle = "#ffffff";
    ctx.beginPath();
    ctx.arc(cx, cy, 4, 0, Math.PI * 2);
    ctx.fill();
  }

  private showStep(pos: number): void {
    const t = this.timeline;
    if (!t) return;
    const step = t.steps[pos];
    if (!step) return;
    this.stepLabel.textContent =
      `step ${step.index}/${t.steps.length} [${step.kind}] sub-task ` +
      `${step.subtask_index} attempt ${step.attempt}` +
      (step.source === "recovery" ? " (RETRY)" : "");
    this.drawTrace(pos);
    this.snapshots.replaceChildren();
    for (const v of t.meta.views) {
      if (v.step_index <= step.index) {
        const img = el("img", { class: "snap" });
        img.src = this.client.episodeFileUrl(
          this.episode, `${v.dir}/${v.view_name}.png`);
        img.title = v.label;
        this.snapshots.append(img);
      }
    }
    const entries = [] as string[];
    t.transcriptByStep.forEach((list, anchor) => {
      if (anchor <= pos + 1) {
        for (const e of list) {
          entries.push(
            `@${anchor} ${e.kind} (s${e.subtask_index} a${e.attempt}) -> ` +
            `${JSON.stringify(e.decision)}`.slice(0, 160),
          );
        }
      }
    });
    this.transcriptPanel.replaceChildren(
      ...entries.slice(-14).map((line) => el("div", { class: "tline" }, line)),
    );
  }
}
