/** DOM widgets for the decision queue: one card per pending query. */

import { QueueModel, displayedBoxToSource, objectsDecision, partBoxDecision, planDecision, programDecision, verdictDecision, viewIndexDecision } from "./queue.js";
import type { PendingQuery, PlanEntryPayload } from "./types.js";

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

function payloadImage(query: PendingQuery): HTMLImageElement | null {
  const b64 = query.payload["image"];
  if (typeof b64 !== "string") return null;
  const img = el("img", { class: "query-image" });
  img.src = `data:image/png;base64,${b64}`;
  return img;
}

function header(query: PendingQuery): HTMLElement {
  const age = query.received_at
    ? `${Math.round((Date.now() - query.received_at) / 1000)}s ago`
    : "";
  return el(
    "div",
    { class: "card-header" },
    el("span", { class: "kind" }, query.kind),
    el(
      "span",
      { class: "meta" },
      `${query.episode_id} / sub-task ${query.subtask_index} / attempt ${query.attempt} ${age}`,
    ),
  );
}

type Submit = (query: PendingQuery, decision: ReturnType<typeof verdictDecision>) => void;

function selectViewCard(query: PendingQuery, submit: Submit): HTMLElement {
  const k = Number(query.payload["k"] ?? 1);
  const buttons = el("div", { class: "row" });
  for (let i = 1; i <= k; i++) {
    const b = el("button", { class: "index-btn" }, String(i));
    b.onclick = () => submit(query, viewIndexDecision(i, k));
    buttons.append(b);
  }
  const img = payloadImage(query);
  return el("div", { class: "card" }, header(query),
    el("p", {}, `Pick the least-occluded view for: ${String(query.payload["subtask"] ?? "")}`),
    ...(img ? [img] : []), buttons);
}

function verifyCard(query: PendingQuery, submit: Submit): HTMLElement {
  const rationale = el("input", { type: "text", placeholder: "rationale (optional)" });
  const yes = el("button", { class: "yes" }, "yes");
  const no = el("button", { class: "no" }, "no");
  yes.onclick = () => submit(query, verdictDecision(true, rationale.value));
  no.onclick = () => submit(query, verdictDecision(false, rationale.value));
  const img = payloadImage(query);
  return el("div", { class: "card" }, header(query),
    el("p", {}, String(query.payload["condition"] ?? "")),
    ...(img ? [img] : []), el("div", { class: "row" }, yes, no, rationale));
}

function listObjectsCard(query: PendingQuery, submit: Submit): HTMLElement {
  const box = el("textarea", { rows: "4", placeholder: "one object name per line" });
  const send = el("button", {}, "submit names");
  send.onclick = () => submit(query, objectsDecision(box.value.split("\n")));
  const img = payloadImage(query);
  return el("div", { class: "card" }, header(query),
    el("p", {}, "List the objects visible in the scene"),
    ...(img ? [img] : []), box, send);
}

function detectPartCard(query: PendingQuery, submit: Submit): HTMLElement {
  const img = payloadImage(query);
  const width = Number(query.payload["width"] ?? 256);
  const height = Number(query.payload["height"] ?? 256);
  const note = el("p", {},
    `Drag a box around the ${String(query.payload["part"])} of the ` +
    `${String(query.payload["object"])} (${String(query.payload["description"])})`);
  const wrap = el("div", { class: "bbox-wrap" });
  const rect = el("div", { class: "bbox-rect" });
  let drag: { x0: number; y0: number; x1: number; y1: number } | null = null;
  if (img) {
    wrap.append(img, rect);
    img.draggable = false;
    img.onpointerdown = (ev) => {
      const r = img.getBoundingClientRect();
      drag = { x0: ev.clientX - r.left, y0: ev.clientY - r.top, x1: 0, y1: 0 };
    };
    img.onpointermove = (ev) => {
      if (!drag) return;
      const r = img.getBoundingClientRect();
      drag.x1 = ev.clientX - r.left;
      drag.y1 = ev.clientY - r.top;
      rect.style.display = "block";
      rect.style.left = `${Math.min(drag.x0, drag.x1)}px`;
      rect.style.top = `${Math.min(drag.y0, drag.y1)}px`;
      rect.style.width = `${Math.abs(drag.x1 - drag.x0)}px`;
      rect.style.height = `${Math.abs(drag.y1 - drag.y0)}px`;
    };
    img.onpointerup = () => {
      if (!drag) return;
      const r = img.getBoundingClientRect();
      const box = displayedBoxToSource(drag, { width: r.width, height: r.height },
        { width, height });
      submit(query, partBoxDecision(box, String(query.payload["view"] ?? "")));
      drag = null;
    };
  }
  return el("div", { class: "card" }, header(query), note, wrap);
}

function decomposeCard(query: PendingQuery, submit: Submit): HTMLElement {
  const table = el("textarea", { rows: "8", class: "plan-edit" });
  table.value = JSON.stringify(
    [{ description: "", condition: "", kind: "object_centric",
       target: { object: "", part: "" } }],
    null, 2);
  const names = Array.isArray(query.payload["object_names"])
    ? (query.payload["object_names"] as string[]).join(", ") : "";
  const send = el("button", {}, "submit plan");
  const err = el("p", { class: "error" });
  send.onclick = () => {
    try {
      const entries = JSON.parse(table.value) as PlanEntryPayload[];
      submit(query, planDecision(entries));
    } catch (e) {
      err.textContent = String(e);
    }
  };
  const img = payloadImage(query);
  return el("div", { class: "card" }, header(query),
    el("p", {}, `Decompose: ${String(query.payload["instruction"])} (objects: ${names})`),
    ...(img ? [img] : []), table, send, err);
}

function generateActionCard(query: PendingQuery, submit: Submit): HTMLElement {
  const hints = "move_rel(dx,dy,dz) | move_abs(x,y,z) | rotate(roll,pitch,yaw) | " +
    "gripper(open|close) | pause(s); separate with ;";
  const examples = Array.isArray(query.payload["example_programs"])
    ? (query.payload["example_programs"] as string[]) : [];
  const editor = el("textarea", { rows: "4", placeholder: hints });
  const offset = el("input", {
    type: "text", placeholder: "offset dx,dy,dz (object-centric only)",
  });
  const send = el("button", {}, "submit program");
  const err = el("p", { class: "error" });
  send.onclick = () => {
    try {
      let off: [number, number, number] | null = null;
      if (offset.value.trim()) {
        const parts = offset.value.split(",").map((s) => Number(s.trim()));
        if (parts.length !== 3 || parts.some((v) => !Number.isFinite(v))) {
          throw new Error("offset must be three numbers");
        }
        off = parts as [number, number, number];
      }
      submit(query, programDecision(editor.value, off));
    } catch (e) {
      err.textContent = String(e);
    }
  };
  const img = payloadImage(query);
  return el("div", { class: "card" }, header(query),
    el("p", {}, `Write actions for: ${String(query.payload["subtask"])} ` +
      `(mode ${String(query.payload["mode"])})`),
    el("p", { class: "hint" }, hints),
    ...(examples.length ? [el("pre", { class: "hint" }, examples.join("\n"))] : []),
    ...(img ? [img] : []), editor, offset, send, err);
}

export function renderQueryCard(query: PendingQuery, submit: Submit): HTMLElement {
  switch (query.kind) {
    case "select_view":
      return selectViewCard(query, submit);
    case "verify":
      return verifyCard(query, submit);
    case "list_objects":
      return listObjectsCard(query, submit);
    case "detect_part":
      return detectPartCard(query, submit);
    case "decompose":
      return decomposeCard(query, submit);
    case "generate_action":
      return generateActionCard(query, submit);
  }
}

/** Wire the queue model to a container element. */
export function mountQueue(model: QueueModel, container: HTMLElement,
                           banner: HTMLElement): void {
  const cards = new Map<string, HTMLElement>();
  model.onEvent((ev) => {
    if (ev.type === "added") {
      const card = renderQueryCard(ev.query, (q, d) => {
        void model.submit(q.id, d).catch((err) => {
          banner.textContent = String(err);
          banner.style.display = "block";
        });
      });
      cards.set(ev.query.id, card);
      container.append(card);
    } else if (ev.type === "removed") {
      cards.get(ev.id)?.remove();
      cards.delete(ev.id);
    } else if (ev.type === "error") {
      banner.textContent = `bridge unreachable: ${ev.message} (retrying)`;
      banner.style.display = "block";
    } else if (ev.type === "connected") {
      banner.style.display = "none";
    }
  });
}
