/** Console bootstrap: decision queue + replay viewer tabs. */

import { BridgeClient } from "./api.js";
import { QueueModel } from "./queue.js";
import { ReplayView } from "./replay_view.js";
import { mountQueue } from "./widgets.js";

function start(): void {
  const params = new URLSearchParams(window.location.search);
  const base = params.get("bridge") ?? window.location.origin;
  const client = new BridgeClient(base);

  const banner = document.getElementById("banner") as HTMLElement;
  const queueRoot = document.getElementById("queue") as HTMLElement;
  const replayRoot = document.getElementById("replay") as HTMLElement;
  const tabs = document.querySelectorAll<HTMLButtonElement>("nav button");
  tabs.forEach((btn) => {
    btn.onclick = () => {
      tabs.forEach((b) => b.classList.toggle("active", b === btn));
      queueRoot.style.display = btn.dataset["tab"] === "queue" ? "block" : "none";
      replayRoot.style.display = btn.dataset["tab"] === "replay" ? "block" : "none";
    };
  });

  const model = new QueueModel(client, 1000);
  mountQueue(model, queueRoot, banner);
  model.start();
  new ReplayView(client, replayRoot);
}

window.addEventListener("DOMContentLoaded", start);
