// Bootstrap: session form wiring for the static bundle served at /ui.

import { GaugeApi } from "./api.js";
import { Workbench } from "./workbench.js";

function query<T extends HTMLElement>(selector: string): T {
  const node = document.querySelector<T>(selector);
  if (!node) throw new Error(`missing ${selector}`);
  return node;
}

export function boot(): void {
  const api = new GaugeApi("");
  const form = query<HTMLFormElement>("#session-form");
  const root = query<HTMLElement>("#workbench");

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const data = new FormData(form);
    const workbench = new Workbench(root, api, {
      grader: String(data.get("grader") || "anonymous"),
      modelId: String(data.get("model") || "unknown-model"),
    });
    const kind = String(data.get("kind") || "standard");
    const parent = String(data.get("parent") || "") || null;
    void workbench.start(data.get("tools") === "on", kind, parent);
  });
}

if (typeof document !== "undefined" && document.readyState !== "loading") {
  boot();
} else if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", boot);
}
