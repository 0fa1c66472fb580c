// Workbench unit tests against a scripted fetch: queue flow, violation
// banner, write idempotency, and the no-client-arithmetic invariant.

import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";
import { GaugeApi } from "../src/api.js";
import { Workbench } from "../src/workbench.js";

interface Scripted {
  method: string;
  path: RegExp;
  status?: number;
  body: unknown;
  once?: boolean;
}

const calls: { method: string; path: string; body: unknown }[] = [];
let script: Scripted[] = [];
// every payload the fake server ever returned, for the arithmetic audit
const served: unknown[] = [];

function scriptedFetch(input: RequestInfo | URL, init?: RequestInit) {
  const url = String(input);
  const method = init?.method ?? "GET";
  const path = url.replace(/^https?:\/\/[^/]+/, "");
  calls.push({
    method,
    path,
    body: init?.body ? JSON.parse(String(init.body)) : null,
  });
  const index = script.findIndex(
    (entry) => entry.method === method && entry.path.test(path),
  );
  if (index < 0) {
    throw new Error(`no scripted response for ${method} ${path}`);
  }
  const entry = script[index];
  if (entry.once) script.splice(index, 1);
  served.push(entry.body);
  return Promise.resolve(
    new Response(JSON.stringify(entry.body), {
      status: entry.status ?? 200,
      headers: { "content-type": "application/json" },
    }),
  );
}

const SESSION = {
  session_id: "sess-000001",
  kind: "standard",
  filler_count: 0,
  tool_policy: { search_enabled: false, modalities: ["text"] },
};

function profileBody(total: number, k: number) {
  const roots: Record<string, number> = {
    K: k, RW: 0, M: 0, R: 0, WM: 0, MS: 0, MR: 0, V: 0, A: 0, S: 0,
  };
  return {
    model_id: "stub-model",
    taxonomy_version: "1.0.0",
    per_node: roots,
    total,
    spread: k,
    bottlenecks: [["MS", 0]],
  };
}

function reportBody(total: number, k: number) {
  const codes = ["K", "RW", "M", "R", "WM", "MS", "MR", "V", "A", "S"];
  return {
    model_id: "stub-model",
    roots: codes.map((code) => ({
      path: code,
      display_name: code,
      points: code === "K" ? k : 0,
      max: 10,
    })),
    statuses: { "K.commonsense": k > 0 ? "proficient" : "untested" },
    suggested: [],
    untested: [],
    radar: {
      labels: codes,
      values: codes.map((code) => (code === "K" ? k : 0)),
      max: 10,
    },
    total,
    spread: k,
    bottlenecks: [["MS", 0]],
  };
}

function itemBody(id: string, remaining: number, extra: Partial<Record<string, unknown>> = {}) {
  return {
    done: false,
    remaining,
    item: {
      id,
      ability: "K.commonsense",
      prompt: { text: `prompt for ${id}`, media: [] },
      rubric: { kind: "exact", answer: "42", accept: [], text: "", baseline: "" },
      variant_index: 0,
      variant_count: 0,
      model_response: "42",
      timing: { budget_ms: null },
      protocol: { tools: "off", memory: "none", grading: "manual" },
      ...extra,
    },
  };
}

function makeWorkbench(): Workbench {
  document.body.innerHTML = '<div id="root"></div>';
  const api = new GaugeApi("http://test");
  return new Workbench(document.getElementById("root")!, api, {
    grader: "tester",
    modelId: "stub-model",
  });
}

function text(testid: string): string {
  const node = document.querySelector(`[data-testid=${testid}]`);
  return node?.textContent ?? "";
}

beforeEach(() => {
  calls.length = 0;
  served.length = 0;
  script = [];
  vi.stubGlobal("fetch", scriptedFetch);
});

afterEach(() => {
  vi.unstubAllGlobals();
  vi.restoreAllMocks();
});

describe("presenting items", () => {
  it("renders the prompt, rubric, remaining count and protocol badges", async () => {
    script = [
      { method: "POST", path: /^\/sessions$/, status: 201, body: SESSION },
      { method: "GET", path: /^\/profile$/, body: profileBody(0, 0) },
      { method: "GET", path: /^\/reports\/json$/, body: reportBody(0, 0) },
      { method: "GET", path: /^\/items\/next/, body: itemBody("k-1", 2) },
    ];
    const workbench = makeWorkbench();
    await workbench.start();

    expect(text("prompt")).toBe("prompt for k-1");
    expect(text("remaining")).toBe("2 remaining");
    expect(text("rubric")).toContain("42");
    expect(text("protocol-badges")).toContain("tools off");
    expect(text("protocol-badges")).toContain("memory: none");
    expect(text("model-response")).toContain("42");
  });

  it("surfaces a blocked recall item as the server's violation banner", async () => {
    script = [
      { method: "POST", path: /^\/sessions$/, status: 201, body: SESSION },
      { method: "GET", path: /^\/profile$/, body: profileBody(0, 0) },
      { method: "GET", path: /^\/reports\/json$/, body: reportBody(0, 0) },
      {
        method: "GET",
        path: /^\/items\/next/,
        status: 409,
        body: {
          detail: {
            violation: {
              path: "ms-vs-phone-recall",
              rule: "memory-separation",
              message:
                "recall items must be graded in a recall session, not 'standard'",
            },
          },
        },
      },
    ];
    const workbench = makeWorkbench();
    await workbench.start();

    const banner = text("banner");
    expect(banner).toContain("memory-separation");
    expect(banner).toContain("recall session");
    expect(document.querySelector("[data-testid=banner]")!.classList)
      .not.toContain("hidden");
  });

  it("shows the completion screen with a report link when the queue drains", async () => {
    script = [
      { method: "POST", path: /^\/sessions$/, status: 201, body: SESSION },
      { method: "GET", path: /^\/profile$/, body: profileBody(2, 2) },
      { method: "GET", path: /^\/reports\/json$/, body: reportBody(2, 2) },
      { method: "GET", path: /^\/items\/next/, body: { done: true, remaining: 0 } },
    ];
    const workbench = makeWorkbench();
    await workbench.start();

    expect(document.querySelector("[data-testid=completion]")).toBeTruthy();
    const link = document.querySelector<HTMLAnchorElement>(
      "[data-testid=report-link]",
    )!;
    expect(link.getAttribute("href")).toBe("/reports/markdown");
  });
});

describe("submitting verdicts", () => {
  function happyScript() {
    script = [
      { method: "POST", path: /^\/sessions$/, status: 201, body: SESSION },
      { method: "GET", path: /^\/profile$/, body: profileBody(0, 0), once: true },
      { method: "GET", path: /^\/reports\/json$/, body: reportBody(0, 0), once: true },
      { method: "GET", path: /^\/items\/next/, body: itemBody("k-1", 1), once: true },
      { method: "POST", path: /^\/judgments$/, status: 201, body: { seq: 5 } },
      { method: "GET", path: /^\/profile$/, body: profileBody(2, 2) },
      { method: "GET", path: /^\/reports\/json$/, body: reportBody(2, 2) },
      { method: "GET", path: /^\/items\/next/, body: itemBody("k-2", 0) },
    ];
  }

  it("posts the judgment then refetches the profile (no optimistic update)", async () => {
    happyScript();
    const workbench = makeWorkbench();
    await workbench.start();
    expect(text("total")).toBe("Total: 0");

    await workbench.submitVerdict("pass");

    expect(text("total")).toBe("Total: 2");
    const judgment = calls.find((c) => c.method === "POST" && c.path === "/judgments");
    expect(judgment?.body).toMatchObject({
      session_id: "sess-000001",
      item_id: "k-1",
      verdict: "pass",
      grader: "tester",
      latency_ms: null, // server timestamps own the recorded latency
    });
    // the profile was refetched after the write
    const order = calls.map((c) => `${c.method} ${c.path}`);
    const judgmentIndex = order.indexOf("POST /judgments");
    expect(order.slice(judgmentIndex + 1)).toContain("GET /profile");
  });

  it("never double-posts for the same item", async () => {
    happyScript();
    const workbench = makeWorkbench();
    await workbench.start();

    // two racing clicks: the in-flight guard swallows the second
    await Promise.all([
      workbench.submitVerdict("pass"),
      workbench.submitVerdict("pass"),
    ]);
    const posts = calls.filter(
      (c) => c.method === "POST" && c.path === "/judgments",
    );
    expect(posts.length).toBe(1);
  });

  it("treats a server 409 conflict as a toast, not a retry", async () => {
    script = [
      { method: "POST", path: /^\/sessions$/, status: 201, body: SESSION },
      { method: "GET", path: /^\/profile$/, body: profileBody(0, 0) },
      { method: "GET", path: /^\/reports\/json$/, body: reportBody(0, 0) },
      { method: "GET", path: /^\/items\/next/, body: itemBody("k-1", 0) },
      {
        method: "POST",
        path: /^\/judgments$/,
        status: 409,
        body: {
          detail: {
            violation: {
              path: "k-1",
              rule: "duplicate-judgment",
              message: "variant 0 already judged",
            },
          },
        },
        once: true,
      },
    ];
    const workbench = makeWorkbench();
    await workbench.start();
    await workbench.submitVerdict("pass");

    expect(text("toast")).toContain("already judged");
    // and the item is now locally marked judged: no further POST attempts
    await workbench.submitVerdict("pass");
    const posts = calls.filter(
      (c) => c.method === "POST" && c.path === "/judgments",
    );
    expect(posts.length).toBe(1);
  });

  it("gates media items behind the played/viewed confirmation", async () => {
    script = [
      { method: "POST", path: /^\/sessions$/, status: 201, body: SESSION },
      { method: "GET", path: /^\/profile$/, body: profileBody(0, 0) },
      { method: "GET", path: /^\/reports\/json$/, body: reportBody(0, 0) },
      {
        method: "GET",
        path: /^\/items\/next/,
        body: itemBody("a-1", 0, {
          prompt: {
            text: "Transcribe this clip.",
            media: [{ kind: "audio", uri: "https://example.org/a.wav", note: "" }],
          },
        }),
      },
    ];
    const workbench = makeWorkbench();
    await workbench.start();

    const pass = document.querySelector<HTMLButtonElement>(
      "[data-testid=verdict-pass]",
    )!;
    expect(pass.disabled).toBe(true);
    await workbench.submitVerdict("pass");
    expect(calls.filter((c) => c.path === "/judgments").length).toBe(0);
    expect(text("toast")).toContain("confirm the media");

    const checkbox = document.querySelector<HTMLInputElement>(
      "[data-testid=media-confirm]",
    )!;
    checkbox.checked = true;
    checkbox.dispatchEvent(new Event("change"));
    const passAfter = document.querySelector<HTMLButtonElement>(
      "[data-testid=verdict-pass]",
    )!;
    expect(passAfter.disabled).toBe(false);
    const media = document.querySelector<HTMLAnchorElement>(".media-link")!;
    expect(media.target).toBe("_blank");
  });
});

describe("live profile view", () => {
  it("renders only numbers that came from API payloads", async () => {
    script = [
      { method: "POST", path: /^\/sessions$/, status: 201, body: SESSION },
      { method: "GET", path: /^\/profile$/, body: profileBody(7, 7) },
      { method: "GET", path: /^\/reports\/json$/, body: reportBody(7, 7) },
      { method: "GET", path: /^\/items\/next/, body: { done: true, remaining: 0 } },
    ];
    const workbench = makeWorkbench();
    await workbench.start();

    // collect every numeric token the profile panel displays
    const panel = document.querySelector("[data-testid=profile]")!;
    const shown = (panel.textContent ?? "").match(/\d+/g) ?? [];
    // flatten everything the fake server served into one number set
    const allowed = new Set(
      JSON.stringify(served).match(/-?\d+(\.\d+)?/g) ?? [],
    );
    for (const token of shown) {
      expect(allowed.has(token), `displayed ${token} not in any payload`).toBe(true);
    }
    expect(text("total")).toBe("Total: 7");
    expect(text("spread")).toBe("Spread: 7");
    expect(text("bottlenecks")).toContain("MS (0)");
    // chips come from the report statuses verbatim
    const chip = document.querySelector("[data-criterion='K.commonsense']")!;
    expect(chip.textContent).toContain("proficient");
    // radar polygon drawn from the server series
    expect(document.querySelector("[data-testid=radar] polygon")).toBeTruthy();
  });
});
