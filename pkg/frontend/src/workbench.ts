// Proctor console: presents battery items one at a time, records verdicts,
// and mirrors the live profile. All score values are echoed verbatim from
// API payloads; the client performs no score arithmetic and no optimistic
// updates.

import {
  ApiError,
  GaugeApi,
  Profile,
  QueueItem,
  Report,
  SessionInfo,
  Violation,
} from "./api.js";

export interface WorkbenchOptions {
  grader: string;
  modelId: string;
}

const STATUS_CHIP: Record<string, string> = {
  proficient: "chip-pass",
  not_proficient: "chip-fail",
  suggested: "chip-suggested",
  untested: "chip-untested",
};

function el(tag: string, className: string, text = ""): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

export class Workbench {
  session: SessionInfo | null = null;
  current: QueueItem | null = null;
  remaining = 0;
  done = false;
  banner: Violation | null = null;
  toast = "";
  profile: Profile | null = null;
  report: Report | null = null;
  mediaConfirmed = false;

  private judged = new Set<string>();
  private submitting = false;
  private timerStart = 0;
  private timerHandle: ReturnType<typeof setInterval> | null = null;

  constructor(
    private root: HTMLElement,
    private api: GaugeApi,
    private options: WorkbenchOptions,
  ) {
    this.root.innerHTML = `
      <div class="banner hidden" data-testid="banner"></div>
      <div class="toast hidden" data-testid="toast"></div>
      <main class="columns">
        <section class="queue" data-testid="queue"></section>
        <section class="profile" data-testid="profile"></section>
      </main>`;
  }

  // -- session lifecycle -------------------------------------------------

  async start(
    searchEnabled = false,
    kind = "standard",
    parent: string | null = null,
  ): Promise<void> {
    this.banner = null;
    try {
      this.session = await this.api.openSession(
        this.options.modelId,
        searchEnabled,
        kind,
        parent,
      );
    } catch (error) {
      this.surface(error);
      this.render();
      return;
    }
    await this.refreshProfile();
    await this.presentNext();
  }

  // -- queue -------------------------------------------------------------

  async presentNext(): Promise<void> {
    if (!this.session) return;
    this.banner = null;
    this.toast = "";
    try {
      const next = await this.api.nextItem(this.session.session_id);
      if (next.done || !next.item) {
        this.done = true;
        this.current = null;
        this.stopTimer();
      } else {
        this.done = false;
        this.current = next.item;
        this.remaining = next.remaining;
        this.mediaConfirmed = next.item.prompt.media.length === 0;
        this.startTimer();
      }
    } catch (error) {
      // a blocked recall item or tool-policy mismatch arrives as a 409;
      // surface the server's violation verbatim and halt the queue
      this.current = null;
      this.stopTimer();
      this.surface(error);
    }
    this.render();
  }

  async submitVerdict(verdict: string, note = ""): Promise<void> {
    if (!this.session || !this.current) return;
    const item = this.current;
    // idempotency at the UI layer: re-clicks and already-judged items
    // never produce a second POST
    if (this.submitting) return;
    if (this.judged.has(item.id)) {
      this.toast = `already judged ${item.id}`;
      this.render();
      return;
    }
    if (!this.mediaConfirmed) {
      this.toast = "confirm the media was played/viewed first";
      this.render();
      return;
    }
    this.submitting = true;
    this.render();
    try {
      await this.api.submitJudgment(
        this.session.session_id,
        item.id,
        verdict,
        this.options.grader,
        note,
        item.variant_index,
      );
      this.judged.add(item.id);
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        // conflict (duplicate or policy): toast it, never retry blindly
        this.toast = error.message;
        if (error.violation?.rule === "duplicate-judgment") {
          this.judged.add(item.id);
        }
      } else {
        this.surface(error);
      }
      this.submitting = false;
      this.render();
      return;
    }
    this.submitting = false;
    // profile strictly from the server after every write
    await this.refreshProfile();
    await this.presentNext();
  }

  // -- profile -----------------------------------------------------------

  async refreshProfile(): Promise<void> {
    try {
      this.profile = await this.api.profile();
      this.report = await this.api.report();
    } catch (error) {
      this.surface(error);
    }
    this.render();
  }

  // -- plumbing ----------------------------------------------------------

  private surface(error: unknown): void {
    if (error instanceof ApiError) {
      this.banner = error.violation ?? {
        path: "",
        rule: `http-${error.status}`,
        message: error.message,
      };
    } else {
      this.banner = {
        path: "",
        rule: "network",
        message: String(error),
      };
    }
  }

  private startTimer(): void {
    this.stopTimer();
    this.timerStart = Date.now();
    this.timerHandle = setInterval(() => this.renderTimer(), 250);
  }

  private stopTimer(): void {
    if (this.timerHandle !== null) {
      clearInterval(this.timerHandle);
      this.timerHandle = null;
    }
  }

  elapsedSeconds(): number {
    return (Date.now() - this.timerStart) / 1000;
  }

  // -- rendering ---------------------------------------------------------

  render(): void {
    this.renderBanner();
    this.renderToast();
    this.renderQueue();
    this.renderProfile();
  }

  private renderBanner(): void {
    const banner = this.root.querySelector<HTMLElement>("[data-testid=banner]")!;
    if (this.banner) {
      banner.classList.remove("hidden");
      banner.textContent = `${this.banner.rule}: ${this.banner.message}`;
    } else {
      banner.classList.add("hidden");
      banner.textContent = "";
    }
  }

  private renderToast(): void {
    const toast = this.root.querySelector<HTMLElement>("[data-testid=toast]")!;
    if (this.toast) {
      toast.classList.remove("hidden");
      toast.textContent = this.toast;
    } else {
      toast.classList.add("hidden");
      toast.textContent = "";
    }
  }

  private renderTimer(): void {
    const timer = this.root.querySelector<HTMLElement>("[data-testid=timer]");
    if (!timer || !this.current) return;
    const budget = this.current.timing.budget_ms;
    const elapsed = this.elapsedSeconds().toFixed(0);
    timer.textContent = budget
      ? `${elapsed}s / ${(budget / 1000).toFixed(0)}s budget`
      : `${elapsed}s`;
  }

  private renderQueue(): void {
    const queue = this.root.querySelector<HTMLElement>("[data-testid=queue]")!;
    queue.innerHTML = "";

    if (!this.session) {
      queue.append(el("p", "muted", "No open session."));
      return;
    }
    const head = el("div", "session-head");
    head.append(
      el("span", "badge", `session ${this.session.session_id}`),
      el("span", "badge", this.session.kind),
      el(
        "span",
        this.session.tool_policy.search_enabled ? "badge badge-on" : "badge",
        this.session.tool_policy.search_enabled ? "tools on" : "tools off",
      ),
    );
    queue.append(head);

    if (this.done) {
      const doneBox = el("div", "completion");
      doneBox.setAttribute("data-testid", "completion");
      doneBox.append(el("h2", "", "Queue complete"));
      const link = el("a", "", "open the full report") as HTMLAnchorElement;
      link.href = "/reports/markdown";
      link.setAttribute("data-testid", "report-link");
      doneBox.append(link);
      queue.append(doneBox);
      return;
    }
    if (!this.current) {
      queue.append(el("p", "muted", "Queue blocked or idle; see banner."));
      return;
    }

    const item = this.current;
    const protoRow = el("div", "proto-row");
    protoRow.setAttribute("data-testid", "protocol-badges");
    protoRow.append(
      el("span", "badge", `tools ${item.protocol.tools}`),
      el("span", "badge", `memory: ${item.protocol.memory}`),
      el("span", "badge", `grading: ${item.protocol.grading}`),
      el("span", "badge", `variant ${item.variant_index}`),
    );
    queue.append(protoRow);

    queue.append(el("h2", "item-id", item.id));
    queue.append(el("div", "ability muted", item.ability));
    const remaining = el("div", "remaining", `${this.remaining} remaining`);
    remaining.setAttribute("data-testid", "remaining");
    queue.append(remaining);

    const prompt = el("div", "prompt", item.prompt.text);
    prompt.setAttribute("data-testid", "prompt");
    queue.append(prompt);

    if (item.prompt.media.length > 0) {
      const mediaBox = el("div", "media");
      for (const media of item.prompt.media) {
        const link = el(
          "a",
          "media-link",
          `${media.kind}: ${media.uri}`,
        ) as HTMLAnchorElement;
        link.href = media.uri;
        link.target = "_blank";
        link.rel = "noreferrer";
        mediaBox.append(link);
      }
      const confirm = el("label", "media-confirm");
      const checkbox = document.createElement("input");
      checkbox.type = "checkbox";
      checkbox.setAttribute("data-testid", "media-confirm");
      checkbox.checked = this.mediaConfirmed;
      checkbox.addEventListener("change", () => {
        this.mediaConfirmed = checkbox.checked;
        this.render();
      });
      confirm.append(checkbox, document.createTextNode(" I played/viewed this"));
      mediaBox.append(confirm);
      queue.append(mediaBox);
    }

    if (item.model_response !== null) {
      const response = el("div", "model-response");
      response.setAttribute("data-testid", "model-response");
      response.append(el("h3", "", "System response"), el("pre", "", item.model_response));
      queue.append(response);
    }

    const rubric = el("div", "rubric");
    rubric.setAttribute("data-testid", "rubric");
    if (item.rubric.kind === "exact") {
      rubric.append(el("h3", "", "Answer key"), el("pre", "", item.rubric.answer));
      if (item.rubric.accept.length > 0) {
        rubric.append(el("div", "muted", `also accept: ${item.rubric.accept.join(" | ")}`));
      }
    } else if (item.rubric.kind === "timing") {
      rubric.append(
        el("h3", "", "Timing criterion"),
        el("p", "", `baseline: ${item.rubric.baseline || "unset (leave untested)"}`),
      );
      if (item.rubric.answer) rubric.append(el("pre", "", item.rubric.answer));
    } else {
      rubric.append(el("h3", "", "Grading rubric"), el("p", "", item.rubric.text));
    }
    queue.append(rubric);

    const timer = el("div", "timer", "0s");
    timer.setAttribute("data-testid", "timer");
    queue.append(timer);
    this.renderTimer();

    const buttons = el("div", "verdicts");
    for (const verdict of ["pass", "fail", "partial"]) {
      const button = document.createElement("button");
      button.textContent = verdict;
      button.className = `verdict verdict-${verdict}`;
      button.setAttribute("data-testid", `verdict-${verdict}`);
      button.disabled = this.submitting || !this.mediaConfirmed;
      button.addEventListener("click", () => {
        void this.submitVerdict(verdict);
      });
      buttons.append(button);
    }
    queue.append(buttons);
  }

  private renderProfile(): void {
    const panel = this.root.querySelector<HTMLElement>("[data-testid=profile]")!;
    panel.innerHTML = "";
    if (!this.profile || !this.report) {
      panel.append(el("p", "muted", "Profile not loaded yet."));
      return;
    }
    panel.append(el("h2", "", `Live profile: ${this.profile.model_id || "(no evidence)"}`));

    const rootsBox = el("div", "roots");
    rootsBox.setAttribute("data-testid", "root-scores");
    for (const root of this.report.roots) {
      const row = el("div", "root-row");
      row.setAttribute("data-root", root.path);
      // points/max verbatim from the report payload
      row.append(
        el("span", "root-code", root.path),
        el("span", "root-points", `${root.points}`),
        el("span", "root-max muted", `/${root.max}`),
      );
      rootsBox.append(row);
    }
    panel.append(rootsBox);

    const total = el("div", "total", `Total: ${this.profile.total}`);
    total.setAttribute("data-testid", "total");
    panel.append(total);
    const spread = el("div", "spread", `Spread: ${this.profile.spread}`);
    spread.setAttribute("data-testid", "spread");
    panel.append(spread);

    const bottlenecks = el("div", "bottlenecks");
    bottlenecks.setAttribute("data-testid", "bottlenecks");
    if (this.profile.bottlenecks.length === 0) {
      bottlenecks.append(el("span", "muted", "no bottlenecks"));
    }
    for (const [path, points] of this.profile.bottlenecks) {
      bottlenecks.append(el("span", "badge badge-bottleneck", `${path} (${points})`));
    }
    panel.append(bottlenecks);

    panel.append(this.radarSvg());

    const chips = el("div", "chips");
    chips.setAttribute("data-testid", "status-chips");
    const entries = Object.entries(this.report.statuses).sort(([a], [b]) =>
      a.localeCompare(b),
    );
    for (const [criterion, status] of entries) {
      if (status === "untested") continue; // untested list is huge; see report
      const chip = el("span", `chip ${STATUS_CHIP[status] ?? ""}`, `${criterion}: ${status}`);
      chip.setAttribute("data-criterion", criterion);
      chips.append(chip);
    }
    panel.append(chips);
  }

  private radarSvg(): SVGSVGElement {
    // drawn from the server's radar series; no client-side scoring
    const { labels, values, max } = this.report!.radar;
    const size = 220;
    const center = size / 2;
    const radius = center - 24;
    const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
    svg.setAttribute("viewBox", `0 0 ${size} ${size}`);
    svg.setAttribute("class", "radar");
    svg.setAttribute("data-testid", "radar");
    const points: string[] = [];
    labels.forEach((label, i) => {
      const angle = (Math.PI * 2 * i) / labels.length - Math.PI / 2;
      const r = (values[i] / max) * radius;
      points.push(`${center + r * Math.cos(angle)},${center + r * Math.sin(angle)}`);
      const text = document.createElementNS("http://www.w3.org/2000/svg", "text");
      text.setAttribute("x", `${center + (radius + 12) * Math.cos(angle)}`);
      text.setAttribute("y", `${center + (radius + 12) * Math.sin(angle)}`);
      text.setAttribute("text-anchor", "middle");
      text.textContent = label;
      svg.append(text);
    });
    const ring = document.createElementNS("http://www.w3.org/2000/svg", "circle");
    ring.setAttribute("cx", `${center}`);
    ring.setAttribute("cy", `${center}`);
    ring.setAttribute("r", `${radius}`);
    ring.setAttribute("class", "radar-ring");
    svg.append(ring);
    const polygon = document.createElementNS("http://www.w3.org/2000/svg", "polygon");
    polygon.setAttribute("points", points.join(" "));
    polygon.setAttribute("class", "radar-area");
    svg.append(polygon);
    return svg;
  }
}
