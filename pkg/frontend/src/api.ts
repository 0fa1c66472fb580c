// Typed client for the grading API. The workbench never computes scores;
// every number it shows comes from one of these payloads.

export interface ToolPolicy {
  search_enabled: boolean;
  modalities?: string[];
}

export interface SessionInfo {
  session_id: string;
  kind: string;
  filler_count: number;
  tool_policy: ToolPolicy;
}

export interface MediaLink {
  kind: string;
  uri: string;
  note: string;
}

export interface QueueItem {
  id: string;
  ability: string;
  prompt: { text: string; media: MediaLink[] };
  rubric: {
    kind: string;
    answer: string;
    accept: string[];
    text: string;
    baseline: string;
  };
  variant_index: number;
  variant_count: number;
  model_response: string | null;
  timing: { budget_ms: number | null };
  protocol: { tools: string; memory: string; grading: string };
}

export interface NextItemResponse {
  done: boolean;
  remaining: number;
  item?: QueueItem;
}

export interface Profile {
  model_id: string;
  taxonomy_version: string;
  per_node: Record<string, number>;
  total: number;
  spread: number;
  bottlenecks: [string, number][];
}

export interface Report {
  model_id: string;
  roots: { path: string; display_name: string; points: number; max: number }[];
  statuses: Record<string, string>;
  suggested: string[];
  untested: string[];
  radar: { labels: string[]; values: number[]; max: number };
  total: number;
  spread: number;
  bottlenecks: [string, number][];
}

export interface Violation {
  path: string;
  rule: string;
  message: string;
}

export class ApiError extends Error {
  status: number;
  violation: Violation | null;

  constructor(status: number, message: string, violation: Violation | null) {
    super(message);
    this.status = status;
    this.violation = violation;
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let violation: Violation | null = null;
  let message = `${response.status}`;
  try {
    const body = await response.json();
    const detail = body?.detail;
    if (detail?.violation) {
      violation = detail.violation as Violation;
      message = violation.message;
    } else if (typeof detail === "string") {
      message = detail;
    }
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(response.status, message, violation);
}

export class GaugeApi {
  constructor(private baseUrl: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    if (!response.ok) {
      throw await parseError(response);
    }
    return (await response.json()) as T;
  }

  openSession(
    modelId: string,
    searchEnabled: boolean,
    kind = "standard",
    parent: string | null = null,
  ): Promise<SessionInfo> {
    return this.request<SessionInfo>("/sessions", {
      method: "POST",
      body: JSON.stringify({
        model_id: modelId,
        kind,
        parent,
        tool_policy: { search_enabled: searchEnabled, modalities: ["text"] },
      }),
    });
  }

  closeSession(sessionId: string): Promise<{ closed: boolean }> {
    return this.request(`/sessions/${sessionId}/close`, { method: "POST" });
  }

  nextItem(sessionId: string): Promise<NextItemResponse> {
    return this.request<NextItemResponse>(
      `/items/next?session=${encodeURIComponent(sessionId)}`,
    );
  }

  submitJudgment(
    sessionId: string,
    itemId: string,
    verdict: string,
    grader: string,
    note = "",
    variantIndex = 0,
  ): Promise<{ seq: number }> {
    // latency_ms stays null: the server derives it from its own
    // presentation timestamp; the on-screen timer is advisory
    return this.request<{ seq: number }>("/judgments", {
      method: "POST",
      body: JSON.stringify({
        session_id: sessionId,
        item_id: itemId,
        verdict,
        grader,
        note,
        latency_ms: null,
        variant_index: variantIndex,
      }),
    });
  }

  profile(): Promise<Profile> {
    return this.request<Profile>("/profile");
  }

  report(): Promise<Report> {
    return this.request<Report>("/reports/json");
  }
}
