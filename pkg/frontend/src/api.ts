// Typed client for the stagewatch session service. Works in the browser and
// in node (fetch + web streams in both); the push channel is parsed from the
// text/event-stream body rather than relying on EventSource.

export interface PlanInfo {
  plan_id: string;
  stage_count: number;
}

export interface ZoneDoc {
  id: string;
  x: number;
  y: number;
  w: number;
  h: number;
  is_assembly_zone: boolean;
}

export interface CatalogEntry {
  id: string;
  display_name: string;
}

export interface PlacementRequirement {
  part: string;
  zone: string;
  count: number;
}

export interface StageDoc {
  index: number;
  kind: "placement" | "connection";
  requirements: PlacementRequirement[] | string;
  instruction: string;
}

export interface PlanDoc {
  plan_id: string;
  zones: ZoneDoc[];
  parts: CatalogEntry[];
  connections: CatalogEntry[];
  stages: StageDoc[];
}

export interface ZoneOccupancy {
  zone: string;
  part: string;
  count: number;
}

export interface Snapshot {
  session_id: string;
  plan_id: string;
  created_at: string;
  stage_count: number;
  current_stage_index: number;
  completed: boolean;
  instruction: string | null;
  current_stage: StageDoc | null;
  zone_occupancy: ZoneOccupancy[];
}

export interface OperatorMessage {
  timestamp_ms: number;
  type: string;
  payload: Record<string, unknown>;
}

export type PushEvent = { seq: number } & (
  | { kind: "message"; message: OperatorMessage }
  | { kind: "transition"; transition: OperatorMessage }
  | { kind: "state"; state: Snapshot }
);

export type ActionBody =
  | { kind: "place_part"; part: string; zone: string }
  | { kind: "remove_part"; part: string; zone: string }
  | { kind: "show_connection"; connection: string; leading_prob: number; aux_prob: number };

export interface EventReply {
  messages: OperatorMessage[];
  transition: OperatorMessage | null;
  snapshot: Snapshot;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

async function parseError(response: Response): Promise<never> {
  let code = "error";
  let message = `${response.status} ${response.statusText}`;
  try {
    const body = await response.json();
    if (body && typeof body.code === "string") {
      code = body.code;
      message = body.message ?? message;
    }
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(response.status, code, message);
}

export class SessionApi {
  constructor(readonly baseUrl: string) {}

  private async getJson<T>(path: string): Promise<T> {
    const response = await fetch(this.baseUrl + path);
    if (!response.ok) await parseError(response);
    return response.json();
  }

  private async postJson<T>(path: string, body: unknown): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) await parseError(response);
    return response.json();
  }

  listPlans(): Promise<PlanInfo[]> {
    return this.getJson("/plans");
  }

  createSession(planId: string): Promise<Snapshot & { plan: PlanDoc }> {
    return this.postJson("/sessions", { plan_id: planId });
  }

  getState(sessionId: string): Promise<Snapshot> {
    return this.getJson(`/sessions/${sessionId}`);
  }

  postEvent(sessionId: string, timestampMs: number, action: ActionBody): Promise<EventReply> {
    return this.postJson(`/sessions/${sessionId}/events`, {
      timestamp_ms: timestampMs,
      action,
    });
  }

  async fetchTimeline(sessionId: string): Promise<string> {
    const response = await fetch(`${this.baseUrl}/sessions/${sessionId}/timeline`);
    if (!response.ok) await parseError(response);
    return response.text();
  }

  // Reads the push channel and invokes onEvent for every delivered event, in
  // order. Resolves when the server closes the stream (completed session) or
  // the signal aborts.
  async streamEvents(
    sessionId: string,
    after: number,
    onEvent: (event: PushEvent) => void,
    signal?: AbortSignal,
  ): Promise<void> {
    const response = await fetch(
      `${this.baseUrl}/sessions/${sessionId}/stream?after=${after}`,
      { signal },
    );
    if (!response.ok) await parseError(response);
    if (!response.body) throw new ApiError(0, "no_body", "stream has no body");

    const reader = response.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    try {
      for (;;) {
        const { done, value } = await reader.read();
        if (done) break;
        buffer += decoder.decode(value, { stream: true });
        let boundary;
        while ((boundary = buffer.indexOf("\n\n")) >= 0) {
          const block = buffer.slice(0, boundary);
          buffer = buffer.slice(boundary + 2);
          for (const line of block.split("\n")) {
            if (line.startsWith("data: ")) {
              onEvent(JSON.parse(line.slice(6)) as PushEvent);
            }
          }
        }
      }
    } catch (error) {
      if ((error as Error).name === "AbortError") return;
      throw error;
    }
  }
}
