// Session lifecycle: create, subscribe to the push channel, translate
// operator gestures into client events, and export the recorded timeline.
// DOM-free so the scripted tests can drive it exactly like the page does.

import { ActionBody, ApiError, EventReply, SessionApi } from "./api";
import { WorkbenchStore } from "./state";

export class WorkbenchController {
  private sessionId: string | null = null;
  private abort: AbortController | null = null;
  private lastTimestamp = 0;
  streamDone: Promise<void> = Promise.resolve();

  constructor(
    readonly api: SessionApi,
    readonly store: WorkbenchStore,
  ) {}

  async connect(planId: string): Promise<void> {
    try {
      const created = await this.api.createSession(planId);
      this.sessionId = created.session_id;
      const { plan, ...snapshot } = created;
      this.store.initialize(plan, snapshot);
      this.openStream();
    } catch (error) {
      this.store.setConnectionError(describe(error));
      throw error;
    }
  }

  // (Re)subscribes from the last applied seq; the store drops duplicates, so
  // a reload or reconnect replays cleanly.
  openStream(): void {
    if (!this.sessionId) throw new Error("not connected");
    const sessionId = this.sessionId;
    this.abort?.abort();
    this.abort = new AbortController();
    this.streamDone = this.api
      .streamEvents(sessionId, this.store.lastSeq, (event) => this.store.applyPush(event),
                    this.abort.signal)
      .catch((error) => this.store.setConnectionError(describe(error)));
  }

  disconnect(): void {
    this.abort?.abort();
    this.abort = null;
  }

  private nextTimestamp(): number {
    this.lastTimestamp += 1;
    return this.lastTimestamp;
  }

  private post(action: ActionBody): Promise<EventReply> {
    if (!this.sessionId) throw new Error("not connected");
    return this.api.postEvent(this.sessionId, this.nextTimestamp(), action);
  }

  placePart(part: string, zone: string): Promise<EventReply> {
    return this.post({ kind: "place_part", part, zone });
  }

  removePart(part: string, zone: string): Promise<EventReply> {
    return this.post({ kind: "remove_part", part, zone });
  }

  showConnection(connection: string, leadingProb: number, auxProb: number): Promise<EventReply> {
    return this.post({
      kind: "show_connection",
      connection,
      leading_prob: leadingProb,
      aux_prob: auxProb,
    });
  }

  // CSV payload of the completed session, as served by the timeline export.
  downloadTimeline(): Promise<string> {
    if (!this.sessionId) throw new Error("not connected");
    return this.api.fetchTimeline(this.sessionId);
  }
}

function describe(error: unknown): string {
  if (error instanceof ApiError) return `${error.code}: ${error.message}`;
  return error instanceof Error ? error.message : String(error);
}
