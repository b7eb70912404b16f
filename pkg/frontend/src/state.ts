// View state for the workbench. Everything here derives from session
// snapshots and push events received from the service; no assembly rules are
// re-implemented on the client, so every verdict shown is traceable to an
// operator message the engine actually emitted.

import type { OperatorMessage, PlanDoc, PushEvent, Snapshot } from "./api";

export interface FeedEntry {
  seq: number;
  message: OperatorMessage;
}

export class WorkbenchStore {
  plan: PlanDoc | null = null;
  snapshot: Snapshot | null = null;
  feed: FeedEntry[] = [];
  lastSeq = -1;
  connectionError: string | null = null;

  private listeners: Array<() => void> = [];

  subscribe(listener: () => void): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }

  initialize(plan: PlanDoc, snapshot: Snapshot): void {
    this.plan = plan;
    this.snapshot = snapshot;
    this.feed = [];
    this.lastSeq = -1;
    this.connectionError = null;
    this.notify();
  }

  setConnectionError(message: string | null): void {
    this.connectionError = message;
    this.notify();
  }

  // Applies one push-channel delivery; duplicates (seq already seen, e.g.
  // after a stream resubscribe) are ignored. Returns true when applied.
  applyPush(event: PushEvent): boolean {
    if (event.seq <= this.lastSeq) return false;
    this.lastSeq = event.seq;
    if (event.kind === "message") {
      this.feed.push({ seq: event.seq, message: event.message });
    } else if (event.kind === "state") {
      this.snapshot = event.state;
    }
    this.notify();
    return true;
  }

  get completed(): boolean {
    return this.snapshot?.completed ?? false;
  }

  get stageCount(): number {
    return this.snapshot?.stage_count ?? 0;
  }

  get currentStageIndex(): number {
    return this.snapshot?.current_stage_index ?? 0;
  }

  // The instruction banner: the engine's text for the current stage.
  get instruction(): string | null {
    return this.snapshot?.instruction ?? null;
  }

  // The verdict banner: the most recent non-instruction message.
  get lastVerdict(): OperatorMessage | null {
    for (let i = this.feed.length - 1; i >= 0; i--) {
      const message = this.feed[i].message;
      if (message.type !== "stage_instruction") return message;
    }
    return null;
  }

  // Occupancy per zone, straight from the snapshot.
  occupancyFor(zoneId: string): Array<{ part: string; count: number }> {
    const snapshot = this.snapshot;
    if (!snapshot) return [];
    return snapshot.zone_occupancy
      .filter((entry) => entry.zone === zoneId)
      .map((entry) => ({ part: entry.part, count: entry.count }));
  }

  messagesOfType(type: string): OperatorMessage[] {
    return this.feed.filter((entry) => entry.message.type === type)
      .map((entry) => entry.message);
  }

  // Resolves once the predicate holds (checked on every store change).
  waitFor(predicate: () => boolean, timeoutMs = 5000): Promise<void> {
    if (predicate()) return Promise.resolve();
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => {
        unsubscribe();
        reject(new Error(`timed out after ${timeoutMs}ms waiting for view state`));
      }, timeoutMs);
      const unsubscribe = this.subscribe(() => {
        if (predicate()) {
          clearTimeout(timer);
          unsubscribe();
          resolve();
        }
      });
    });
  }
}
