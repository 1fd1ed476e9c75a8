/**
 * Live event feed with cursor resume.
 *
 * The server numbers every event with a monotonically increasing `seq`.
 * EventCursor keeps the highest seq delivered so far and drops anything at
 * or below it, so a reconnect that replays old events produces no
 * duplicates and a fetch that starts from the stored cursor produces no
 * gaps.  PollingFeed drives the cursor from GET /api/events; the browser
 * wiring in main.ts prefers the SSE stream and falls back to polling.
 */

import type { EventsPage, SimEvent } from "./api.js";

export type FeedState = "idle" | "connected" | "lost";

export class EventCursor {
  cursor = -1;

  /** Filter a batch down to unseen events, in seq order, and advance. */
  accept(events: SimEvent[]): SimEvent[] {
    const fresh = events
      .filter((e) => e.seq > this.cursor)
      .sort((a, b) => a.seq - b.seq);
    if (fresh.length > 0) {
      this.cursor = fresh[fresh.length - 1].seq;
    }
    return fresh;
  }
}

export interface PollingFeedOptions {
  /** Fetch one page of events at seq > since.  Injected for tests. */
  source: (since: number) => Promise<EventsPage>;
  onEvents: (events: SimEvent[]) => void;
  onState?: (state: FeedState) => void;
}

export class PollingFeed {
  private readonly tracker = new EventCursor();
  private state: FeedState = "idle";
  private timer: ReturnType<typeof setInterval> | null = null;
  private inFlight = false;

  constructor(private readonly opts: PollingFeedOptions) {}

  get cursor(): number {
    return this.tracker.cursor;
  }

  private setState(state: FeedState): void {
    if (state !== this.state) {
      this.state = state;
      this.opts.onState?.(state);
    }
  }

  /** One fetch cycle.  Safe to call directly; overlapping calls coalesce. */
  async poll(): Promise<void> {
    if (this.inFlight) return;
    this.inFlight = true;
    try {
      const page = await this.opts.source(this.tracker.cursor);
      const fresh = this.tracker.accept(page.events);
      this.setState("connected");
      if (fresh.length > 0) this.opts.onEvents(fresh);
    } catch {
      this.setState("lost");
    } finally {
      this.inFlight = false;
    }
  }

  start(intervalMs: number): void {
    this.stop();
    void this.poll();
    this.timer = setInterval(() => void this.poll(), intervalMs);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}

export interface StreamFeedOptions {
  /** URL builder for the SSE endpoint, given a resume cursor. */
  streamUrl: (since: number) => string;
  onEvents: (events: SimEvent[]) => void;
  onState?: (state: FeedState) => void;
}

/**
 * Browser SSE wiring.  EventSource reconnects on its own and resends
 * Last-Event-ID, which the server honors, so resume is native; the local
 * cursor still filters replays defensively.  Returns a stop function.
 */
export function connectStream(opts: StreamFeedOptions): () => void {
  const tracker = new EventCursor();
  let closed = false;
  let source: EventSource | null = null;

  const open = () => {
    if (closed) return;
    source = new EventSource(opts.streamUrl(tracker.cursor));
    source.onopen = () => opts.onState?.("connected");
    source.onerror = () => {
      // EventSource retries while in CONNECTING; surface the drop either way
      opts.onState?.("lost");
      if (source && source.readyState === EventSource.CLOSED) {
        source = null;
        setTimeout(open, 1000);
      }
    };
    source.onmessage = (msg) => {
      let parsed: SimEvent;
      try {
        parsed = JSON.parse(msg.data) as SimEvent;
      } catch {
        return;
      }
      const fresh = tracker.accept([parsed]);
      if (fresh.length > 0) opts.onEvents(fresh);
    };
  };

  open();
  return () => {
    closed = true;
    source?.close();
    source = null;
  };
}
