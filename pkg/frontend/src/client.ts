/**
 * HTTP client for the driftlearn service.
 *
 * The event stream runs over fetch + ReadableStream (works in browsers and
 * node) and resumes from the last applied sequence number after a drop, so a
 * reconnect never loses or duplicates an event.
 */

import type { ApiEvent, ConnectionStatus, StateSnapshot } from "./types.js";

export class ServiceError extends Error {
  constructor(public status: number, public body: any) {
    super(`service returned ${status}: ${JSON.stringify(body)}`);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, {
    headers: { "content-type": "application/json" },
    ...init,
  });
  const body = await response.json().catch(() => ({}));
  if (!response.ok) {
    throw new ServiceError(response.status, body);
  }
  return body as T;
}

export class ServiceClient {
  constructor(public base: string) {
    this.base = base.replace(/\/$/, "");
  }

  fetchState(): Promise<StateSnapshot> {
    return request(`${this.base}/state`);
  }

  fetchMetrics(): Promise<any> {
    return request(`${this.base}/metrics`);
  }

  /** Backlog fetch: every event after `since`, stream closed at the end. */
  async fetchEventBacklog(since = 0): Promise<ApiEvent[]> {
    const response = await fetch(`${this.base}/events?since=${since}&follow=false`);
    if (!response.ok || !response.body) {
      throw new ServiceError(response.status, await response.text());
    }
    const events: ApiEvent[] = [];
    for await (const event of parseSse(response.body)) {
      events.push(event);
    }
    return events;
  }

  postIngest(sample: { x: number[]; y?: Record<string, number>; timestamp?: string }) {
    return request(`${this.base}/ingest`, {
      method: "POST",
      body: JSON.stringify(sample),
    });
  }

  postDecision(body: {
    update_id: number;
    verdict: "accept" | "reject";
    note?: string;
    hyperparameter_edits?: Record<string, any>;
  }) {
    return request(`${this.base}/decisions`, {
      method: "POST",
      body: JSON.stringify(body),
    });
  }

  postRollback(version: number, note?: string) {
    return request(`${this.base}/rollback`, {
      method: "POST",
      body: JSON.stringify({ version, note }),
    });
  }

  patchHyperparameters(edits: {
    blocks?: Record<string, Record<string, any>>;
    auto_policy?: Record<string, any>;
  }) {
    return request(`${this.base}/hyperparameters`, {
      method: "PATCH",
      body: JSON.stringify(edits),
    });
  }

  postTarget(body: {
    target_id: string;
    head_hidden?: number[];
    strategy?: Record<string, any>;
    warmup_samples?: Array<{ x: number[]; y?: Record<string, number>; timestamp?: string }>;
  }) {
    return request(`${this.base}/targets`, {
      method: "POST",
      body: JSON.stringify(body),
    });
  }
}

/** Incremental server-sent-events parser over a byte stream. */
export async function* parseSse(
  body: ReadableStream<Uint8Array>,
): AsyncGenerator<ApiEvent> {
  const reader = body.getReader();
  const decoder = new TextDecoder();
  let buffer = "";
  try {
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      buffer += decoder.decode(value, { stream: true });
      let boundary: number;
      while ((boundary = buffer.indexOf("\n\n")) >= 0) {
        const chunk = buffer.slice(0, boundary);
        buffer = buffer.slice(boundary + 2);
        let data = "";
        for (const line of chunk.split("\n")) {
          if (line.startsWith("data: ")) data += line.slice(6);
        }
        if (data) yield JSON.parse(data) as ApiEvent;
      }
    }
  } finally {
    reader.releaseLock();
  }
}

export interface EventStreamOptions {
  since?: number;
  onStatus?: (status: ConnectionStatus) => void;
  /** delay between reconnect attempts, ms */
  retryDelayMs?: number;
}

/**
 * Resumable live event stream. `lastSeq` advances as events are delivered;
 * every (re)connect asks the service for `since=lastSeq`, and events at or
 * below `lastSeq` are dropped, so consumers observe each sequence number
 * exactly once and in order.
 */
export class EventStream {
  lastSeq: number;
  private controller: AbortController | null = null;
  private stopped = false;

  constructor(
    private base: string,
    private options: EventStreamOptions = {},
  ) {
    this.base = base.replace(/\/$/, "");
    this.lastSeq = options.since ?? 0;
  }

  /** Force-close the current connection (the consumer loop then reconnects). */
  dropConnection(): void {
    this.controller?.abort();
  }

  stop(): void {
    this.stopped = true;
    this.controller?.abort();
  }

  async *events(): AsyncGenerator<ApiEvent> {
    const retryDelay = this.options.retryDelayMs ?? 1000;
    while (!this.stopped) {
      this.controller = new AbortController();
      this.options.onStatus?.("connecting");
      try {
        const response = await fetch(`${this.base}/events?since=${this.lastSeq}`, {
          signal: this.controller.signal,
          headers: { "last-event-id": String(this.lastSeq) },
        });
        if (!response.ok || !response.body) {
          throw new ServiceError(response.status, null);
        }
        this.options.onStatus?.("live");
        for await (const event of parseSse(response.body)) {
          if (event.seq <= this.lastSeq) continue; // replay overlap guard
          this.lastSeq = event.seq;
          yield event;
        }
      } catch {
        // dropped or unreachable: fall through to the retry loop
      }
      if (this.stopped) break;
      this.options.onStatus?.("degraded");
      await new Promise((resolve) => setTimeout(resolve, retryDelay));
    }
    this.options.onStatus?.("closed");
  }
}
