// HTTP client for the orchestrator API. The transport is injectable so tests
// can replay a recorded event log without a network.

import type { InventorySnapshot, SessionEvent, SessionView } from './types.js';

export interface Transport {
  /** GET returning the raw response body. */
  get(path: string): Promise<string>;
  /** Request with a JSON body, returning the raw response body. */
  send(method: string, path: string, body?: unknown): Promise<string>;
}

export class HttpTransport implements Transport {
  constructor(private readonly base: string = '') {}

  async get(path: string): Promise<string> {
    const res = await fetch(this.base + path);
    if (!res.ok) throw new Error(`GET ${path}: ${res.status} ${await res.text()}`);
    return res.text();
  }

  async send(method: string, path: string, body?: unknown): Promise<string> {
    const res = await fetch(this.base + path, {
      method,
      headers: { 'content-type': 'application/json' },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!res.ok) throw new Error(`${method} ${path}: ${res.status} ${await res.text()}`);
    return res.text();
  }
}

export interface FollowOptions {
  /** Long-poll timeout passed to the server, seconds. */
  timeoutS?: number;
  /** Stop iterating once the consumer has seen everything it needs. */
  signal?: { aborted: boolean };
}

export class ApiClient {
  constructor(private readonly transport: Transport) {}

  async placeOrder(text: string): Promise<{ session_id?: string; recipes?: unknown[] }> {
    return JSON.parse(await this.transport.send('POST', '/v1/orders', { text }));
  }

  async getSession(sessionId: string): Promise<SessionView> {
    return JSON.parse(await this.transport.get(`/v1/sessions/${sessionId}`));
  }

  async answerPrompt(sessionId: string, anomalyId: string, choice: string): Promise<SessionView> {
    return JSON.parse(
      await this.transport.send('POST', `/v1/sessions/${sessionId}/answers`, {
        anomaly_id: anomalyId,
        choice,
      }),
    );
  }

  async getInventory(): Promise<InventorySnapshot | null> {
    const body = await this.transport.get('/v1/inventory');
    return body ? (JSON.parse(body) as InventorySnapshot) : null;
  }

  /**
   * Incremental event consumption with long-poll resume.
   *
   * Yields events in seq order starting after `since`; duplicates from an
   * overlapping reconnect are dropped and a server-side gap aborts loudly
   * rather than rendering a misleading timeline.
   */
  async *events(
    sessionId: string,
    since: number,
    opts: FollowOptions = {},
  ): AsyncGenerator<SessionEvent> {
    let cursor = since;
    const timeoutS = opts.timeoutS ?? 25;
    while (!opts.signal?.aborted) {
      const body = await this.transport.get(
        `/v1/sessions/${sessionId}/events?since=${cursor}&timeout=${timeoutS}`,
      );
      const lines = body.split('\n').filter((line) => line.trim() !== '');
      for (const line of lines) {
        const event = JSON.parse(line) as SessionEvent;
        if (event.seq <= cursor) continue; // duplicate from reconnect overlap
        if (event.seq !== cursor + 1) {
          throw new Error(`event gap: expected seq ${cursor + 1}, got ${event.seq}`);
        }
        cursor = event.seq;
        yield event;
      }
    }
  }
}
