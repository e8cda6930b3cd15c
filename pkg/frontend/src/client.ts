/** HTTP + SSE client for the gateway API.
 *
 * The stream reader is built on fetch + ReadableStream rather than
 * EventSource so the same code runs in the browser and under node:test.
 * On any drop it reconnects with exponential backoff and resyncs from
 * /api/snapshot; the view model deduplicates by seq, so a resync never
 * produces duplicate points.
 */

import type {
  ActiveAlarmJson,
  AlarmEventJson,
  AlertRuleJson,
  NodesResponse,
  SeriesResponse,
  SnapshotJson,
} from "./types.js";

export interface StreamHandlers {
  onSnapshot(snapshot: SnapshotJson): void;
  onAlarm(event: AlarmEventJson): void;
  onStatus?(connected: boolean): void;
}

export interface StreamHandle {
  stop(): void;
  done: Promise<void>;
}

interface SseEvent {
  event: string;
  data: string;
}

/** Incremental parser for a text/event-stream byte feed. */
export class SseParser {
  private buffer = "";

  push(chunk: string): SseEvent[] {
    this.buffer += chunk;
    const events: SseEvent[] = [];
    let idx: number;
    while ((idx = this.buffer.indexOf("\n\n")) >= 0) {
      const block = this.buffer.slice(0, idx);
      this.buffer = this.buffer.slice(idx + 2);
      let event = "message";
      const data: string[] = [];
      for (const line of block.split("\n")) {
        if (line.startsWith("event:")) event = line.slice(6).trim();
        else if (line.startsWith("data:")) data.push(line.slice(5).trim());
      }
      if (data.length > 0) events.push({ event, data: data.join("\n") });
    }
    return events;
  }
}

export class GatewayError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function jsonOrThrow<T>(resp: Response): Promise<T> {
  const body = await resp.json().catch(() => ({}));
  if (!resp.ok) {
    throw new GatewayError(resp.status, (body as { error?: string }).error ?? `HTTP ${resp.status}`);
  }
  return body as T;
}

export class GatewayClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: typeof fetch = fetch,
  ) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
  }

  private url(path: string): string {
    return this.baseUrl + path;
  }

  fetchNodes(): Promise<NodesResponse> {
    return this.fetchImpl(this.url("/api/nodes")).then((r) => jsonOrThrow<NodesResponse>(r));
  }

  fetchSnapshot(cluster?: string | null): Promise<SnapshotJson> {
    const q = cluster ? `?cluster=${encodeURIComponent(cluster)}` : "";
    return this.fetchImpl(this.url(`/api/snapshot${q}`)).then((r) => jsonOrThrow<SnapshotJson>(r));
  }

  fetchSeries(addr: string, channel: string, from: number, to: number): Promise<SeriesResponse> {
    const q = `?addr=${encodeURIComponent(addr)}&channel=${encodeURIComponent(channel)}&from=${from}&to=${to}`;
    return this.fetchImpl(this.url(`/api/series${q}`)).then((r) => jsonOrThrow<SeriesResponse>(r));
  }

  listRules(): Promise<{ rules: AlertRuleJson[] }> {
    return this.fetchImpl(this.url("/api/alerts/rules")).then((r) => jsonOrThrow(r));
  }

  addRule(rule: Partial<AlertRuleJson>): Promise<AlertRuleJson> {
    return this.fetchImpl(this.url("/api/alerts/rules"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(rule),
    }).then((r) => jsonOrThrow<AlertRuleJson>(r));
  }

  deleteRule(id: string): Promise<unknown> {
    return this.fetchImpl(this.url(`/api/alerts/rules/${encodeURIComponent(id)}`), {
      method: "DELETE",
    }).then((r) => jsonOrThrow(r));
  }

  activeAlarms(): Promise<{ alarms: ActiveAlarmJson[] }> {
    return this.fetchImpl(this.url("/api/alerts/active")).then((r) => jsonOrThrow(r));
  }

  acknowledge(rule: string, addr: string): Promise<unknown> {
    return this.fetchImpl(this.url(`/api/alerts/${encodeURIComponent(rule)}/${encodeURIComponent(addr)}/ack`), {
      method: "POST",
    }).then((r) => jsonOrThrow(r));
  }

  /** Open the live stream; reconnect with backoff until stop() is called. */
  stream(handlers: StreamHandlers, opts: { initialBackoffMs?: number; maxBackoffMs?: number } = {}): StreamHandle {
    const controller = new AbortController();
    let stopped = false;
    const initial = opts.initialBackoffMs ?? 500;
    const max = opts.maxBackoffMs ?? 5000;

    const done = (async () => {
      let backoff = initial;
      while (!stopped) {
        try {
          const resp = await this.fetchImpl(this.url("/api/stream"), { signal: controller.signal });
          if (!resp.ok || resp.body === null) throw new GatewayError(resp.status, "stream unavailable");
          handlers.onStatus?.(true);
          backoff = initial;
          // resync: the stream only carries publications after connect
          try {
            handlers.onSnapshot(await this.fetchSnapshot());
          } catch (e) {
            if (!(e instanceof GatewayError && e.status === 409)) throw e; // nothing published yet is fine
          }
          const reader = resp.body.getReader();
          const decoder = new TextDecoder();
          const parser = new SseParser();
          while (true) {
            const { done: eof, value } = await reader.read();
            if (eof) break;
            for (const ev of parser.push(decoder.decode(value, { stream: true }))) {
              if (ev.event === "snapshot") handlers.onSnapshot(JSON.parse(ev.data) as SnapshotJson);
              else if (ev.event === "alarm") handlers.onAlarm(JSON.parse(ev.data) as AlarmEventJson);
            }
          }
        } catch {
          // fall through to reconnect
        }
        handlers.onStatus?.(false);
        if (stopped) break;
        await new Promise((resolve) => setTimeout(resolve, backoff));
        backoff = Math.min(backoff * 2, max);
      }
    })();

    return {
      stop() {
        stopped = true;
        controller.abort();
      },
      done,
    };
  }
}
