/** HTTP + SSE client for the gateway API.
 *
 * The stream reader is built on fetch + ReadableStream rather than
 * EventSource so the same code runs in the browser and under node:test.
 * On any drop it reconnects with exponential backoff and resyncs from
 * /api/snapshot; the view model deduplicates by seq, so a resync never
 * produces duplicate points.
 */
/** Incremental parser for a text/event-stream byte feed. */
export class SseParser {
    buffer = "";
    push(chunk) {
        this.buffer += chunk;
        const events = [];
        let idx;
        while ((idx = this.buffer.indexOf("\n\n")) >= 0) {
            const block = this.buffer.slice(0, idx);
            this.buffer = this.buffer.slice(idx + 2);
            let event = "message";
            const data = [];
            for (const line of block.split("\n")) {
                if (line.startsWith("event:"))
                    event = line.slice(6).trim();
                else if (line.startsWith("data:"))
                    data.push(line.slice(5).trim());
            }
            if (data.length > 0)
                events.push({ event, data: data.join("\n") });
        }
        return events;
    }
}
export class GatewayError extends Error {
    status;
    constructor(status, message) {
        super(message);
        this.status = status;
    }
}
async function jsonOrThrow(resp) {
    const body = await resp.json().catch(() => ({}));
    if (!resp.ok) {
        throw new GatewayError(resp.status, body.error ?? `HTTP ${resp.status}`);
    }
    return body;
}
export class GatewayClient {
    baseUrl;
    fetchImpl;
    constructor(baseUrl, fetchImpl = fetch) {
        this.baseUrl = baseUrl;
        this.fetchImpl = fetchImpl;
        this.baseUrl = baseUrl.replace(/\/$/, "");
    }
    url(path) {
        return this.baseUrl + path;
    }
    fetchNodes() {
        return this.fetchImpl(this.url("/api/nodes")).then((r) => jsonOrThrow(r));
    }
    fetchSnapshot(cluster) {
        const q = cluster ? `?cluster=${encodeURIComponent(cluster)}` : "";
        return this.fetchImpl(this.url(`/api/snapshot${q}`)).then((r) => jsonOrThrow(r));
    }
    fetchSeries(addr, channel, from, to) {
        const q = `?addr=${encodeURIComponent(addr)}&channel=${encodeURIComponent(channel)}&from=${from}&to=${to}`;
        return this.fetchImpl(this.url(`/api/series${q}`)).then((r) => jsonOrThrow(r));
    }
    listRules() {
        return this.fetchImpl(this.url("/api/alerts/rules")).then((r) => jsonOrThrow(r));
    }
    addRule(rule) {
        return this.fetchImpl(this.url("/api/alerts/rules"), {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify(rule),
        }).then((r) => jsonOrThrow(r));
    }
    deleteRule(id) {
        return this.fetchImpl(this.url(`/api/alerts/rules/${encodeURIComponent(id)}`), {
            method: "DELETE",
        }).then((r) => jsonOrThrow(r));
    }
    activeAlarms() {
        return this.fetchImpl(this.url("/api/alerts/active")).then((r) => jsonOrThrow(r));
    }
    acknowledge(rule, addr) {
        return this.fetchImpl(this.url(`/api/alerts/${encodeURIComponent(rule)}/${encodeURIComponent(addr)}/ack`), {
            method: "POST",
        }).then((r) => jsonOrThrow(r));
    }
    /** Open the live stream; reconnect with backoff until stop() is called. */
    stream(handlers, opts = {}) {
        const controller = new AbortController();
        let stopped = false;
        const initial = opts.initialBackoffMs ?? 500;
        const max = opts.maxBackoffMs ?? 5000;
        const done = (async () => {
            let backoff = initial;
            while (!stopped) {
                try {
                    const resp = await this.fetchImpl(this.url("/api/stream"), { signal: controller.signal });
                    if (!resp.ok || resp.body === null)
                        throw new GatewayError(resp.status, "stream unavailable");
                    handlers.onStatus?.(true);
                    backoff = initial;
                    // resync: the stream only carries publications after connect
                    try {
                        handlers.onSnapshot(await this.fetchSnapshot());
                    }
                    catch (e) {
                        if (!(e instanceof GatewayError && e.status === 409))
                            throw e; // nothing published yet is fine
                    }
                    const reader = resp.body.getReader();
                    const decoder = new TextDecoder();
                    const parser = new SseParser();
                    while (true) {
                        const { done: eof, value } = await reader.read();
                        if (eof)
                            break;
                        for (const ev of parser.push(decoder.decode(value, { stream: true }))) {
                            if (ev.event === "snapshot")
                                handlers.onSnapshot(JSON.parse(ev.data));
                            else if (ev.event === "alarm")
                                handlers.onAlarm(JSON.parse(ev.data));
                        }
                    }
                }
                catch {
                    // fall through to reconnect
                }
                handlers.onStatus?.(false);
                if (stopped)
                    break;
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
