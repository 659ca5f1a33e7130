// Server-sent-events reader built on fetch streams (works in browsers and
// node), with cursor-based reconnection: after a drop it resumes from the
// last delivered sample, so the slot sequence stays gap-free and
// duplicate-free across reconnects.

import type { Sample } from "./types.js";

export interface SseEvent {
  event: string;
  data: string;
}

export function parseSseChunks(): (chunk: string) => SseEvent[] {
  let buffer = "";
  return (chunk: string) => {
    buffer += chunk;
    const events: SseEvent[] = [];
    let idx: number;
    while ((idx = buffer.indexOf("\n\n")) >= 0) {
      const block = buffer.slice(0, idx);
      buffer = buffer.slice(idx + 2);
      let event = "message";
      const dataLines: string[] = [];
      for (const line of block.split("\n")) {
        if (line.startsWith("event: ")) event = line.slice(7).trim();
        else if (line.startsWith("data: ")) dataLines.push(line.slice(6));
        // comment lines (":") are keepalives; ignored
      }
      if (dataLines.length > 0 || event !== "message") {
        events.push({ event, data: dataLines.join("\n") });
      }
    }
    return events;
  };
}

export interface StreamHandle {
  stop(): void;
  done: Promise<void>;
}

export interface StreamCallbacks {
  onSample(sample: Sample): void;
  onEnd?(): void;
  onReconnect?(attempt: number): void;
}

/**
 * Consume a session's sample stream. `makeUrl(since)` builds the stream URL
 * for a given cursor; on any transport failure the reader reconnects from
 * `lastCursor + 1` until the server signals `end`.
 */
export function consumeStream(
  makeUrl: (since: number) => string,
  since: number,
  callbacks: StreamCallbacks,
  fetchImpl: typeof fetch = fetch,
  maxReconnects = 50,
): StreamHandle {
  let stopped = false;
  let cursor = since;

  const done = (async () => {
    let attempt = 0;
    while (!stopped && attempt <= maxReconnects) {
      if (attempt > 0) callbacks.onReconnect?.(attempt);
      try {
        const resp = await fetchImpl(makeUrl(cursor));
        if (!resp.ok || resp.body === null) throw new Error(`stream HTTP ${resp.status}`);
        const reader = resp.body.getReader();
        const decode = new TextDecoder();
        const parse = parseSseChunks();
        for (;;) {
          const { done: eof, value } = await reader.read();
          if (stopped) {
            await reader.cancel().catch(() => {});
            return;
          }
          if (eof) break;
          for (const evt of parse(decode.decode(value, { stream: true }))) {
            if (evt.event === "end") {
              callbacks.onEnd?.();
              return;
            }
            const sample = JSON.parse(evt.data) as Sample;
            if (sample.cursor >= cursor) {
              callbacks.onSample(sample);
              cursor = sample.cursor + 1;
            }
          }
        }
      } catch {
        // fall through to reconnect
      }
      attempt += 1;
    }
  })();

  return { stop: () => { stopped = true; }, done };
}
