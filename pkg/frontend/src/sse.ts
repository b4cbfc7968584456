// Server-sent-events client on top of fetch streaming, with reconnect.
// Tracks the last seen sequence number so a reconnect resumes exactly where
// it left off: no gaps, no duplicates. Works in browsers and in node.

import type { SessionEvent } from "./types";

export interface StreamHandlers {
  onEvent(event: SessionEvent): void;
  onStatus?(connected: boolean): void;
}

const RETRY_DELAY_MS = 500;

export class EventStream {
  private lastSeq = 0;
  private stopped = false;
  private controller: AbortController | null = null;

  constructor(
    private baseUrl: string,
    private sessionId: string,
    private handlers: StreamHandlers,
    fromSeq = 1,
  ) {
    this.lastSeq = fromSeq - 1;
  }

  start(): void {
    this.stopped = false;
    void this.loop();
  }

  stop(): void {
    this.stopped = true;
    this.controller?.abort();
  }

  private async loop(): Promise<void> {
    while (!this.stopped) {
      this.controller = new AbortController();
      try {
        const url = `${this.baseUrl}/sessions/${this.sessionId}/events?from_seq=${this.lastSeq + 1}`;
        const response = await fetch(url, {
          signal: this.controller.signal,
          headers: { accept: "text/event-stream" },
        });
        if (!response.ok || !response.body) {
          throw new Error(`stream failed: HTTP ${response.status}`);
        }
        this.handlers.onStatus?.(true);
        await this.consume(response.body);
      } catch {
        // fall through to retry
      }
      if (this.stopped) return;
      this.handlers.onStatus?.(false);
      await new Promise((resolve) => setTimeout(resolve, RETRY_DELAY_MS));
    }
  }

  private async consume(body: ReadableStream<Uint8Array>): Promise<void> {
    const reader = body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
      const { done, value } = await reader.read();
      if (done) return;
      buffer += decoder.decode(value, { stream: true });
      let boundary;
      while ((boundary = buffer.indexOf("\n\n")) >= 0) {
        const frame = buffer.slice(0, boundary);
        buffer = buffer.slice(boundary + 2);
        for (const line of frame.split("\n")) {
          if (!line.startsWith("data: ")) continue;
          const event = JSON.parse(line.slice(6)) as SessionEvent;
          if (event.seq <= this.lastSeq) continue; // duplicate after reconnect
          this.lastSeq = event.seq;
          this.handlers.onEvent(event);
        }
      }
    }
  }
}
