// Chat panel state machine. Optimistic transcript append, inline errors
// with retry, and a trace id attached to each assistant reply.

import type { ApiClient } from "./api.js";
import type { ApiError, ChatMessage, Trace } from "./types.js";

export interface TranscriptEntry {
  message: ChatMessage;
  traceId: number | null;
}

export class ChatSession {
  transcript: TranscriptEntry[] = [];
  pendingError: ApiError | null = null;
  private lastFailedText: string | null = null;

  constructor(private api: ApiClient) {}

  private messagesForSend(text: string): ChatMessage[] {
    const history = this.transcript.map((e) => e.message);
    return [...history, { role: "user", content: text }];
  }

  /** Send a message; on failure the transcript is left untouched and the
   * error is kept for inline display with retry(). */
  async send(text: string): Promise<boolean> {
    const outgoing = this.messagesForSend(text);
    const result = await this.api.chat(outgoing);
    if (!result.ok) {
      this.pendingError = result.error;
      this.lastFailedText = text;
      return false;
    }
    this.pendingError = null;
    this.lastFailedText = null;
    const reply = result.value.choices[0]?.message ?? { role: "assistant" as const, content: "" };
    const traceId = await this.latestTraceId();
    this.transcript.push({ message: { role: "user", content: text }, traceId: null });
    this.transcript.push({ message: reply, traceId });
    return true;
  }

  async retry(): Promise<boolean> {
    if (this.lastFailedText === null) return false;
    return this.send(this.lastFailedText);
  }

  private async latestTraceId(): Promise<number | null> {
    const traces = await this.api.getTraces();
    if (!traces.ok || traces.value.traces.length === 0) return null;
    return traces.value.traces[traces.value.traces.length - 1].trace_id;
  }

  async traceFor(entry: TranscriptEntry): Promise<Trace | null> {
    if (entry.traceId === null) return null;
    const traces = await this.api.getTraces();
    if (!traces.ok) return null;
    return traces.value.traces.find((t) => t.trace_id === entry.traceId) ?? null;
  }
}
