// Thin typed client over the proxy. Every call returns a Result so the
// panels can render failures inline without try/catch pyramids.

import type {
  ChatCompletionResponse,
  ChatMessage,
  ProxyConfig,
  Result,
  SkillDoc,
  SkillMeta,
  Trace,
} from "./types.js";

export const USER_HEADER = "X-AutoSkill-User";

type FetchLike = typeof fetch;

async function asError(resp: Response): Promise<{ status: number; message: string }> {
  let message = resp.statusText || `HTTP ${resp.status}`;
  try {
    const body = await resp.json();
    if (body && body.error && typeof body.error.message === "string") {
      message = body.error.message;
    }
  } catch {
    // non-JSON error body; keep the status text
  }
  return { status: resp.status, message };
}

export class ApiClient {
  constructor(
    public baseUrl: string,
    public userId: string,
    private fetchFn: FetchLike = fetch,
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<Result<T>> {
    let resp: Response;
    try {
      resp = await this.fetchFn(this.url(path), {
        ...init,
        headers: {
          "content-type": "application/json",
          [USER_HEADER]: this.userId,
          ...(init?.headers ?? {}),
        },
      });
    } catch (exc) {
      return { ok: false, error: { status: 0, message: `proxy unreachable: ${exc}` } };
    }
    if (!resp.ok) {
      return { ok: false, error: await asError(resp) };
    }
    return { ok: true, value: (await resp.json()) as T };
  }

  chat(messages: ChatMessage[], model = "mock-model"): Promise<Result<ChatCompletionResponse>> {
    return this.request<ChatCompletionResponse>("/v1/chat/completions", {
      method: "POST",
      body: JSON.stringify({ model, messages }),
    });
  }

  /** Streaming variant: invokes onDelta per content chunk, resolves to the full text. */
  async chatStream(
    messages: ChatMessage[],
    onDelta: (text: string) => void,
    model = "mock-model",
  ): Promise<Result<string>> {
    let resp: Response;
    try {
      resp = await this.fetchFn(this.url("/v1/chat/completions"), {
        method: "POST",
        headers: { "content-type": "application/json", [USER_HEADER]: this.userId },
        body: JSON.stringify({ model, messages, stream: true }),
      });
    } catch (exc) {
      return { ok: false, error: { status: 0, message: `proxy unreachable: ${exc}` } };
    }
    if (!resp.ok || !resp.body) {
      return { ok: false, error: await asError(resp) };
    }
    const reader = resp.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    let full = "";
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      buffer += decoder.decode(value, { stream: true });
      let idx: number;
      while ((idx = buffer.indexOf("\n\n")) !== -1) {
        const event = buffer.slice(0, idx);
        buffer = buffer.slice(idx + 2);
        for (const line of event.split("\n")) {
          if (!line.startsWith("data: ")) continue;
          const payload = line.slice(6);
          if (payload === "[DONE]") continue;
          try {
            const chunk = JSON.parse(payload);
            const delta = chunk.choices?.[0]?.delta?.content;
            if (typeof delta === "string") {
              full += delta;
              onDelta(delta);
            }
          } catch {
            // partial or non-JSON keepalive line; skip
          }
        }
      }
    }
    return { ok: true, value: full };
  }

  listSkills(): Promise<Result<{ skills: SkillMeta[] }>> {
    return this.request(`/admin/skills?user=${encodeURIComponent(this.userId)}`);
  }

  getSkill(id: string): Promise<Result<SkillDoc>> {
    return this.request(`/admin/skills/${encodeURIComponent(id)}?user=${encodeURIComponent(this.userId)}`);
  }

  updateSkill(id: string, patch: Partial<SkillDoc>): Promise<Result<SkillDoc>> {
    return this.request(`/admin/skills/${encodeURIComponent(id)}?user=${encodeURIComponent(this.userId)}`, {
      method: "PUT",
      body: JSON.stringify(patch),
    });
  }

  deleteSkill(id: string): Promise<Result<{ deleted: string }>> {
    return this.request(`/admin/skills/${encodeURIComponent(id)}?user=${encodeURIComponent(this.userId)}`, {
      method: "DELETE",
    });
  }

  getTraces(): Promise<Result<{ traces: Trace[] }>> {
    return this.request(`/admin/traces?user=${encodeURIComponent(this.userId)}`);
  }

  getConfig(): Promise<Result<ProxyConfig>> {
    return this.request("/admin/config");
  }
}
