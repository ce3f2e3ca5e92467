"""A deterministic OpenAI-shaped mock upstream, as an httpx transport.

Used by tests and by `autoskill serve --mock-upstream` so the proxy can
run end-to-end without network access or credentials.
"""

from __future__ import annotations

import hashlib
import json

import httpx


def _chat_body(content: str, model: str) -> dict:
    return {
        "id": "chatcmpl-mock",
        "object": "chat.completion",
        "created": 0,
        "model": model,
        "choices": [{
            "index": 0,
            "message": {"role": "assistant", "content": content},
            "finish_reason": "stop",
        }],
        "usage": {"prompt_tokens": 0, "completion_tokens": 0, "total_tokens": 0},
    }


def _embedding(text: str, dimension: int) -> list[float]:
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    raw = [(digest[i % len(digest)] - 127.5) / 127.5 for i in range(dimension)]
    norm = sum(x * x for x in raw) ** 0.5
    return [x / norm for x in raw]


class MockUpstream:
    """Handler for httpx.MockTransport; records every forwarded payload."""

    def __init__(self, models: tuple[str, ...] = ("mock-model",), stream_chunks: int = 3,
                 embedding_dimension: int = 8):
        self.models = models
        self.stream_chunks = stream_chunks
        self.embedding_dimension = embedding_dimension
        self.requests: list[tuple[str, dict | None]] = []

    def transport(self) -> httpx.MockTransport:
        return httpx.MockTransport(self.handle)

    def client(self) -> httpx.Client:
        return httpx.Client(transport=self.transport(), base_url="http://mock-upstream/v1")

    def handle(self, request: httpx.Request) -> httpx.Response:
        path = request.url.path
        body = None
        if request.content:
            try:
                body = json.loads(request.content)
            except ValueError:
                pass
        self.requests.append((path, body))

        if path.endswith("/models") and request.method == "GET":
            return httpx.Response(200, json={
                "object": "list",
                "data": [{"id": m, "object": "model", "owned_by": "mock"} for m in self.models],
            })

        if path.endswith("/embeddings") and request.method == "POST":
            inputs = body.get("input", []) if body else []
            if isinstance(inputs, str):
                inputs = [inputs]
            data = [{
                "object": "embedding",
                "index": i,
                "embedding": _embedding(t, self.embedding_dimension),
            } for i, t in enumerate(inputs)]
            return httpx.Response(200, json={
                "object": "list",
                "data": data,
                "model": body.get("model", "mock-embed") if body else "mock-embed",
                "usage": {"prompt_tokens": 0, "total_tokens": 0},
            })

        if path.endswith("/chat/completions") and request.method == "POST":
            model = body.get("model", self.models[0]) if body else self.models[0]
            last_user = ""
            for m in (body or {}).get("messages", []):
                if m.get("role") == "user":
                    last_user = m.get("content", "")
            content = f"echo: {last_user}"
            if body and body.get("stream"):
                parts = []
                for i in range(self.stream_chunks):
                    chunk = {
                        "id": "chatcmpl-mock",
                        "object": "chat.completion.chunk",
                        "created": 0,
                        "model": model,
                        "choices": [{"index": 0, "delta": {"content": f"part{i} "}, "finish_reason": None}],
                    }
                    parts.append(f"data: {json.dumps(chunk)}\n\n".encode())
                parts.append(b"data: [DONE]\n\n")
                # iterator content keeps the response streamable on the far side
                return httpx.Response(200, content=iter(parts),
                                      headers={"content-type": "text/event-stream"})
            return httpx.Response(200, json=_chat_body(content, model))

        return httpx.Response(404, json={"error": {"message": f"no mock route for {path}"}})
