"""OpenAI-compatible reverse proxy plus the admin API behind the Web UI.

Context injection happens before the request is forwarded, so streaming
needs no buffering: upstream event chunks pass through unchanged and the
client never sees the injected system context.
"""

from __future__ import annotations

import json
import logging
import time

import httpx
from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles

from .bank import COMMON, user_scope
from .errors import InvariantViolation
from .serving import AutoSkillRuntime, TurnRequest
from .skill import Skill, bump_patch, slugify, validate_skill

log = logging.getLogger(__name__)
access_log = logging.getLogger("autoskill.access")

_HOP_HEADERS = {
    "connection", "keep-alive", "proxy-authenticate", "proxy-authorization",
    "te", "trailers", "transfer-encoding", "upgrade", "host", "content-length",
    "content-encoding",
}

USER_HEADER = "X-AutoSkill-User"


def resolve_user(request: Request, body: dict | None, default_user: str) -> str:
    """Header beats body `user` field beats the configured default."""
    raw = request.headers.get(USER_HEADER)
    if not raw and isinstance(body, dict):
        value = body.get("user")
        if isinstance(value, str) and value:
            raw = value
    if not raw:
        return default_user
    if "/" in raw or "\\" in raw:
        raw = slugify(raw)
    return raw or default_user


def create_app(runtime: AutoSkillRuntime, upstream: httpx.Client | None = None) -> FastAPI:
    config = runtime.config
    if upstream is None:
        headers = {}
        key = config.upstream_key()
        if key:
            headers["Authorization"] = f"Bearer {key}"
        upstream = httpx.Client(base_url=config.upstream_base_url, headers=headers, timeout=120.0)

    app = FastAPI(title="autoskill-proxy")
    app.state.runtime = runtime
    app.state.upstream = upstream

    @app.middleware("http")
    async def access_logger(request: Request, call_next):
        t0 = time.perf_counter()
        response = await call_next(request)
        access_log.info(json.dumps({
            "method": request.method,
            "path": request.url.path,
            "status": response.status_code,
            "duration_ms": round((time.perf_counter() - t0) * 1000, 3),
        }))
        return response

    def _forward_headers(request: Request) -> dict[str, str]:
        out = {}
        for name, value in request.headers.items():
            if name.lower() not in _HOP_HEADERS and name.lower() != "authorization":
                out[name] = value
        auth = request.headers.get("authorization")
        if auth and "authorization" not in (k.lower() for k in upstream.headers):
            out["Authorization"] = auth
        return out

    def _relay(resp: httpx.Response) -> Response:
        headers = {k: v for k, v in resp.headers.items() if k.lower() not in _HOP_HEADERS}
        return Response(content=resp.content, status_code=resp.status_code, headers=headers)

    # --- OpenAI surface ---

    @app.post("/v1/chat/completions")
    async def chat_completions(request: Request):
        try:
            body = json.loads(await request.body())
            if not isinstance(body, dict):
                raise ValueError("body must be a JSON object")
        except ValueError:
            return JSONResponse({"error": {"message": "malformed request body"}}, status_code=400)

        user_id = resolve_user(request, body, config.default_user)
        messages = body.get("messages")
        if not isinstance(messages, list) or not messages:
            return JSONResponse({"error": {"message": "messages array is required"}}, status_code=400)
        try:
            turn = TurnRequest(user_id=user_id, messages=messages)
            augmented, trace = runtime.prepare_turn(turn)
        except ValueError as exc:
            return JSONResponse({"error": {"message": str(exc)}}, status_code=400)

        has_creds = any(k.lower() == "authorization" for k in upstream.headers) \
            or request.headers.get("authorization")
        if config.upstream_base_url.startswith("https://api.openai.com") and not has_creds:
            return JSONResponse({"error": {"message": "missing upstream credentials"}}, status_code=401)

        forward_body = dict(body)
        forward_body["messages"] = augmented
        headers = _forward_headers(request)
        runtime.schedule_evolution(user_id, messages, trace)

        if body.get("stream"):
            try:
                req = upstream.build_request("POST", "/chat/completions", json=forward_body, headers=headers)
                resp = upstream.send(req, stream=True)
            except httpx.HTTPError as exc:
                return JSONResponse({"error": {"message": f"upstream failure: {exc}"}}, status_code=502)

            def stream_chunks():
                try:
                    yield from resp.iter_raw()
                finally:
                    resp.close()

            media = resp.headers.get("content-type", "text/event-stream")
            return StreamingResponse(stream_chunks(), status_code=resp.status_code, media_type=media)

        try:
            resp = upstream.post("/chat/completions", json=forward_body, headers=headers)
        except httpx.HTTPError as exc:
            return JSONResponse({"error": {"message": f"upstream failure: {exc}"}}, status_code=502)
        return _relay(resp)

    @app.post("/v1/embeddings")
    async def embeddings(request: Request):
        try:
            body = json.loads(await request.body())
            if not isinstance(body, dict):
                raise ValueError
        except ValueError:
            return JSONResponse({"error": {"message": "malformed request body"}}, status_code=400)
        try:
            resp = upstream.post("/embeddings", json=body, headers=_forward_headers(request))
        except httpx.HTTPError as exc:
            return JSONResponse({"error": {"message": f"upstream failure: {exc}"}}, status_code=502)
        return _relay(resp)

    @app.get("/v1/models")
    async def models(request: Request):
        try:
            resp = upstream.get("/models", headers=_forward_headers(request))
        except httpx.HTTPError as exc:
            return JSONResponse({"error": {"message": f"upstream failure: {exc}"}}, status_code=502)
        return _relay(resp)

    # --- admin API ---

    def _skill_meta(skill: Skill, scope_name: str) -> dict:
        return {
            "id": skill.id,
            "name": skill.name,
            "description": skill.description,
            "version": str(skill.version),
            "tags": skill.tags,
            "triggers": skill.triggers,
            "examples": skill.examples,
            "confidence": skill.confidence,
            "scope": scope_name,
        }

    def _skill_full(skill: Skill, scope_name: str) -> dict:
        doc = _skill_meta(skill, scope_name)
        doc["prompt"] = skill.prompt
        return doc

    def _find(user: str, skill_id: str) -> tuple[Skill, str] | None:
        skill = runtime.bank.get_skill(user_scope(user), skill_id)
        if skill is not None:
            return skill, "user"
        skill = runtime.bank.get_skill(COMMON, skill_id)
        if skill is not None:
            return skill, "common"
        return None

    @app.get("/admin/skills")
    async def list_skills(user: str = ""):
        user = user or config.default_user
        out = [_skill_meta(s, "user") for s in runtime.bank.list_skills(user_scope(user))]
        out += [_skill_meta(s, "common") for s in runtime.bank.list_skills(COMMON)]
        return {"skills": out}

    @app.get("/admin/skills/{skill_id}")
    async def get_skill(skill_id: str, user: str = ""):
        found = _find(user or config.default_user, skill_id)
        if found is None:
            return JSONResponse({"error": {"message": f"unknown skill id: {skill_id}"}}, status_code=404)
        return _skill_full(*found)

    @app.put("/admin/skills/{skill_id}")
    async def put_skill(skill_id: str, request: Request, user: str = ""):
        user = user or config.default_user
        found = _find(user, skill_id)
        if found is None:
            return JSONResponse({"error": {"message": f"unknown skill id: {skill_id}"}}, status_code=404)
        existing, scope_name = found
        try:
            body = json.loads(await request.body())
        except ValueError:
            return JSONResponse({"error": {"message": "malformed request body"}}, status_code=400)

        updated = existing.copy()
        for key in ("name", "description", "prompt"):
            if key in body:
                setattr(updated, key, str(body[key]))
        for key in ("triggers", "tags", "examples"):
            if key in body:
                value = body[key]
                if not isinstance(value, list) or not all(isinstance(x, str) for x in value):
                    return JSONResponse(
                        {"error": {"message": f"{key} must be a list of strings"}}, status_code=422)
                setattr(updated, key, list(value))

        changed = any(
            getattr(updated, k) != getattr(existing, k)
            for k in ("name", "description", "prompt", "triggers", "tags", "examples")
        )
        try:
            validate_skill(updated)
        except InvariantViolation as exc:
            return JSONResponse({"error": {"message": str(exc)}}, status_code=422)
        if changed:
            updated.version = bump_patch(existing.version)
        scope = COMMON if scope_name == "common" else user_scope(user)
        runtime.bank.put_skill(scope, updated)
        return _skill_full(updated, scope_name)

    @app.delete("/admin/skills/{skill_id}")
    async def delete_skill(skill_id: str, user: str = ""):
        user = user or config.default_user
        found = _find(user, skill_id)
        if found is None:
            return JSONResponse({"error": {"message": f"unknown skill id: {skill_id}"}}, status_code=404)
        _, scope_name = found
        scope = COMMON if scope_name == "common" else user_scope(user)
        runtime.bank.delete_skill(scope, skill_id)
        return {"deleted": skill_id}

    @app.get("/admin/traces")
    async def traces(user: str = ""):
        user = user or config.default_user
        return {"traces": [t.as_dict() for t in runtime.traces.recent(user)]}

    @app.get("/admin/config")
    async def show_config():
        w = config.weights
        return {
            "bank_root": str(config.bank_root),
            "weights": {"lambda": w.lam, "alpha": w.alpha, "eta": w.eta, "k": w.k, "m": w.m},
            "bm25": {"k1": config.bm25.k1, "b": config.bm25.b},
            "window_size": config.window_size,
            "min_confidence": config.min_confidence,
            "history_window": config.history_window,
            "include_common_skills": config.include_common_skills,
            "default_user": config.default_user,
            "upstream_base_url": config.upstream_base_url,
        }

    if config.ui_dist_dir:
        app.mount("/ui", StaticFiles(directory=config.ui_dist_dir, html=True), name="ui")

    return app
