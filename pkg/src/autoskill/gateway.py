"""Chat/embedding backends, prompt templates, and structured-output parsing.

Templates live in ``prompts/*.md`` next to this module so operators can
tune wording without touching code. Each file holds the system text,
a ``<<<USER>>>`` separator line, and the user text; ``<<slot>>`` marks a
required slot, ``<<?slot>>`` an optional line that disappears when the
slot is empty.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources

import httpx
import numpy as np

from .errors import (
    BackendFailure,
    InvalidAction,
    MergeWithoutTarget,
    MissingField,
    MissingHeading,
    MissingSlot,
    Unparseable,
)
from .skill import CONSTRAINTS_HEADING, GOAL_HEADING, SkillCandidate, dedup

log = logging.getLogger(__name__)


class PromptRole(Enum):
    REWRITE = "rewrite"
    CHAT = "chat"
    EXTRACT = "extract"
    JUDGE = "judge"
    MERGE = "merge"


_SLOT_RE = re.compile(r"<<(\??)(\w+)>>")
_template_cache: dict[PromptRole, tuple[str, str]] = {}


def _load_template(role: PromptRole) -> tuple[str, str]:
    if role not in _template_cache:
        text = resources.files("autoskill.prompts").joinpath(f"{role.value}.md").read_text(encoding="utf-8")
        system, _, user = text.partition("<<<USER>>>\n")
        _template_cache[role] = (system.rstrip("\n"), user.rstrip("\n"))
    return _template_cache[role]


def _fill(template: str, slots: dict[str, str]) -> str:
    def sub(m: re.Match[str]) -> str:
        optional, name = m.group(1), m.group(2)
        value = slots.get(name, "")
        if not value:
            if optional:
                return ""
            raise MissingSlot(name)
        if optional:
            return "\n" + value
        return value

    out = _SLOT_RE.sub(sub, template)
    # Collapse a line that held only an optional slot which came up empty.
    return re.sub(r"\n+\Z", "", out.replace("\n\n\n", "\n\n"))


def render_prompt(role: PromptRole, slots: dict[str, str]) -> tuple[str, str]:
    """Byte-deterministic (system text, user text) for a role and its slots."""
    system_t, user_t = _load_template(role)
    return _fill(system_t, slots), _fill(user_t, slots)


# --- tolerant JSON extraction ---

_FENCE_RE = re.compile(r"```[a-zA-Z0-9_-]*\n(.*?)```", re.DOTALL)


def _scan_object(text: str, start: int) -> str | None:
    depth = 0
    in_str = False
    escaped = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_str:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_str = False
        elif ch == '"':
            in_str = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[start:i + 1]
    return None


def extract_json_object(text: str) -> dict:
    """Find and parse the outermost JSON object, tolerating fences and prose."""
    candidates = [m.group(1) for m in _FENCE_RE.finditer(text)]
    candidates.append(text)
    for chunk in candidates:
        start = chunk.find("{")
        while start != -1:
            raw = _scan_object(chunk, start)
            if raw is not None:
                try:
                    obj = json.loads(raw)
                    if isinstance(obj, dict):
                        return obj
                except json.JSONDecodeError:
                    pass
            start = chunk.find("{", start + 1)
    raise Unparseable(f"no JSON object found in model output: {text[:200]!r}")


def _string_list(value: object) -> list[str]:
    if value is None:
        return []
    if not isinstance(value, list) or not all(isinstance(x, str) for x in value):
        raise ValueError("expected a list of strings")
    return dedup(list(value))


def parse_extraction_output(text: str) -> list[SkillCandidate]:
    """Validate extraction JSON; malformed elements are dropped with a warning."""
    obj = extract_json_object(text)
    skills = obj.get("skills")
    if not isinstance(skills, list):
        raise Unparseable('extraction output has no "skills" array')
    out: list[SkillCandidate] = []
    for item in skills:
        try:
            if not isinstance(item, dict):
                raise ValueError("skill element is not an object")
            name = item["name"]
            if not isinstance(name, str) or not name:
                raise ValueError("name must be a non-empty string")
            confidence = float(item["confidence"])
            if not (0.0 <= confidence <= 1.0):
                raise ValueError(f"confidence out of [0,1]: {confidence}")
            out.append(SkillCandidate(
                name=name,
                description=str(item.get("description", "")),
                prompt=str(item.get("prompt", "")),
                triggers=_string_list(item.get("triggers")),
                tags=_string_list(item.get("tags")),
                examples=_string_list(item.get("examples")),
                confidence=confidence,
            ))
        except (KeyError, ValueError, TypeError) as exc:
            log.warning("dropping invalid skill candidate: %s", exc)
    return out


@dataclass(frozen=True)
class JudgeDecision:
    action: str  # add | merge | discard
    target_skill_id: str | None
    reason: str


def parse_judge_output(text: str) -> JudgeDecision:
    obj = extract_json_object(text)
    action = obj.get("action")
    if action not in ("add", "merge", "discard"):
        raise InvalidAction(f"unknown judge action: {action!r}")
    target = obj.get("target_skill_id")
    if target is not None and not isinstance(target, str):
        raise InvalidAction(f"target_skill_id must be a string or null: {target!r}")
    if action == "merge" and target is None:
        raise MergeWithoutTarget("merge decision without a target_skill_id")
    if action in ("add", "discard"):
        target = None
    return JudgeDecision(action=action, target_skill_id=target, reason=str(obj.get("reason", "")))


def parse_merge_output(text: str) -> dict:
    """The six merged fields; trigger/tag/example lists come back deduplicated."""
    obj = extract_json_object(text)
    out: dict[str, object] = {}
    for key in ("name", "description", "prompt"):
        if key not in obj:
            raise MissingField(key)
        value = obj[key]
        if not isinstance(value, str):
            raise MissingField(key)
        out[key] = value
    for key in ("triggers", "tags", "examples"):
        if key not in obj:
            raise MissingField(key)
        try:
            out[key] = _string_list(obj[key])
        except ValueError as exc:
            raise MissingField(key) from exc
    prompt = str(out["prompt"])
    for heading in (GOAL_HEADING, CONSTRAINTS_HEADING):
        if heading not in prompt:
            raise MissingHeading(heading)
    return out


# --- backends ---

class ChatBackend:
    """Contract: deterministic only for the mock; upstreams make no promise."""

    identifier: str = "chat"

    def complete(self, system: str, messages: list[dict[str, str]]) -> str:
        raise NotImplementedError


class EmbeddingBackend:
    identifier: str = "embed"
    dimension: int = 0

    def embed(self, texts: list[str]) -> list[list[float]]:
        raise NotImplementedError


def complete_with_json_retry(backend: ChatBackend, system: str, user: str, parser):
    """Parse a completion; on Unparseable, re-ask once with a JSON reminder."""
    raw = backend.complete(system, [{"role": "user", "content": user}])
    try:
        return parser(raw)
    except Unparseable:
        raw = backend.complete(
            system,
            [{"role": "user", "content": user + "\n\nOutput only valid JSON."}],
        )
        return parser(raw)


class OpenAIChatBackend(ChatBackend):
    """Chat completions over the standard OpenAI HTTP wire format."""

    def __init__(self, base_url: str, api_key: str, model: str, timeout: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.identifier = f"openai:{model}"
        self._client = httpx.Client(
            timeout=timeout,
            headers={"Authorization": f"Bearer {api_key}"} if api_key else {},
        )

    def complete(self, system: str, messages: list[dict[str, str]]) -> str:
        payload = {"model": self.model, "messages": ([{"role": "system", "content": system}] if system else []) + messages}
        try:
            resp = self._client.post(f"{self.base_url}/chat/completions", json=payload)
            resp.raise_for_status()
            return resp.json()["choices"][0]["message"]["content"]
        except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
            raise BackendFailure(f"chat upstream failed: {exc}") from exc


class OpenAIEmbeddingBackend(EmbeddingBackend):
    def __init__(self, base_url: str, api_key: str, model: str, dimension: int = 1536, timeout: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.dimension = dimension
        self.identifier = f"openai:{model}"
        self._client = httpx.Client(
            timeout=timeout,
            headers={"Authorization": f"Bearer {api_key}"} if api_key else {},
        )

    def embed(self, texts: list[str]) -> list[list[float]]:
        try:
            resp = self._client.post(
                f"{self.base_url}/embeddings",
                json={"model": self.model, "input": texts},
            )
            resp.raise_for_status()
            data = resp.json()["data"]
            return [row["embedding"] for row in sorted(data, key=lambda r: r["index"])]
        except (httpx.HTTPError, KeyError, ValueError) as exc:
            raise BackendFailure(f"embedding upstream failed: {exc}") from exc


# --- deterministic mock for tests and demos ---

_ROLE_MARKERS = {
    "You are a retrieval query rewriter.": PromptRole.REWRITE,
    "You are a response generator": PromptRole.CHAT,
    "You are a skill extractor": PromptRole.EXTRACT,
    "You are a skill set manager": PromptRole.JUDGE,
    "You are a skill merger": PromptRole.MERGE,
}

_QUERY_LINE_RE = re.compile(r"^Current query: (.*)$", re.MULTILINE)

NEUTRAL_JUDGE = '{"action": "discard", "target_skill_id": null, "reason": "no scripted verdict"}'
NEUTRAL_MERGE = json.dumps({
    "name": "merged-skill",
    "description": "",
    "prompt": "# Goal\nMerged skill.\n\n# Constraints & Style\n- none",
    "triggers": [],
    "tags": [],
    "examples": [],
})


@dataclass
class MockScenario:
    """Scripted completions: role -> ordered (user-text substring, reply) pairs."""

    responses: dict[PromptRole, list[tuple[str, str]]] = field(default_factory=dict)
    embedding_dimension: int = 32
    seed: int = 0
    delays: dict[PromptRole, float] = field(default_factory=dict)


class MockLLM(ChatBackend, EmbeddingBackend):
    """Fully deterministic chat + embedding backend for tests.

    Unmatched inputs fall back to a role-appropriate neutral output;
    embeddings are seeded hash-to-unit-vector, so cosine == dot product.
    """

    def __init__(self, scenario: MockScenario | None = None):
        self.scenario = scenario or MockScenario()
        self.dimension = self.scenario.embedding_dimension
        self.identifier = f"mock:seed={self.scenario.seed}:d={self.dimension}"
        self.calls: list[tuple[PromptRole | None, str, str]] = []
        self._lock = threading.Lock()

    def _role_of(self, system: str) -> PromptRole | None:
        for marker, role in _ROLE_MARKERS.items():
            if system.startswith(marker):
                return role
        return None

    def complete(self, system: str, messages: list[dict[str, str]]) -> str:
        user = "\n".join(m["content"] for m in messages)
        role = self._role_of(system)
        with self._lock:
            self.calls.append((role, system, user))
        delay = self.scenario.delays.get(role, 0.0) if role else 0.0
        if delay:
            time.sleep(delay)
        for needle, reply in self.scenario.responses.get(role, []):
            if needle in user:
                return reply
        if role is PromptRole.REWRITE:
            m = _QUERY_LINE_RE.search(user)
            return m.group(1) if m else user.splitlines()[-1]
        if role is PromptRole.EXTRACT:
            return '{"skills": []}'
        if role is PromptRole.JUDGE:
            return NEUTRAL_JUDGE
        if role is PromptRole.MERGE:
            return NEUTRAL_MERGE
        return "OK."

    def embed(self, texts: list[str]) -> list[list[float]]:
        return [self._embed_one(t) for t in texts]

    def _embed_one(self, text: str) -> list[float]:
        digest = hashlib.sha256(f"{self.scenario.seed}\x00{text}".encode("utf-8")).digest()
        rng = np.random.RandomState(int.from_bytes(digest[:4], "big"))
        vec = rng.standard_normal(self.dimension)
        vec /= np.linalg.norm(vec)
        return [float(x) for x in vec]
