"""Foreground turn pipeline: rewrite -> retrieve -> render -> generate,
with background evolution scheduled per user and never awaited.
"""

from __future__ import annotations

import logging
import queue
import threading
import time
from collections import deque
from dataclasses import dataclass, field

from .bank import SkillBank
from .config import AppConfig
from .gateway import ChatBackend, EmbeddingBackend, PromptRole, render_prompt
from .index import BankIndex
from .lifecycle import EvolutionReport, evolve_turn
from .retrieval import ScoredSkill, hybrid_rank, select_topk_threshold

log = logging.getLogger(__name__)

CONTEXT_HEADER = "Retrieved skill list"


@dataclass
class TurnRequest:
    user_id: str
    messages: list[dict[str, str]]

    def validate(self) -> None:
        if not self.messages or self.messages[-1].get("role") != "user":
            raise ValueError("last message must have the user role")
        for m in self.messages:
            if m.get("role") not in ("system", "user", "assistant"):
                raise ValueError(f"unknown message role: {m.get('role')!r}")


@dataclass
class RenderedContext:
    search_query: str
    blocks: list[str]
    text: str


@dataclass
class TurnTrace:
    user_id: str
    query: str
    search_query: str
    rewrite_fallback: bool
    scored: list[dict]
    injected_ids: list[str]
    context_text: str
    latencies_ms: dict[str, float]
    created_at: float = field(default_factory=time.time)
    evolution: dict | None = None
    trace_id: int = 0

    def as_dict(self) -> dict:
        return {
            "trace_id": self.trace_id,
            "user": self.user_id,
            "query": self.query,
            "search_query": self.search_query,
            "rewrite_fallback": self.rewrite_fallback,
            "scored": self.scored,
            "injected_ids": self.injected_ids,
            "injected_count": len(self.injected_ids),
            "context": self.context_text,
            "latencies_ms": self.latencies_ms,
            "created_at": self.created_at,
            "evolution": self.evolution,
        }


def format_history(messages: list[dict[str, str]]) -> str:
    return "\n".join(f"{m['role']}: {m['content']}" for m in messages)


def rewrite_query(query: str, history: list[dict[str, str]], backend: ChatBackend, config: AppConfig) -> tuple[str, bool]:
    """Retrieval-oriented one-liner; degrades to the raw query on failure."""
    recent = history[-config.history_window:]
    system, user = render_prompt(PromptRole.REWRITE, {
        "history": format_history(recent) or "(none)",
        "query": query,
    })
    try:
        rewritten = backend.complete(system, [{"role": "user", "content": user}]).strip()
        if rewritten:
            return rewritten.splitlines()[0], False
    except Exception as exc:
        log.warning("query rewrite degraded to raw query: %s", exc)
    return query, True


def render_context(search_query: str, hits: list[ScoredSkill]) -> RenderedContext:
    """Assemble the injected context block; empty hits render to empty text."""
    if not hits:
        return RenderedContext(search_query=search_query, blocks=[], text="")
    blocks = []
    for h in hits:
        s = h.skill
        blocks.append(
            f"name: {s.name}\n"
            f"id: {s.id}\n"
            f"description: {s.description}\n"
            f"tags: {', '.join(s.tags)}\n"
            f"triggers: {', '.join(s.triggers)}\n"
            f"prompt:\n{s.prompt}"
        )
    text = f"{CONTEXT_HEADER}\nSearch query: {search_query}\n\n" + "\n\n".join(blocks)
    return RenderedContext(search_query=search_query, blocks=blocks, text=text)


class TraceStore:
    """Bounded per-user ring of turn traces, served by the admin API."""

    def __init__(self, size: int):
        self.size = size
        self._rings: dict[str, deque[TurnTrace]] = {}
        self._lock = threading.Lock()
        self._next_id = 1

    def add(self, trace: TurnTrace) -> TurnTrace:
        with self._lock:
            trace.trace_id = self._next_id
            self._next_id += 1
            self._rings.setdefault(trace.user_id, deque(maxlen=self.size)).append(trace)
        return trace

    def recent(self, user_id: str) -> list[TurnTrace]:
        with self._lock:
            return list(self._rings.get(user_id, ()))


class AutoSkillRuntime:
    """Shared engine behind the SDK, CLI, and proxy."""

    def __init__(
        self,
        bank: SkillBank,
        config: AppConfig,
        chat: ChatBackend,
        embedder: EmbeddingBackend,
        rewriter: ChatBackend | None = None,
        evolver: ChatBackend | None = None,
    ):
        self.bank = bank
        self.config = config
        self.chat = chat
        self.rewriter = rewriter or chat
        self.evolver = evolver or chat
        self.index = BankIndex(
            bank,
            embedder,
            include_common=config.include_common_skills,
            include_prompt_in_doc_text=config.include_prompt_in_doc_text,
        )
        self.traces = TraceStore(config.trace_ring_size)
        self._turn_locks: dict[str, threading.Lock] = {}
        self._evo_queues: dict[str, "queue.Queue[tuple[list[dict[str, str]], TurnTrace]]"] = {}
        self._guard = threading.Lock()
        self._closed = threading.Event()
        self.turn_counts: dict[str, int] = {}

    # --- background evolution, per-user serialized ---

    def _evo_worker(self, user_id: str, q: "queue.Queue") -> None:
        while not self._closed.is_set():
            try:
                history, trace = q.get(timeout=0.2)
            except queue.Empty:
                continue
            if self._closed.is_set():
                break
            report = evolve_turn(user_id, history, self.bank, self.index, self.config, self.evolver)
            trace.evolution = report.as_dict()
            q.task_done()

    def schedule_evolution(self, user_id: str, history: list[dict[str, str]], trace: TurnTrace) -> None:
        count = self.turn_counts.get(user_id, 0) + 1
        self.turn_counts[user_id] = count
        if count % max(1, self.config.evolve_every_n_turns) != 0:
            return
        with self._guard:
            if user_id not in self._evo_queues:
                q: "queue.Queue" = queue.Queue()
                self._evo_queues[user_id] = q
                threading.Thread(target=self._evo_worker, args=(user_id, q), daemon=True).start()
        self._evo_queues[user_id].put((history, trace))

    def drain_evolution(self, timeout: float = 30.0) -> None:
        """Wait for queued evolution work; used by clean shutdown and tests."""
        deadline = time.time() + timeout
        for q in list(self._evo_queues.values()):
            while not q.empty() or q.unfinished_tasks:
                if time.time() > deadline:
                    return
                time.sleep(0.02)

    def close(self, flush: bool = True) -> None:
        if flush:
            self.drain_evolution()
        self._closed.set()

    # --- foreground pipeline ---

    def _turn_lock(self, user_id: str) -> threading.Lock:
        with self._guard:
            return self._turn_locks.setdefault(user_id, threading.Lock())

    def retrieve_for_turn(self, search_query: str, user_id: str) -> list[ScoredSkill]:
        rows = self.index.snapshot(user_id)
        if not rows:
            return []
        try:
            embedding = self.index.embed_text(search_query)
        except Exception as exc:
            log.warning("embedding failed, serving without augmentation: %s", exc)
            return []
        ranked = hybrid_rank(
            search_query, embedding, rows,
            lam=self.config.weights.lam,
            bm25_params=self.config.bm25,
            include_prompt=self.config.include_prompt_in_doc_text,
        )
        if self.config.absolute_dense_floor is not None:
            ranked = [r for r in ranked if r.dense_raw >= self.config.absolute_dense_floor]
        return select_topk_threshold(ranked, self.config.weights.k, self.config.weights.eta)

    def prepare_turn(self, request: TurnRequest) -> tuple[list[dict[str, str]], TurnTrace]:
        """Rewrite + retrieve + render; returns augmented messages and the trace.

        The context lands in the system message (created if absent), so
        client-visible history stays untouched.
        """
        request.validate()
        query = request.messages[-1]["content"]
        history = request.messages[:-1]
        latencies: dict[str, float] = {}

        t0 = time.perf_counter()
        search_query, fallback = rewrite_query(query, history, self.rewriter, self.config)
        latencies["rewrite"] = (time.perf_counter() - t0) * 1000

        t0 = time.perf_counter()
        rows = self.index.snapshot(request.user_id)
        scored: list[ScoredSkill] = []
        hits: list[ScoredSkill] = []
        if rows:
            try:
                embedding = self.index.embed_text(search_query)
                scored = hybrid_rank(
                    search_query, embedding, rows,
                    lam=self.config.weights.lam,
                    bm25_params=self.config.bm25,
                    include_prompt=self.config.include_prompt_in_doc_text,
                )
                if self.config.absolute_dense_floor is not None:
                    scored = [r for r in scored if r.dense_raw >= self.config.absolute_dense_floor]
                hits = select_topk_threshold(scored, self.config.weights.k, self.config.weights.eta)
            except Exception as exc:
                log.warning("retrieval failed, serving without augmentation: %s", exc)
        latencies["retrieve"] = (time.perf_counter() - t0) * 1000

        context = render_context(search_query, hits)
        messages = [dict(m) for m in request.messages]
        if context.text:
            sys_idx = next((i for i, m in enumerate(messages) if m["role"] == "system"), None)
            if sys_idx is None:
                messages.insert(0, {"role": "system", "content": context.text})
            else:
                messages[sys_idx]["content"] = messages[sys_idx]["content"] + "\n\n" + context.text

        trace = TurnTrace(
            user_id=request.user_id,
            query=query,
            search_query=search_query,
            rewrite_fallback=fallback,
            scored=[{
                "skill_id": s.skill.id,
                "name": s.skill.name,
                "version": str(s.skill.version),
                "dense_raw": s.dense_raw,
                "lexical_raw": s.lexical_raw,
                "dense_norm": s.dense_norm,
                "lexical_norm": s.lexical_norm,
                "rel": s.rel,
            } for s in scored],
            injected_ids=[h.skill.id for h in hits],
            context_text=context.text,
            latencies_ms=latencies,
        )
        self.traces.add(trace)
        return messages, trace

    def handle_turn(self, request: TurnRequest) -> tuple[str, TurnTrace]:
        """SDK-path turn: full pipeline plus generation through the chat backend."""
        with self._turn_lock(request.user_id):
            messages, trace = self.prepare_turn(request)
            chat_system, _ = render_prompt(PromptRole.CHAT, {
                "context": trace.context_text,
                "history": format_history(request.messages) or "(none)",
            })
            convo = [m for m in messages if m["role"] != "system"]
            t0 = time.perf_counter()
            response = self.chat.complete(chat_system, convo)
            trace.latencies_ms["generate"] = (time.perf_counter() - t0) * 1000
            self.schedule_evolution(request.user_id, request.messages, trace)
            return response, trace
