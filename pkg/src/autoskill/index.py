"""In-memory retrieval snapshots over the bank's persistent vector caches.

A snapshot pairs each skill in the retrieval set with its embedding.
Cache rows are keyed by "id<TAB>version"; a row whose version lags the
artifact is re-embedded lazily the next time a snapshot is built, and the
refreshed cache is written back wholesale.
"""

from __future__ import annotations

import logging
import re
import threading

import numpy as np

from .bank import COMMON, BankScope, SkillBank, VectorCacheMeta, user_scope
from .errors import InconsistentCache
from .gateway import EmbeddingBackend
from .retrieval import skill_doc_text
from .skill import Skill

log = logging.getLogger(__name__)

_CACHE_NAME_SAFE = re.compile(r"[^0-9A-Za-z._-]+")


def cache_name_for(scope: BankScope, embedder_id: str) -> str:
    """Scope + embedding model are both encoded to keep caches from mixing."""
    scope_part = "common" if scope.is_common else f"users--{scope.user_id}"
    model_part = _CACHE_NAME_SAFE.sub("-", embedder_id)
    return _CACHE_NAME_SAFE.sub("-", scope_part) + "--" + model_part


class BankIndex:
    """Builds immutable (skill, embedding) snapshots for one user's retrieval set."""

    def __init__(
        self,
        bank: SkillBank,
        embedder: EmbeddingBackend,
        include_common: bool = True,
        include_prompt_in_doc_text: bool = False,
    ):
        self.bank = bank
        self.embedder = embedder
        self.include_common = include_common
        self.include_prompt = include_prompt_in_doc_text
        self._lock = threading.Lock()

    def _scope_rows(self, scope: BankScope) -> list[tuple[Skill, list[float]]]:
        skills = self.bank.list_skills(scope)
        name = cache_name_for(scope, self.embedder.identifier)
        cached: dict[str, list[float]] = {}
        try:
            loaded = self.bank.load_vector_cache(name)
        except InconsistentCache as exc:
            log.warning("discarding inconsistent vector cache %s: %s", name, exc)
            loaded = None
        if loaded is not None:
            _, ids, vectors = loaded
            for line, row in zip(ids, vectors):
                cached[line] = [float(x) for x in row]

        rows: list[tuple[Skill, list[float]]] = []
        missing: list[Skill] = []
        for skill in skills:
            key = f"{skill.id}\t{skill.version}"
            if key in cached:
                rows.append((skill, cached[key]))
            else:
                missing.append(skill)
        if missing:
            texts = [skill_doc_text(s, self.include_prompt) for s in missing]
            embeddings = self.embedder.embed(texts)
            rows.extend(zip(missing, embeddings))
            self._persist(scope, name, rows)
        return rows

    def _persist(self, scope: BankScope, name: str, rows: list[tuple[Skill, list[float]]]) -> None:
        ids = [f"{s.id}\t{s.version}" for s, _ in rows]
        dim = self.embedder.dimension
        matrix = np.array([v for _, v in rows], dtype="<f4").reshape(len(rows), dim)
        meta = VectorCacheMeta(
            embedding_model=self.embedder.identifier,
            dimension=dim,
            count=len(rows),
            metric="cosine",
        )
        self.bank.save_vector_cache(name, meta, ids, matrix)

    def snapshot(self, user_id: str) -> list[tuple[Skill, list[float]]]:
        """The user's retrieval set (plus Common, if enabled) with embeddings."""
        with self._lock:
            rows = self._scope_rows(user_scope(user_id))
            if self.include_common:
                rows = rows + self._scope_rows(COMMON)
            return rows

    def user_snapshot(self, user_id: str) -> list[tuple[Skill, list[float]]]:
        """User scope only, with no Common rows mixed in."""
        with self._lock:
            return self._scope_rows(user_scope(user_id))

    def embed_text(self, text: str) -> list[float]:
        return self.embedder.embed([text])[0]
