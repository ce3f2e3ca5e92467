"""Persistent skill storage and on-disk vector caches.

Layout (under the bank root):

    Users/<user_id>/<skill-slug>/SKILL.md   per-user skills
    Common/<skill-slug>/SKILL.md            shared skills
    vectors/<name>.meta.json                cache metadata
    vectors/<name>.ids.txt                  one "id<TAB>version" per line
    vectors/<name>.vecs.f32                 row-major little-endian float32

All artifact and cache writes go through a temp-file + rename so readers
never observe a torn file and a crash mid-write leaves the old state.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InconsistentCache, ParseFailure, ScopeInvalid, ShapeMismatch
from .skill import Skill, parse_skill_md, serialize_skill_md, slugify

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BankScope:
    """Either a per-user scope or the shared Common scope."""

    user_id: str | None = None

    @property
    def is_common(self) -> bool:
        return self.user_id is None

    def validate(self) -> None:
        if self.user_id is None:
            return
        if not self.user_id or "/" in self.user_id or "\\" in self.user_id or os.sep in self.user_id:
            raise ScopeInvalid(f"invalid user id: {self.user_id!r}")

    def key(self) -> str:
        return "Common" if self.is_common else f"Users/{self.user_id}"


COMMON = BankScope()


def user_scope(user_id: str) -> BankScope:
    scope = BankScope(user_id)
    scope.validate()
    return scope


@dataclass
class VectorCacheMeta:
    embedding_model: str
    dimension: int
    count: int
    metric: str = "cosine"


def _atomic_write_bytes(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


class SkillBank:
    """Per-user and shared skill store rooted at a local directory.

    One writer per scope at a time (internal lock); readers see whole
    files only, thanks to the atomic-rename write discipline.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _scope_lock(self, scope: BankScope) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(scope.key(), threading.Lock())

    def _scope_dir(self, scope: BankScope) -> Path:
        scope.validate()
        return self.root / scope.key()

    # --- artifacts ---

    def _artifact_dirs(self, scope: BankScope) -> list[Path]:
        base = self._scope_dir(scope)
        if not base.is_dir():
            return []
        return sorted((d for d in base.iterdir() if (d / "SKILL.md").is_file()), key=lambda d: d.name)

    def _find_dir_by_id(self, scope: BankScope, skill_id: str) -> Path | None:
        for d in self._artifact_dirs(scope):
            try:
                if parse_skill_md((d / "SKILL.md").read_text(encoding="utf-8")).id == skill_id:
                    return d
            except Exception:
                continue
        return None

    def put_skill(self, scope: BankScope, skill: Skill) -> Path:
        """Write (or overwrite in place, keyed by id) a skill artifact."""
        with self._scope_lock(scope):
            base = self._scope_dir(scope)
            target = self._find_dir_by_id(scope, skill.id)
            if target is None:
                slug = slugify(skill.name, skill.id)
                target = base / slug
                suffix = 2
                while (target / "SKILL.md").is_file():
                    target = base / f"{slug}-{suffix}"
                    suffix += 1
            target.mkdir(parents=True, exist_ok=True)
            path = target / "SKILL.md"
            _atomic_write_bytes(path, serialize_skill_md(skill).encode("utf-8"))
            return path

    def get_skill(self, scope: BankScope, skill_id: str) -> Skill | None:
        for d in self._artifact_dirs(scope):
            path = d / "SKILL.md"
            try:
                skill = parse_skill_md(path.read_text(encoding="utf-8"))
            except Exception as exc:
                if self._probably_matches(path, skill_id):
                    raise ParseFailure(f"corrupted skill artifact at {path}: {exc}") from exc
                continue
            if skill.id == skill_id:
                return skill
        return None

    @staticmethod
    def _probably_matches(path: Path, skill_id: str) -> bool:
        try:
            return skill_id in path.read_text(encoding="utf-8")
        except OSError:
            return False

    def list_skills(self, scope: BankScope) -> list[Skill]:
        """All parseable artifacts in slug order; corrupted ones are skipped."""
        out: list[Skill] = []
        for d in self._artifact_dirs(scope):
            path = d / "SKILL.md"
            try:
                out.append(parse_skill_md(path.read_text(encoding="utf-8")))
            except Exception as exc:
                log.warning("skipping unparseable skill artifact %s: %s", path, exc)
        return out

    def delete_skill(self, scope: BankScope, skill_id: str) -> bool:
        with self._scope_lock(scope):
            target = self._find_dir_by_id(scope, skill_id)
            if target is None:
                return False
            for child in sorted(target.rglob("*"), reverse=True):
                if child.is_file():
                    child.unlink()
                else:
                    child.rmdir()
            target.rmdir()
            return True

    def skill_dir(self, scope: BankScope, skill_id: str) -> Path | None:
        return self._find_dir_by_id(scope, skill_id)

    # --- vector caches ---

    def _vectors_dir(self) -> Path:
        return self.root / "vectors"

    def save_vector_cache(
        self,
        cache_name: str,
        meta: VectorCacheMeta,
        ids: list[str],
        vectors: np.ndarray,
    ) -> None:
        """Persist one embedding cache as the meta/ids/vecs file triple."""
        vectors = np.asarray(vectors, dtype="<f4")
        if vectors.size == 0:
            vectors = vectors.reshape(0, meta.dimension)
        if len(ids) != meta.count or vectors.shape != (meta.count, meta.dimension):
            raise ShapeMismatch(
                f"cache {cache_name!r}: {len(ids)} ids, vectors {vectors.shape}, "
                f"meta says {meta.count}x{meta.dimension}"
            )
        vdir = self._vectors_dir()
        vdir.mkdir(parents=True, exist_ok=True)
        meta_doc = {
            "embedding_model": meta.embedding_model,
            "dimension": meta.dimension,
            "count": meta.count,
            "metric": meta.metric,
        }
        ids_text = "".join(line + "\n" for line in ids)
        _atomic_write_bytes(vdir / f"{cache_name}.vecs.f32", vectors.tobytes(order="C"))
        _atomic_write_bytes(vdir / f"{cache_name}.ids.txt", ids_text.encode("utf-8"))
        _atomic_write_bytes(vdir / f"{cache_name}.meta.json", json.dumps(meta_doc).encode("utf-8"))

    def load_vector_cache(self, cache_name: str) -> tuple[VectorCacheMeta, list[str], np.ndarray] | None:
        vdir = self._vectors_dir()
        meta_path = vdir / f"{cache_name}.meta.json"
        ids_path = vdir / f"{cache_name}.ids.txt"
        vecs_path = vdir / f"{cache_name}.vecs.f32"
        if not meta_path.is_file():
            return None
        doc = json.loads(meta_path.read_text(encoding="utf-8"))
        meta = VectorCacheMeta(
            embedding_model=doc["embedding_model"],
            dimension=int(doc["dimension"]),
            count=int(doc["count"]),
            metric=doc.get("metric", "cosine"),
        )
        if not ids_path.is_file() or not vecs_path.is_file():
            raise InconsistentCache(f"cache {cache_name!r} is missing {ids_path.name if not ids_path.is_file() else vecs_path.name}")
        ids_text = ids_path.read_text(encoding="utf-8")
        ids = ids_text.splitlines()
        if len(ids) != meta.count:
            raise InconsistentCache(
                f"{ids_path.name} has {len(ids)} lines but {meta_path.name} says count={meta.count}"
            )
        raw = vecs_path.read_bytes()
        expected = meta.count * meta.dimension * 4
        if len(raw) != expected:
            raise InconsistentCache(
                f"{vecs_path.name} is {len(raw)} bytes, expected {expected} "
                f"({meta.count}x{meta.dimension}x4)"
            )
        vectors = np.frombuffer(raw, dtype="<f4").reshape(meta.count, meta.dimension)
        return meta, ids, vectors
