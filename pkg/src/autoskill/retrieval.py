"""Hybrid lexical + dense skill scoring.

Serving-time: fused score Rel = lam * dhat + (1 - lam) * bhat over
min-max-normalized cosine and Okapi BM25 scores, then Top-K plus a
threshold gate. Management-time: same fusion with its own weight, used to
find the nearest existing skill for a fresh candidate.

Flat exact search only; banks are small (hundreds of skills at most).
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass

from .config import Bm25Params, HybridWeights
from .errors import DimensionMismatch, EmptyInput, ZeroVector
from .skill import Skill, SkillCandidate

_WORD_RE = re.compile(r"\w+", re.UNICODE)

_CJK_RANGES = (
    (0x3400, 0x4DBF),
    (0x4E00, 0x9FFF),
    (0xF900, 0xFAFF),
    (0x20000, 0x2A6DF),
)


def _is_cjk(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in _CJK_RANGES)


def tokenize(text: str) -> list[str]:
    """Lowercased word tokens; CJK runs also emit character bigrams."""
    tokens: list[str] = []
    for word in _WORD_RE.findall(text.lower()):
        run: list[str] = []
        plain: list[str] = []

        def flush_run() -> None:
            if run:
                tokens.extend(run)
                tokens.extend(a + b for a, b in zip(run, run[1:]))
                run.clear()

        def flush_plain() -> None:
            if plain:
                tokens.append("".join(plain))
                plain.clear()

        for ch in word:
            if _is_cjk(ch):
                flush_plain()
                run.append(ch)
            else:
                flush_run()
                plain.append(ch)
        flush_run()
        flush_plain()
    return tokens


@dataclass
class CorpusStats:
    """Document frequencies and length statistics over the candidate set."""

    doc_freq: dict[str, int]
    avg_doc_len: float
    n_docs: int

    @classmethod
    def from_documents(cls, docs: list[list[str]]) -> "CorpusStats":
        df: Counter[str] = Counter()
        for doc in docs:
            df.update(set(doc))
        total_len = sum(len(d) for d in docs)
        avg = total_len / len(docs) if docs else 0.0
        return cls(doc_freq=dict(df), avg_doc_len=avg, n_docs=len(docs))


def bm25_score(
    query_tokens: list[str],
    doc_tokens: list[str],
    stats: CorpusStats,
    params: Bm25Params,
) -> float:
    """Okapi BM25 with the IDF floored at 0 (never negative)."""
    if not doc_tokens or stats.n_docs == 0:
        return 0.0
    freqs = Counter(doc_tokens)
    dl = len(doc_tokens)
    norm = params.k1 * (1.0 - params.b + params.b * dl / stats.avg_doc_len) if stats.avg_doc_len > 0 else params.k1
    score = 0.0
    for term in query_tokens:
        f = freqs.get(term, 0)
        if f == 0:
            continue
        df = stats.doc_freq.get(term, 0)
        idf = max(0.0, math.log((stats.n_docs - df + 0.5) / (df + 0.5)))
        score += idf * f * (params.k1 + 1.0) / (f + norm)
    return score


def cosine_similarity(u: list[float], v: list[float]) -> float:
    if len(u) != len(v):
        raise DimensionMismatch(f"vector dimensions differ: {len(u)} vs {len(v)}")
    dot = nu = nv = 0.0
    for a, b in zip(u, v):
        dot += a * b
        nu += a * a
        nv += b * b
    if nu == 0.0 or nv == 0.0:
        raise ZeroVector("cosine similarity is undefined for an all-zero vector")
    return dot / math.sqrt(nu * nv)


def minmax_normalize(scores: list[float]) -> list[float]:
    """Map scores to [0,1]; all-equal inputs map to 1.0 (or 0.0 when max <= 0)."""
    if not scores:
        raise EmptyInput("cannot normalize an empty score list")
    lo, hi = min(scores), max(scores)
    if hi == lo:
        fill = 1.0 if hi > 0 else 0.0
        return [fill] * len(scores)
    span = hi - lo
    return [(s - lo) / span for s in scores]


@dataclass
class ScoredSkill:
    skill: Skill
    dense_raw: float
    lexical_raw: float
    dense_norm: float = 0.0
    lexical_norm: float = 0.0
    rel: float = 0.0


def skill_doc_text(skill: Skill, include_prompt: bool = False) -> str:
    """The skill-side text used for both BM25 and embeddings."""
    parts = [skill.name, skill.description, *skill.triggers, *skill.tags]
    if include_prompt:
        parts.append(skill.prompt)
    return "\n".join(parts)


def candidate_query_text(candidate: SkillCandidate) -> str:
    """Management-time retrieval query: name, description, triggers, instructions."""
    return "\n".join([candidate.name, candidate.description, *candidate.triggers, candidate.prompt])


def hybrid_rank(
    query: str,
    query_embedding: list[float],
    candidates: list[tuple[Skill, list[float]]],
    lam: float,
    bm25_params: Bm25Params,
    include_prompt: bool = False,
) -> list[ScoredSkill]:
    """Score every candidate skill and sort by fused relevance, descending.

    Ties break on higher raw dense score, then on skill id, so the output
    is deterministic and independent of input order.
    """
    if not candidates:
        return []
    query_tokens = tokenize(query)
    docs = [tokenize(skill_doc_text(s, include_prompt)) for s, _ in candidates]
    stats = CorpusStats.from_documents(docs)
    scored = []
    for (skill, emb), doc in zip(candidates, docs):
        dense = cosine_similarity(query_embedding, emb)
        lexical = bm25_score(query_tokens, doc, stats, bm25_params)
        scored.append(ScoredSkill(skill=skill, dense_raw=dense, lexical_raw=lexical))
    dense_norm = minmax_normalize([s.dense_raw for s in scored])
    lex_norm = minmax_normalize([s.lexical_raw for s in scored])
    for s, dn, bn in zip(scored, dense_norm, lex_norm):
        s.dense_norm = dn
        s.lexical_norm = bn
        s.rel = lam * dn + (1.0 - lam) * bn
    scored.sort(key=lambda s: (-s.rel, -s.dense_raw, s.skill.id))
    return scored


def select_topk_threshold(ranked: list[ScoredSkill], k: int, eta: float) -> list[ScoredSkill]:
    """Keep at most k top entries whose fused score reaches eta; may be empty."""
    return [s for s in ranked[:k] if s.rel >= eta]


def nearest_neighbor_for_candidate(
    candidate: SkillCandidate,
    candidate_embedding: list[float],
    bank: list[tuple[Skill, list[float]]],
    weights: HybridWeights,
    bm25_params: Bm25Params,
) -> tuple[list[ScoredSkill], ScoredSkill | None]:
    """TopM neighbor set and the single best match, or (.., None) on an empty bank."""
    if not bank:
        return [], None
    ranked = hybrid_rank(
        candidate_query_text(candidate),
        candidate_embedding,
        bank,
        lam=weights.alpha,
        bm25_params=bm25_params,
    )
    neighbors = ranked[: weights.m]
    return neighbors, neighbors[0]
