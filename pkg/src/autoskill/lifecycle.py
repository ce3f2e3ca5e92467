"""Skill evolution: extract candidates, judge against the nearest neighbor,
merge with a patch bump, and apply the add/merge/discard update to the bank.

Every failure path here is contained: a backend or parse error for one
candidate leaves the bank byte-identical and is reported, never raised
into the serving path.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

from .bank import SkillBank, user_scope
from .config import AppConfig
from .errors import BackendFailure, GatewayError, Unparseable
from .gateway import (
    ChatBackend,
    JudgeDecision,
    PromptRole,
    complete_with_json_retry,
    parse_extraction_output,
    parse_judge_output,
    parse_merge_output,
    render_prompt,
)
from .index import BankIndex
from .retrieval import candidate_query_text, nearest_neighbor_for_candidate
from .skill import INITIAL_VERSION, Skill, SkillCandidate, bump_patch, dedup

log = logging.getLogger(__name__)


@dataclass
class EvidenceWindow:
    """Recent user-only queries, oldest first; assistant text never enters."""

    user_id: str
    queries: list[str]
    window_size: int

    @classmethod
    def from_history(cls, user_id: str, messages: list[dict[str, str]], window_size: int) -> "EvidenceWindow":
        queries = [m["content"] for m in messages if m.get("role") == "user"]
        return cls(user_id=user_id, queries=queries[-window_size:], window_size=window_size)


@dataclass
class MaintenanceAction:
    decision: JudgeDecision
    candidate: SkillCandidate
    neighbor: Skill | None = None


@dataclass
class EvolutionEntry:
    candidate_name: str
    action: str
    skill_id: str | None = None
    version: str | None = None
    reason: str = ""

    def as_dict(self) -> dict:
        return {
            "candidate": self.candidate_name,
            "action": self.action,
            "skill_id": self.skill_id,
            "version": self.version,
            "reason": self.reason,
        }


@dataclass
class EvolutionReport:
    user_id: str
    entries: list[EvolutionEntry] = field(default_factory=list)
    error: str | None = None

    def as_dict(self) -> dict:
        return {
            "user": self.user_id,
            "entries": [e.as_dict() for e in self.entries],
            "error": self.error,
        }


def _candidate_json(candidate: SkillCandidate) -> str:
    return json.dumps({
        "name": candidate.name,
        "description": candidate.description,
        "prompt": candidate.prompt,
        "triggers": candidate.triggers,
        "tags": candidate.tags,
        "examples": candidate.examples,
        "confidence": candidate.confidence,
    }, ensure_ascii=False, indent=2)


def _skill_json(skill: Skill) -> str:
    return json.dumps({
        "id": skill.id,
        "name": skill.name,
        "description": skill.description,
        "prompt": skill.prompt,
        "triggers": skill.triggers,
        "tags": skill.tags,
        "examples": skill.examples,
        "version": str(skill.version),
    }, ensure_ascii=False, indent=2)


def extract_candidates(window: EvidenceWindow, backend: ChatBackend, config: AppConfig) -> list[SkillCandidate]:
    """Run extraction over the query window; below-floor candidates are dropped."""
    numbered = "\n".join(f"{i + 1}. {q}" for i, q in enumerate(window.queries))
    system, user = render_prompt(PromptRole.EXTRACT, {"queries": numbered})
    candidates = complete_with_json_retry(backend, system, user, parse_extraction_output)
    kept = [c for c in candidates if c.confidence >= config.min_confidence]
    for c in candidates:
        if c.confidence < config.min_confidence:
            log.info("dropping low-confidence candidate %r (%.2f < %.2f)",
                     c.name, c.confidence, config.min_confidence)
    return kept


def judge_candidate(
    candidate: SkillCandidate,
    bank_rows: list,
    candidate_embedding: list[float] | None,
    config: AppConfig,
    backend: ChatBackend,
) -> MaintenanceAction:
    """Three-way verdict against the single best neighbor.

    Empty bank short-circuits to add without a backend call; any judge
    failure fails safe to discard so the bank is never corrupted.
    """
    if not bank_rows:
        return MaintenanceAction(
            decision=JudgeDecision(action="add", target_skill_id=None, reason="empty bank"),
            candidate=candidate,
        )
    neighbors, best = nearest_neighbor_for_candidate(
        candidate, candidate_embedding or [], bank_rows, config.weights, config.bm25,
    )
    assert best is not None
    neighbor_ids = {n.skill.id for n in neighbors}
    system, user = render_prompt(PromptRole.JUDGE, {
        "candidate": _candidate_json(candidate),
        "neighbor": _skill_json(best.skill),
    })
    try:
        decision = complete_with_json_retry(backend, system, user, parse_judge_output)
    except GatewayError as exc:
        log.warning("judge failed for candidate %r, discarding: %s", candidate.name, exc)
        return MaintenanceAction(
            decision=JudgeDecision(action="discard", target_skill_id=None, reason=f"judge failure: {exc}"),
            candidate=candidate,
            neighbor=best.skill,
        )
    if decision.action == "merge" and decision.target_skill_id not in neighbor_ids:
        log.warning("judge targeted %s outside the neighbor set; coercing to %s",
                    decision.target_skill_id, best.skill.id)
        decision = JudgeDecision(action="merge", target_skill_id=best.skill.id, reason=decision.reason)
    neighbor = best.skill
    if decision.action == "merge" and decision.target_skill_id != best.skill.id:
        neighbor = next(n.skill for n in neighbors if n.skill.id == decision.target_skill_id)
    return MaintenanceAction(decision=decision, candidate=candidate, neighbor=neighbor)


def merge_skills(existing: Skill, candidate: SkillCandidate, backend: ChatBackend) -> Skill:
    """Semantic union keeping the existing id; version gets a patch bump."""
    system, user = render_prompt(PromptRole.MERGE, {
        "existing": _skill_json(existing),
        "candidate": _candidate_json(candidate),
    })
    fields = complete_with_json_retry(backend, system, user, parse_merge_output)
    return Skill(
        id=existing.id,
        name=str(fields["name"]) or existing.name,
        description=str(fields["description"]),
        prompt=str(fields["prompt"]),
        triggers=dedup(list(fields["triggers"])),
        tags=dedup(list(fields["tags"])),
        examples=dedup(list(fields["examples"])),
        version=bump_patch(existing.version),
        confidence=existing.confidence,
        extra_lines=list(existing.extra_lines),
    )


@dataclass
class ApplyResult:
    outcome: str  # add | merge | discard
    skill_id: str | None = None
    version: str | None = None


def apply_update(
    bank: SkillBank,
    user_id: str,
    action: MaintenanceAction,
    backend: ChatBackend,
    config: AppConfig,
) -> ApplyResult:
    """The three-case bank update: grow on add, replace in place on merge,
    no-op on discard. A failed merge degrades to discard, bank untouched."""
    scope = user_scope(user_id)
    decision = action.decision
    if decision.action == "discard":
        return ApplyResult(outcome="discard")
    if decision.action == "add":
        c = action.candidate
        skill = Skill(
            id=config.id_factory(),
            name=c.name,
            description=c.description,
            prompt=c.prompt,
            triggers=dedup(list(c.triggers)),
            tags=dedup(list(c.tags)),
            examples=dedup(list(c.examples)),
            version=INITIAL_VERSION,
            confidence=c.confidence,
        )
        bank.put_skill(scope, skill)
        return ApplyResult(outcome="add", skill_id=skill.id, version=str(skill.version))
    # merge
    existing = bank.get_skill(scope, decision.target_skill_id or "")
    if existing is None:
        log.warning("merge target %s not in user scope (shared skills stay operator-controlled); discarding",
                    decision.target_skill_id)
        return ApplyResult(outcome="discard")
    try:
        merged = merge_skills(existing, action.candidate, backend)
    except GatewayError as exc:
        log.warning("merge failed for %s, bank unchanged: %s", existing.id, exc)
        return ApplyResult(outcome="discard")
    bank.put_skill(scope, merged)
    return ApplyResult(outcome="merge", skill_id=merged.id, version=str(merged.version))


def evolve_turn(
    user_id: str,
    history: list[dict[str, str]],
    bank: SkillBank,
    index: BankIndex,
    config: AppConfig,
    backend: ChatBackend,
) -> EvolutionReport:
    """One background evolution pass: extract, then judge + apply per candidate.

    Candidates are handled sequentially against the live bank so a later
    candidate can merge into an earlier one's fresh skill. Never raises.
    """
    report = EvolutionReport(user_id=user_id)
    try:
        window = EvidenceWindow.from_history(user_id, history, config.window_size)
        if not window.queries:
            return report
        try:
            candidates = extract_candidates(window, backend, config)
        except GatewayError as exc:
            log.warning("extraction failed for user %s: %s", user_id, exc)
            report.error = f"extraction failed: {exc}"
            return report
        for candidate in candidates:
            rows = index.snapshot(user_id)
            embedding = index.embed_text(candidate_query_text(candidate)) if rows else None
            action = judge_candidate(candidate, rows, embedding, config, backend)
            result = apply_update(bank, user_id, action, backend, config)
            entry = EvolutionEntry(
                candidate_name=candidate.name,
                action=result.outcome,
                skill_id=result.skill_id,
                version=result.version,
                reason=action.decision.reason,
            )
            report.entries.append(entry)
            log.info("evolution decision: %s", json.dumps(entry.as_dict(), ensure_ascii=False))
    except Exception as exc:  # containment boundary for the serving path
        log.exception("evolution pass failed for user %s", user_id)
        report.error = str(exc)
    return report
