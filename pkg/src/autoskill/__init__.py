"""AutoSkill: lifelong skill memory for LLM assistants.

Skills are extracted from user queries, stored as versioned SKILL.md
artifacts, retrieved with hybrid lexical+dense ranking, and injected into
future requests through an OpenAI-compatible proxy.
"""

from .bank import COMMON, BankScope, SkillBank, VectorCacheMeta, user_scope
from .config import AppConfig, Bm25Params, HybridWeights, load_config
from .gateway import (
    ChatBackend,
    EmbeddingBackend,
    JudgeDecision,
    MockLLM,
    MockScenario,
    PromptRole,
)
from .lifecycle import EvidenceWindow, MaintenanceAction, evolve_turn
from .retrieval import hybrid_rank, select_topk_threshold, tokenize
from .serving import AutoSkillRuntime, TurnRequest, render_context
from .skill import (
    SemVer,
    Skill,
    SkillCandidate,
    bump_patch,
    parse_skill_md,
    serialize_skill_md,
    slugify,
)

__version__ = "0.1.0"

__all__ = [
    "AppConfig",
    "AutoSkillRuntime",
    "BankScope",
    "Bm25Params",
    "COMMON",
    "ChatBackend",
    "EmbeddingBackend",
    "EvidenceWindow",
    "HybridWeights",
    "JudgeDecision",
    "MaintenanceAction",
    "MockLLM",
    "MockScenario",
    "PromptRole",
    "SemVer",
    "Skill",
    "SkillBank",
    "SkillCandidate",
    "TurnRequest",
    "VectorCacheMeta",
    "bump_patch",
    "evolve_turn",
    "hybrid_rank",
    "load_config",
    "parse_skill_md",
    "render_context",
    "select_topk_threshold",
    "serialize_skill_md",
    "slugify",
    "tokenize",
    "user_scope",
]
