from __future__ import annotations

import random
import uuid

import pytest

from autoskill.bank import SkillBank
from autoskill.config import AppConfig
from autoskill.skill import SemVer, Skill, SkillCandidate

WORDS = [
    "rewrite", "translate", "summarize", "python", "excel", "email", "formal",
    "professional", "markdown", "table", "diagram", "poem", "selenium", "script",
    "automation", "recipe", "resume", "report", "outline", "grammar", "tone",
]


def make_skill(rng: random.Random | None = None, **overrides) -> Skill:
    rng = rng or random.Random(0)
    name = " ".join(rng.sample(WORDS, 3))
    skill = Skill(
        id=str(uuid.UUID(int=rng.getrandbits(128), version=4)),
        name=name,
        description=" ".join(rng.sample(WORDS, 5)),
        prompt="# Goal\n" + " ".join(rng.sample(WORDS, 4)),
        triggers=rng.sample(WORDS, 2),
        tags=rng.sample(WORDS, 2),
        examples=[],
        version=SemVer(0, 1, rng.randrange(4)),
    )
    for key, value in overrides.items():
        setattr(skill, key, value)
    return skill


def make_candidate(rng: random.Random | None = None, **overrides) -> SkillCandidate:
    rng = rng or random.Random(0)
    candidate = SkillCandidate(
        name=" ".join(rng.sample(WORDS, 3)),
        description=" ".join(rng.sample(WORDS, 5)),
        prompt="# Goal\n" + " ".join(rng.sample(WORDS, 4)),
        triggers=rng.sample(WORDS, 2),
        tags=rng.sample(WORDS, 2),
        examples=[],
        confidence=0.9,
    )
    for key, value in overrides.items():
        setattr(candidate, key, value)
    return candidate


def seeded_id_factory(seed: int = 7):
    rng = random.Random(seed)
    return lambda: str(uuid.UUID(int=rng.getrandbits(128), version=4))


@pytest.fixture
def bank(tmp_path) -> SkillBank:
    return SkillBank(tmp_path / "SkillBank")


@pytest.fixture
def config(tmp_path) -> AppConfig:
    cfg = AppConfig(bank_root=tmp_path / "SkillBank")
    cfg.id_factory = seeded_id_factory()
    return cfg
