"""Skill artifacts: version semantics, identity, and the SKILL.md codec.

The codec is deliberately hand-rolled rather than delegated to a YAML
library: the on-disk format is a fixed-order, byte-exact frontmatter
subset (plain or JSON-quoted scalars, block string lists) and the
serializer output must round-trip through the parser bit-for-bit,
including unknown keys preserved verbatim.
"""

from __future__ import annotations

import json
import re
import unicodedata
import uuid
from dataclasses import dataclass, field, replace

from .errors import (
    InvariantViolation,
    MalformedUuid,
    MalformedVersion,
    MissingFrontmatter,
    MissingRequiredKey,
)

_SEMVER_RE = re.compile(r"^(0|[1-9]\d*)\.(0|[1-9]\d*)\.(0|[1-9]\d*)$")

# Fixed frontmatter key order; unknown keys are appended verbatim after these.
_KNOWN_KEYS = ("id", "name", "version", "description", "tags", "triggers", "examples", "confidence")
_LIST_KEYS = ("tags", "triggers", "examples")

GOAL_HEADING = "# Goal"
CONSTRAINTS_HEADING = "# Constraints & Style"


@dataclass(frozen=True, order=True)
class SemVer:
    major: int
    minor: int
    patch: int

    def __str__(self) -> str:
        return f"{self.major}.{self.minor}.{self.patch}"

    @classmethod
    def parse(cls, text: str) -> "SemVer":
        m = _SEMVER_RE.match(text.strip())
        if not m:
            raise MalformedVersion(f"not a MAJOR.MINOR.PATCH version: {text!r}")
        return cls(int(m.group(1)), int(m.group(2)), int(m.group(3)))


def bump_patch(v: SemVer) -> SemVer:
    return SemVer(v.major, v.minor, v.patch + 1)


INITIAL_VERSION = SemVer(0, 1, 0)


@dataclass
class Skill:
    id: str
    name: str
    description: str = ""
    prompt: str = ""
    triggers: list[str] = field(default_factory=list)
    tags: list[str] = field(default_factory=list)
    examples: list[str] = field(default_factory=list)
    version: SemVer = INITIAL_VERSION
    confidence: float | None = None
    # Unknown frontmatter lines, kept verbatim for round-trip fidelity.
    extra_lines: list[str] = field(default_factory=list)

    def copy(self) -> "Skill":
        return replace(
            self,
            triggers=list(self.triggers),
            tags=list(self.tags),
            examples=list(self.examples),
            extra_lines=list(self.extra_lines),
        )


@dataclass
class SkillCandidate:
    name: str
    description: str = ""
    prompt: str = ""
    triggers: list[str] = field(default_factory=list)
    tags: list[str] = field(default_factory=list)
    examples: list[str] = field(default_factory=list)
    confidence: float = 0.0


def dedup(items: list[str]) -> list[str]:
    """Drop exact-string duplicates, keeping first occurrence order."""
    seen: set[str] = set()
    out: list[str] = []
    for item in items:
        if item not in seen:
            seen.add(item)
            out.append(item)
    return out


def validate_skill(skill: Skill) -> None:
    """Raise InvariantViolation naming the first violated Skill invariant."""
    try:
        uuid.UUID(skill.id)
    except (ValueError, AttributeError, TypeError):
        raise InvariantViolation(f"id is not a valid UUID: {skill.id!r}")
    if not skill.name:
        raise InvariantViolation("name must be non-empty")
    for label, items in (("triggers", skill.triggers), ("tags", skill.tags), ("examples", skill.examples)):
        if len(items) != len(set(items)):
            dupes = sorted({x for x in items if items.count(x) > 1})
            raise InvariantViolation(f"duplicate entries in {label}: {dupes}")
    if not skill.prompt:
        raise InvariantViolation("prompt must be non-empty")
    if GOAL_HEADING not in skill.prompt:
        raise InvariantViolation(f"prompt must contain a {GOAL_HEADING!r} heading")
    if skill.confidence is not None and not (0.0 <= skill.confidence <= 1.0):
        raise InvariantViolation(f"confidence out of [0,1]: {skill.confidence}")


def validate_candidate(candidate: SkillCandidate) -> None:
    if not candidate.name:
        raise InvariantViolation("candidate name must be non-empty")
    if not (0.0 <= candidate.confidence <= 1.0):
        raise InvariantViolation(f"candidate confidence out of [0,1]: {candidate.confidence}")


# --- slugs ---

def slugify(name: str, skill_id: str = "") -> str:
    """Directory-safe slug: lowercase, non-alphanumeric runs collapsed to '-'.

    Non-Latin letters are kept as-is. A name made only of punctuation
    falls back to the first 8 hex chars of the skill id.
    """
    out: list[str] = []
    for ch in name.lower():
        if ch.isalnum():
            out.append(ch)
        elif out and out[-1] != "-":
            out.append("-")
    slug = "".join(out).strip("-")
    if not slug:
        slug = skill_id.replace("-", "")[:8]
    return slug


# --- scalar encoding ---

_PLAIN_SCALAR_RE = re.compile(r"^(?![\[\"'#&*!|>%@`-])\S(.*\S)?$")


def _encode_scalar(value: str) -> str:
    if "\n" in value or not _PLAIN_SCALAR_RE.match(value):
        return json.dumps(value, ensure_ascii=False)
    return value


def _decode_scalar(raw: str) -> str:
    raw = raw.strip()
    if raw.startswith('"'):
        try:
            return json.loads(raw)
        except json.JSONDecodeError as exc:
            raise MissingFrontmatter(f"malformed quoted scalar: {raw!r}") from exc
    return raw


# --- codec ---

def serialize_skill_md(skill: Skill) -> str:
    """Emit the normalized SKILL.md document (UTF-8 text, LF endings).

    Precondition: skill satisfies the Skill invariants. Output key order
    is fixed; two serializations of equal skills are byte-identical.
    """
    lines = ["---"]
    lines.append(f"id: {_encode_scalar(skill.id)}")
    lines.append(f"name: {_encode_scalar(skill.name)}")
    lines.append(f"version: {skill.version}")
    desc = _encode_scalar(skill.description) if skill.description else '""'
    lines.append(f"description: {desc}")
    for key in _LIST_KEYS:
        items = getattr(skill, key)
        if not items:
            lines.append(f"{key}: []")
        else:
            lines.append(f"{key}:")
            lines.extend(f"  - {_encode_scalar(item)}" for item in items)
    if skill.confidence is not None:
        lines.append(f"confidence: {float(skill.confidence)!r}")
    lines.extend(skill.extra_lines)
    lines.append("---")
    return "\n".join(lines) + "\n\n" + skill.prompt


def parse_skill_md(text: str) -> Skill:
    """Parse a SKILL.md document into a Skill.

    Metadata comes from the leading ``---`` frontmatter block; the prompt
    is the full body after the closing ``---``, trimmed of one leading
    newline. Unknown frontmatter keys survive round-trips verbatim.
    """
    if not text.startswith("---\n"):
        raise MissingFrontmatter("document does not begin with a '---' frontmatter block")
    all_lines = text.split("\n")
    close = None
    for idx in range(1, len(all_lines)):
        if all_lines[idx] == "---":
            close = idx
            break
    if close is None:
        raise MissingFrontmatter("frontmatter block is never closed")
    header_lines = all_lines[1:close]
    body = "\n".join(all_lines[close + 1:])
    if body.startswith("\n"):
        body = body[1:]

    fields: dict[str, object] = {}
    extra_lines: list[str] = []
    i = 0
    while i < len(header_lines):
        line = header_lines[i]
        m = re.match(r"^([A-Za-z0-9_-]+):(.*)$", line)
        if not m:
            raise MissingFrontmatter(f"unparseable frontmatter line: {line!r}")
        key, rest = m.group(1), m.group(2)
        item_lines = []
        j = i + 1
        while j < len(header_lines) and header_lines[j].startswith("  - "):
            item_lines.append(header_lines[j])
            j += 1
        if key not in _KNOWN_KEYS:
            extra_lines.append(line)
            extra_lines.extend(item_lines)
        elif key in _LIST_KEYS:
            if rest.strip() == "[]" or (not rest.strip() and not item_lines):
                fields[key] = []
            elif item_lines:
                fields[key] = [_decode_scalar(l[4:]) for l in item_lines]
            else:
                raise MissingFrontmatter(f"list key {key!r} has a non-list value: {rest!r}")
        else:
            fields[key] = _decode_scalar(rest)
        i = j

    for required in ("id", "name", "version"):
        if required not in fields:
            raise MissingRequiredKey(required)

    skill_id = str(fields["id"])
    try:
        uuid.UUID(skill_id)
    except ValueError as exc:
        raise MalformedUuid(f"id is not a valid UUID: {skill_id!r}") from exc
    version = SemVer.parse(str(fields["version"]))

    confidence: float | None = None
    if "confidence" in fields:
        try:
            confidence = float(str(fields["confidence"]))
        except ValueError as exc:
            raise MissingFrontmatter(f"malformed confidence: {fields['confidence']!r}") from exc

    return Skill(
        id=skill_id,
        name=str(fields["name"]),
        description=str(fields.get("description", "")),
        prompt=body,
        triggers=list(fields.get("triggers", [])),  # type: ignore[arg-type]
        tags=list(fields.get("tags", [])),  # type: ignore[arg-type]
        examples=list(fields.get("examples", [])),  # type: ignore[arg-type]
        version=version,
        confidence=confidence,
        extra_lines=extra_lines,
    )


def normalize_text(text: str) -> str:
    """NFC-normalize user-facing text before comparisons."""
    return unicodedata.normalize("NFC", text)
