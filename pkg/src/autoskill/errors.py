"""Exception types shared across the package."""


class AutoSkillError(Exception):
    """Base class for all package errors."""


# --- SKILL.md codec ---

class SkillCodecError(AutoSkillError):
    pass


class MissingFrontmatter(SkillCodecError):
    pass


class MissingRequiredKey(SkillCodecError):
    def __init__(self, key: str):
        self.key = key
        super().__init__(f"frontmatter is missing required key: {key}")


class MalformedVersion(SkillCodecError):
    pass


class MalformedUuid(SkillCodecError):
    pass


class InvariantViolation(AutoSkillError):
    """A Skill or SkillCandidate violates one of its stated invariants."""


# --- storage ---

class BankError(AutoSkillError):
    pass


class ScopeInvalid(BankError):
    pass


class ParseFailure(BankError):
    """A stored artifact could not be parsed; message names the file."""


class ShapeMismatch(BankError):
    pass


class InconsistentCache(BankError):
    """Vector-cache files disagree with each other; message names the file."""


# --- retrieval ---

class RetrievalError(AutoSkillError):
    pass


class DimensionMismatch(RetrievalError):
    pass


class ZeroVector(RetrievalError):
    pass


class EmptyInput(RetrievalError):
    pass


# --- gateway ---

class GatewayError(AutoSkillError):
    pass


class MissingSlot(GatewayError):
    def __init__(self, slot: str):
        self.slot = slot
        super().__init__(f"prompt template slot not provided: {slot}")


class Unparseable(GatewayError):
    pass


class InvalidAction(GatewayError):
    pass


class MergeWithoutTarget(GatewayError):
    pass


class MissingField(GatewayError):
    def __init__(self, field: str):
        self.field = field
        super().__init__(f"merge output is missing field: {field}")


class MissingHeading(GatewayError):
    def __init__(self, heading: str):
        self.heading = heading
        super().__init__(f"merged prompt is missing heading: {heading}")


class BackendFailure(GatewayError):
    pass
