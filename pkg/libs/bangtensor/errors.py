"""
Error Types
Exception hierarchy raised by the bangtensor engine
"""
from typing import Any, List, Optional, Sequence

from pydantic import BaseModel


class SourceSpan(BaseModel):
    """Location of a token in source text (offsets are character offsets)"""

    begin: int
    end: int
    line: int
    column: int

    def __str__(self) -> str:
        return f"line {self.line}, column {self.column}"


class BangTensorError(Exception):
    """Base class for every error raised by the engine"""


class IllFormedError(BangTensorError):
    """A term failed the well-formedness conditions"""

    def __init__(self, violations: Sequence[Any]):
        self.violations = list(violations)
        summary = "; ".join(str(v) for v in self.violations)
        super().__init__(f"ill-formed: {summary}")


class IllFormedResultError(BangTensorError):
    """An operation produced a term that is not well-formed"""

    def __init__(self, message: str, violations: Sequence[Any] = ()):
        self.violations = list(violations)
        super().__init__(message)


class NotFoundError(BangTensorError):
    """A directed edge or name does not occur in the term"""


class UnknownBoxError(BangTensorError):
    """A !-box operation targets a box that does not occur in the term"""

    def __init__(self, box: str, step: Optional[int] = None):
        self.box = box
        self.step = step
        where = f" at step {step}" if step is not None else ""
        super().__init__(f"unknown box {box}{where}")


class NameClashError(BangTensorError):
    """A renaming target is already in use"""


class NotFreeError(BangTensorError):
    """A renaming addressed a bound edge name"""


class ParseError(BangTensorError):
    """Malformed input text"""

    def __init__(
        self,
        message: str,
        span: SourceSpan,
        expected: Optional[List[str]] = None,
        found: Optional[str] = None,
        source: Optional[str] = None,
    ):
        self.span = span
        self.expected = sorted(expected or [])
        self.found = found
        self.source = source
        prefix = f"{source}: " if source else ""
        super().__init__(f"{prefix}{span}: {message}")


class IncompleteInstantiation(BangTensorError):
    """An instantiation sequence leaves boxes or groups behind"""


class MissingAssignment(BangTensorError):
    """A model has no array for a generator at a given arity"""


class ArityMismatch(BangTensorError):
    """A generator occurrence does not match its declared or assigned arity"""


class ModelFileError(BangTensorError):
    """A model description is inconsistent"""


# =============================================================================
# Proof checking
# =============================================================================


class RuleError(BangTensorError):
    """A proof step could not be justified"""

    def __init__(self, message: str, step: Optional[str] = None):
        self.step = step
        super().__init__(message)


class FixedBoxViolation(RuleError):
    """A !-box operation targeted a box fixed by an enclosing induction"""


class ClaimMismatch(RuleError):
    """The computed conclusion is not equivalent to the claimed equation"""


class UnknownReference(RuleError):
    """A justification names a step, lemma or axiom that does not exist"""


class IncompatibleEquation(RuleError):
    """The two sides of an equation do not have compatible boundaries"""


class InductionError(RuleError):
    """An induction block is malformed"""
