"""errors.py
Exception hierarchy and report type shared by all capgram modules.
"""
from dataclasses import dataclass, field
from typing import List, Optional


class CapgramError(Exception):
    """Base class for every domain error raised by the toolkit."""


class ConfigError(CapgramError):
    pass


class GrammarError(CapgramError):
    pass


class DerivationError(CapgramError):
    pass


class CapacityError(CapgramError):
    pass


class NetError(CapgramError):
    pass


class FiringError(NetError):
    """A transition could not occur.

    `step` is the 1-based index inside an occurrence sequence (None for a single firing),
    `reason` is "insufficient input" or "capacity overflow".
    """

    def __init__(self, transition: str, reason: str, step: Optional[int] = None) -> None:
        self.transition = transition
        self.reason = reason
        self.step = step
        where = f"step {step}: " if step is not None else ""
        super().__init__(f"{where}transition {transition} not enabled ({reason})")


class PartitionError(NetError):
    pass


class TransformError(CapgramError):
    pass


class FileFormatError(CapgramError):
    def __init__(self, message: str, line: Optional[int] = None, path: Optional[str] = None) -> None:
        self.line = line
        self.path = path
        prefix = ""
        if path:
            prefix += f"{path}:"
        if line is not None:
            prefix += f"{line}:"
        super().__init__(f"{prefix} {message}" if prefix else message)


@dataclass
class ValidationReport:
    """Collected invariant violations; empty iff the checked object is well-formed."""

    violations: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, message: str) -> None:
        self.violations.append(message)

    def extend(self, other: "ValidationReport") -> None:
        self.violations.extend(other.violations)

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        if self.ok:
            return "valid"
        return "\n".join(f"- {v}" for v in self.violations)
