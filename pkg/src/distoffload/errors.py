"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class OffloadError(Exception):
    """Base class for every error raised by this package."""


class InvalidGraphError(OffloadError):
    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations)
        super().__init__(f"invalid call graph: {lines}")


class UnknownNodeError(OffloadError, KeyError):
    def __str__(self) -> str:
        return f"unknown node id: {self.args[0]!r}"


class DomainError(OffloadError, ValueError):
    """A numeric argument lies outside the domain of a formula."""


class InsufficientFleetError(OffloadError):
    pass


class UnknownVmError(OffloadError):
    pass


class UnhostedVmError(OffloadError):
    pass


class SplitMismatchError(OffloadError, ValueError):
    pass


class MissingInputError(OffloadError):
    def __init__(self, missing):
        self.missing = list(missing)
        super().__init__("missing inputs: " + ", ".join(self.missing))


class ScenarioError(OffloadError):
    """Parse or validation failure while loading a scenario or graph file.

    ``problems`` holds one message per violation, each prefixed with the
    location (``line N`` or a dotted field path) it refers to.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("\n".join(self.problems))
