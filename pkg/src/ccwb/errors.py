"""Exception hierarchy.  Everything the CLI reports as a domain error derives
from :class:`CcwbError`."""

from __future__ import annotations


class CcwbError(Exception):
    pass


class UnknownArchitectureError(CcwbError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class UnknownRegisterError(CcwbError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class CostTableError(CcwbError, ValueError):
    pass


class MissingTableEntryError(CcwbError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class SignatureSyntaxError(CcwbError, ValueError):
    def __init__(self, message: str, position: int, text: str = ""):
        super().__init__(f"{message} at position {position}")
        self.position = position
        self.text = text


class UnknownTypeError(SignatureSyntaxError):
    pass


class CorpusError(CcwbError, ValueError):
    pass


class UnknownConventionError(CcwbError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class ConventionSyntaxError(CcwbError, ValueError):
    pass


class InvariantViolationError(CcwbError, ValueError):
    """A convention document or value breaks one of the convention rules.

    ``rule`` names the violated rule (``"allocatable"``, ``"conflict"``, ...).
    """

    def __init__(self, rule: str, message: str):
        super().__init__(f"{rule}: {message}")
        self.rule = rule


class UnsupportedWidthError(CcwbError, ValueError):
    pass


class EmptySpaceError(CcwbError, ValueError):
    pass


class UnknownHotTypeError(CcwbError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class ReportError(CcwbError, ValueError):
    pass
