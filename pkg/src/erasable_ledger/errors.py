"""Exception hierarchy shared by all ledger modules."""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .core import VerificationReport


class LedgerError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgument(LedgerError, ValueError):
    pass


class OutOfRange(LedgerError, ValueError):
    pass


class DuplicateTransaction(LedgerError):
    pass


class NotFound(LedgerError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its argument otherwise
        return str(self.args[0]) if self.args else ""


class Forbidden(LedgerError):
    pass


class UnguardedScope(LedgerError):
    """A consensus-required chain has nobody left to endorse its deletion."""


class DuplicateVote(LedgerError):
    pass


class NotAnEndorser(LedgerError):
    pass


class CorruptLayout(LedgerError):
    pass


class IntegrityFailure(LedgerError):
    def __init__(self, message: str, report: VerificationReport):
        super().__init__(message)
        self.report = report


class ScenarioError(LedgerError):
    """Scenario failed validation. ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
