"""Exception hierarchy shared across the package."""

from __future__ import annotations


class PRCoTError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(PRCoTError, ValueError):
    """Input data or configuration violates a documented invariant."""


class RenderError(PRCoTError):
    """A prompt template could not be rendered for the requested stage."""


class ContractError(PRCoTError):
    """A caller broke an operation's precondition."""


class BackendError(PRCoTError):
    """A completion backend failed to produce a result."""


class ReplayMissError(BackendError):
    """No recorded response exists for the request's cache key."""


class EmptyOutputError(BackendError):
    """The backend returned an empty completion."""


class MockScriptError(BackendError):
    """No scripted mock rule matched the request."""


class ScoringError(PRCoTError):
    """A transcript could not be scored (missing gold, unknown id, ...)."""


class JudgeParseError(PRCoTError):
    """The judge reply carried no parseable verdict, even after a re-ask."""


class EmptySummaryError(PRCoTError):
    """An efficiency summary was requested over no data."""
