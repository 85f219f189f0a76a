"""Exception hierarchy shared by all fiberband modules.

Two families are distinguished because the command-line front end maps them
to different exit codes: :class:`ValidationError` for bad inputs (exit 2) and
:class:`NumericalError` for solver failures (exit 3).
"""

from __future__ import annotations

from typing import Any


class FiberbandError(Exception):
    """Base class for every error raised by fiberband."""


class ValidationError(FiberbandError, ValueError):
    """Raised when inputs violate a documented precondition."""


class NumericalError(FiberbandError, RuntimeError):
    """Raised when a numerical procedure fails to converge.

    Parameters
    ----------
    message:
        Human readable description.
    **context:
        Arbitrary diagnostic context, typically ``model``, ``k`` and ``j``.
        It is appended to the message and kept on :attr:`context`.
    """

    def __init__(self, message: str, **context: Any) -> None:
        self.context = dict(context)
        if context:
            detail = ", ".join(f"{key}={value!r}" for key, value in context.items())
            message = f"{message} [{detail}]"
        super().__init__(message)

    def with_context(self, **context: Any) -> "NumericalError":
        """Return a copy of this error with additional context merged in."""
        merged = {**context, **self.context}
        base = str(self).split(" [", 1)[0]
        err = type(self)(base, **merged)
        err.__cause__ = self
        return err


class ClusterError(NumericalError):
    """Raised when an eigenvalue that must be simple appears to be multiple."""
