"""Exception types shared across the package."""

from __future__ import annotations


class ContractError(ValueError):
    """An input violated a documented precondition."""


class ConvergenceError(RuntimeError):
    """An iterative routine ran out of budget.

    ``best`` holds the last usable estimate and ``achieved`` the residual or
    gap that was reached, so callers can decide whether to accept it.
    """

    def __init__(self, message: str, best=None, achieved: float | None = None):
        super().__init__(message)
        self.best = best
        self.achieved = achieved


class StructureError(RuntimeError):
    """Structure extraction could not proceed (precondition or missing block)."""

    def __init__(self, message: str, reason: str, achieved: float | None = None,
                 required: float | None = None):
        super().__init__(message)
        self.reason = reason
        self.achieved = achieved
        self.required = required


class DecouplingFailure(RuntimeError):
    """decouple() gave up; ``reason`` is one of
    'precondition-largeness', 'no-witness', 'selection-failed'."""

    def __init__(self, reason: str, detail: str = "", attempts: int = 0,
                 diagnostics: dict | None = None):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason
        self.detail = detail
        self.attempts = attempts
        self.diagnostics = diagnostics or {}
