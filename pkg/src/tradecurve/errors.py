"""Exception hierarchy shared by every stage of the pipeline.

Each error carries a stable ``code`` (the class name) so the CLI can map it
onto a machine-readable JSON payload without string matching.
"""

from __future__ import annotations

from typing import Any


class TradeCurveError(Exception):
    """Base class for all domain errors."""

    def __init__(self, message: str = "", **details: Any) -> None:
        super().__init__(message)
        self.message = message
        self.details = details

    @property
    def code(self) -> str:
        return type(self).__name__

    def to_dict(self) -> dict[str, Any]:
        payload: dict[str, Any] = {"error": self.code, "message": self.message}
        payload.update(self.details)
        return payload


# ingest
class UnreadableSource(TradeCurveError):
    pass


class SchemaMismatch(TradeCurveError):
    pass


class DuplicateKey(TradeCurveError):
    pass


class EmptyPanel(TradeCurveError):
    pass


# diversity
class NoExports(TradeCurveError):
    pass


class DegenerateRange(TradeCurveError):
    pass


# sigmoid fitting
class FitError(TradeCurveError):
    pass


class DegenerateInput(FitError):
    pass


class FlatData(FitError):
    pass


class NotConverged(FitError):
    """Iteration cap reached; ``fit`` holds the best parameters found."""

    def __init__(self, message: str, fit: Any, **details: Any) -> None:
        super().__init__(message, **details)
        self.fit = fit


# stages
class InvalidParams(TradeCurveError):
    pass


class StageUndefined(TradeCurveError):
    pass


# dynamics
class InsufficientData(TradeCurveError):
    pass


class AllYearsFailed(TradeCurveError):
    pass
