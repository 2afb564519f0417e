"""Exception types raised by the estimation pipeline."""


class ActivityHMMError(Exception):
    """Base class for all package errors."""

    code = "error"

    def to_dict(self) -> dict:
        return {"error": self.code, "message": str(self)}


class DimensionError(ActivityHMMError, ValueError):
    code = "dimension_mismatch"


class ConstraintViolation(ActivityHMMError, ValueError):
    """Parameters violate a feasibility constraint.

    ``kind`` is one of ``"tau"``, ``"epsilon"`` or ``"pi"``; ``state`` is the
    zero-based offending state (``None`` for ``pi``).
    """

    code = "constraint_violation"

    def __init__(self, message: str, kind: str, state: int | None = None, slack: float | None = None):
        super().__init__(message)
        self.kind = kind
        self.state = state
        self.slack = slack

    def to_dict(self) -> dict:
        d = super().to_dict()
        d.update(kind=self.kind, state=self.state, slack=self.slack)
        return d


class ImpossibleObservation(ActivityHMMError, ValueError):
    """The observed sequence has probability zero under the parameters."""

    code = "impossible_observation"

    def __init__(self, message: str, t: int):
        super().__init__(message)
        self.t = t

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["t"] = self.t
        return d


class InconsistentStatistics(ActivityHMMError, ValueError):
    """Sufficient statistics imply an event the activity profile forbids."""

    code = "inconsistent_statistics"


class InitializationError(ActivityHMMError, ValueError):
    code = "cannot_initialize"


class ConfigError(ActivityHMMError, ValueError):
    code = "invalid_config"
