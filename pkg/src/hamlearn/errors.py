"""Exception hierarchy for hamlearn.

Every error carries the process exit code the CLI maps it to: 2 for
configuration and argument problems, 3 for numerical failures.
"""

from typing import Optional, Sequence


class HamlearnError(Exception):
    """Base class for all hamlearn errors."""

    exit_code = 3


class ArgumentError(HamlearnError, ValueError):
    """An argument violates an operation's precondition."""

    exit_code = 2


class DimensionError(ArgumentError):
    """Vector, state or basis dimensions do not agree."""


class ConfigError(ArgumentError):
    """Invalid settings or experiment configuration."""


class UnknownSystemError(HamlearnError, KeyError):
    """Requested builtin system or preset does not exist."""

    exit_code = 2

    def __init__(self, name: str, known: Sequence[str]):
        self.name = name
        self.known = tuple(known)
        super().__init__(name)

    def __str__(self) -> str:
        return f"unknown name {self.name!r}; expected one of: {', '.join(self.known)}"


class NumericalError(HamlearnError):
    """Base class for numerical failures."""


class CapacityError(NumericalError):
    """Index set or basis would exceed the supported size."""


class DomainError(NumericalError, ValueError):
    """A point lies outside the basis domain beyond the tolerance."""

    def __init__(self, message: str, coordinate: Optional[int] = None):
        self.coordinate = coordinate
        super().__init__(message)


class IntegrationError(NumericalError):
    """Time stepping produced non-finite values or left the evaluable region.

    ``trajectory`` holds the states computed before the failure, when the
    failing call was a whole-trajectory integration.
    """

    def __init__(
        self,
        message: str,
        time: float,
        step_index: Optional[int] = None,
        trajectory=None,
    ):
        self.time = time
        self.step_index = step_index
        self.trajectory = trajectory
        super().__init__(f"{message} (t={time:.6g}, step={step_index})")


class RankDeficiencyError(NumericalError):
    """A Gram matrix is numerically singular."""

    def __init__(self, message: str, null_directions: Sequence[tuple[int, ...]] = ()):
        self.null_directions = list(null_directions)
        super().__init__(message)


class DegenerateProblemError(NumericalError):
    """Every eigenvalue of a least-squares system fell below the cutoff."""


class EmptyDataError(NumericalError):
    """No data pairs remain to fit."""


class StageError(HamlearnError):
    """A failure inside an experiment stage, tagged with the stage name."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")

    @property
    def exit_code(self) -> int:  # type: ignore[override]
        if isinstance(self.cause, HamlearnError):
            return self.cause.exit_code
        if isinstance(self.cause, ValueError):
            return 2
        return 3
