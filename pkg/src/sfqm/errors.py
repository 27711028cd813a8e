"""Exception hierarchy shared by all sfqm modules."""

from __future__ import annotations


class SFQMError(Exception):
    """Base class for every error raised by this package."""


class DomainError(SFQMError, ValueError):
    """An argument lies outside the domain of an operation (bad index, rank or time mismatch)."""


class NormalizationError(SFQMError, ValueError):
    """A labstate (or outcome table) is not normalized to unity."""

    def __init__(self, message: str, deficit: float):
        super().__init__(message)
        self.deficit = deficit


class ValidationError(SFQMError):
    """A stage operator failed a structural check."""

    def __init__(self, message: str, deviation: float = float("nan")):
        super().__init__(message)
        self.deviation = deviation


class ClassCollisionError(ValidationError):
    """The product rule collapsed the norm of a multi-signal basis state.

    Raised when two one-signal images overlap on a detector, so that the
    nilpotency of the creation operator kills part of the image.
    """

    def __init__(self, index: int, signals: tuple[int, ...], image_norm: float):
        name = "".join(f"A+{j}" for j in signals) + "|0)"
        super().__init__(
            f"class collision: image of {name} (basis index {index}) has norm {image_norm:.3e}",
            deviation=abs(1.0 - image_norm),
        )
        self.index = index
        self.signals = signals
        self.image_norm = image_norm


class ResourceError(SFQMError):
    """A computation would exceed a configured resource limit."""


class RankCapError(ResourceError, ValueError):
    pass


class PathBudgetError(ResourceError):
    def __init__(self, paths: int, budget: int):
        super().__init__(f"path sum needs {paths} paths per final index, budget is {budget}")
        self.paths = paths
        self.budget = budget


class ParseError(SFQMError):
    """Syntax or directive error in an experiment file; carries a 1-based location."""

    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"{line}:{column}: {message}")
        self.message = message
        self.line = line
        self.column = column
