"""Structured errors for lesionrank (volume I/O, metrics, ranking, CLI)."""

from dataclasses import dataclass, fields
from typing import Any, Optional


@dataclass
class LesionRankError(Exception):
    """Base for all lesionrank errors. The CLI maps these to exit status 2."""
    message: str
    path: Optional[str] = None

    def __str__(self) -> str:
        loc = f"{self.path}: " if self.path else ""
        return f"{loc}{self.message}"

    def __reduce__(self):
        # Exception.args is empty under the dataclass __init__
        return (self.__class__, tuple(getattr(self, f.name) for f in fields(self)))


class FormatError(LesionRankError):
    """File header or payload is not a readable label volume."""
    pass


@dataclass
class LabelDomainError(LesionRankError):
    """A voxel holds a value outside {0, 1, 2, 3}."""
    value: Any = None
    index: Optional[int] = None


class GeometryMismatchError(LesionRankError):
    """Two volumes or masks do not share dims and spacing."""
    pass


class VolumeIOError(LesionRankError):
    """Filesystem failure while reading or writing a volume or table."""
    pass


class ContractViolation(LesionRankError):
    """A caller broke a precondition (empty HD95 input, non-finite ranks)."""
    pass


class IncompleteTableError(LesionRankError):
    """Metric table lacks one or more (team, subject, region, metric) tuples."""
    pass


class DuplicateRowError(LesionRankError):
    """Metric table holds the same (team, subject, region, metric) twice."""
    pass


class UnknownTeamError(LesionRankError):
    """Team identifier is not present in the rank table."""
    pass


class GenerationError(LesionRankError):
    """Phantom lesions could not be placed within the retry budget."""
    pass


class ConfigError(LesionRankError):
    """Config file is malformed or violates EvalConfig constraints."""
    pass


class UsageError(LesionRankError):
    """Bad command-line input (empty directory, unknown region or metric)."""
    pass
