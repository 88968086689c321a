"""Exception hierarchy; every class carries the CLI exit code it maps to."""
from __future__ import annotations

from typing import Sequence


class SieveLabError(Exception):
    exit_code: int = 1


class DomainError(SieveLabError, ValueError):
    """Argument outside the domain of an operation (or a dimension mismatch)."""

    exit_code = 2


class DegeneracyError(DomainError):
    """A subset sum lands on a boundary (e.g. d = sqrt(n)) where the count is undefined."""


class ConfigurationError(SieveLabError):
    """Missing parameter, dangling catalog reference or malformed catalog file."""

    exit_code = 2


class SpecificationError(SieveLabError):
    """An integral whose weight is not bounded on its region, or whose box is unbounded."""

    exit_code = 2


class ResourceError(SieveLabError):
    exit_code = 2


class AmbiguityError(SieveLabError):
    """More than one finest subregion matches a parameter point."""

    exit_code = 3

    def __init__(self, message: str, matches: Sequence[str]):
        super().__init__(f"{message}: {', '.join(matches)}")
        self.matches = list(matches)


VERIFICATION_FAILED = 4
