from __future__ import annotations

__all__ = [
    "ConfigError",
    "ContractViolationError",
    "ConvergenceWarning",
    "CrbConsistencyWarning",
    "FresnelValidityWarning",
    "GeometryError",
    "NfisacError",
    "NfisacWarning",
    "RandomizationWarning",
    "RankDeficiencyError",
    "UnsupportedConfigurationError",
]

from collections.abc import Sequence
from typing import Final, final


class NfisacError(Exception):
    """
    Base class of every error raised by this package.
    """


@final
class ContractViolationError(NfisacError, ValueError):
    """
    An argument breaks the precondition of the operation it was passed
    to (wrong shape, non-Hermitian input, non-finite entries...).
    """


@final
class UnsupportedConfigurationError(NfisacError, ValueError):
    """
    The operation is not defined for the given configuration.
    """


@final
class GeometryError(NfisacError, ValueError):
    """
    A bistatic coordinate conversion has no geometric solution.
    """


@final
class RankDeficiencyError(NfisacError, ValueError):
    """
    A channel matrix does not have full row rank.

    `rows` holds the indices of the rows that take part in the linear
    dependency.
    """

    rows: Final[tuple[int, ...]]

    def __init__(self, rows: Sequence[int], /) -> None:
        self.rows = tuple(rows)
        super().__init__(f"channel matrix is rank deficient in rows {list(self.rows)}")


@final
class ConfigError(NfisacError, ValueError):
    """
    A scenario configuration value is missing, malformed or out of
    range. `path` is the dotted key path, e.g. `users[1].angle_deg`.
    """

    path: Final[str]
    detail: Final[str]

    def __init__(self, path: str, message: str, /) -> None:
        self.path = path
        self.detail = message
        super().__init__(f"{path}: {message}")


class NfisacWarning(UserWarning):
    """
    Base class of every warning emitted by this package.
    """


@final
class FresnelValidityWarning(NfisacWarning):
    """
    A location lies closer than the lower Fresnel boundary, where the
    phase-only near-field model loses accuracy.
    """


@final
class ConvergenceWarning(NfisacWarning):
    """
    An iterative method stopped at its iteration limit.
    """


@final
class CrbConsistencyWarning(NfisacWarning):
    """
    Two evaluations of the same bound disagree beyond round-off.
    """


@final
class RandomizationWarning(NfisacWarning):
    """
    Rank-one recovery of a relaxed solution found no feasible candidate.
    """
