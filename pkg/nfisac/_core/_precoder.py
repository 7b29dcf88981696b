from __future__ import annotations

__all__ = ["AuxiliaryRow", "Precoder", "TradeoffWeight", "precoder_entries"]

import math
from dataclasses import dataclass
from typing import final

import numpy as np
from numpy.typing import ArrayLike

from .._utils import CMatrix, ContractViolationError, as_cmatrix


@final
@dataclass(frozen=True, eq=False)
class Precoder:
    """
    An N_t×K beamforming matrix and the power budget it was designed
    for. Design operations return precoders whose squared Frobenius norm
    equals `power_budget`.
    """

    entries: CMatrix
    power_budget: float

    def __post_init__(self, /) -> None:
        object.__setattr__(self, "entries", as_cmatrix(self.entries, name="precoder"))
        if not (math.isfinite(self.power_budget) and self.power_budget >= 0):
            raise ContractViolationError(f"power budget must be non-negative, got {self.power_budget}")

    @classmethod
    def normalized(cls, entries: ArrayLike, power_budget: float, /) -> Precoder:
        """
        Scales `entries` so that its squared Frobenius norm is
        `power_budget`.

        Examples
        --------
        >>> p = Precoder.normalized([[3.0], [4.0]], 1.0)
        >>> p.entries.ravel().real.tolist()
        [0.6, 0.8]
        """

        matrix = as_cmatrix(entries, name="precoder")
        norm = float(np.linalg.norm(matrix))
        if norm == 0.0:
            raise ContractViolationError("cannot normalize an all-zero precoder")

        return cls(math.sqrt(power_budget) * matrix / norm, power_budget)

    @property
    def n_antennas(self, /) -> int:
        return self.entries.shape[0]

    @property
    def n_streams(self, /) -> int:
        return self.entries.shape[1]

    @property
    def power(self, /) -> float:
        return float(np.linalg.norm(self.entries) ** 2)


@final
@dataclass(frozen=True, eq=False)
class AuxiliaryRow:
    """
    A 1×N_s row with unit norm that spreads a single radar beam over the
    communication streams.
    """

    entries: CMatrix

    def __post_init__(self, /) -> None:
        row = as_cmatrix(self.entries, name="auxiliary row")
        if row.shape[1] == 1 and row.shape[0] > 1:
            row = row.T
        if row.shape[0] != 1:
            raise ContractViolationError(f"auxiliary matrix must be a single row, got {row.shape}")
        if abs(float(np.linalg.norm(row)) - 1.0) > 1e-12:
            raise ContractViolationError("auxiliary row must have unit norm")
        object.__setattr__(self, "entries", row)


@final
@dataclass(frozen=True)
class TradeoffWeight:
    """
    Weight `eta` of the communication objective against the radar one.
    """

    eta: float

    def __post_init__(self, /) -> None:
        if not (math.isfinite(self.eta) and 0.0 <= self.eta <= 1.0):
            raise ContractViolationError(f"trade-off weight must lie in [0, 1], got {self.eta}")

    @property
    def is_endpoint(self, /) -> bool:
        return self.eta in (0.0, 1.0)


def precoder_entries(f: Precoder | ArrayLike, /) -> CMatrix:
    if isinstance(f, Precoder):
        return f.entries

    return as_cmatrix(f, name="precoder")
