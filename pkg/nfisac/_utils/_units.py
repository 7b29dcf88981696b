from __future__ import annotations

__all__ = ["db_to_linear", "dbm_to_watts", "linear_to_db", "watts_to_dbm"]

import numpy as np
from numpy.typing import ArrayLike

from ._linalg import RVector


def db_to_linear(db: ArrayLike, /) -> RVector:
    """
    Examples
    --------
    >>> float(db_to_linear(20.0))
    100.0
    """

    return np.power(10.0, np.asarray(db, dtype=np.float64) / 10.0)


def linear_to_db(ratio: ArrayLike, /) -> RVector:
    """
    Examples
    --------
    >>> round(float(linear_to_db(1000.0)), 9)
    30.0
    """

    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(ratio, dtype=np.float64))


def dbm_to_watts(dbm: ArrayLike, /) -> RVector:
    """
    Examples
    --------
    >>> float(dbm_to_watts(30.0))
    1.0
    """

    return db_to_linear(np.asarray(dbm, dtype=np.float64) - 30.0)


def watts_to_dbm(watts: ArrayLike, /) -> RVector:
    """
    Examples
    --------
    >>> float(watts_to_dbm(1.0))
    30.0
    """

    return linear_to_db(watts) + 30.0
