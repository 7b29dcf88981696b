from __future__ import annotations

__all__ = [
    "CMatrix",
    "RMatrix",
    "RVector",
    "as_cmatrix",
    "as_column",
    "hermitian_eig",
    "is_hermitian",
    "pinv",
    "psd_sqrt",
    "svd",
]

from typing import Any, TypeAlias

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike, NDArray

from ._errors import ContractViolationError

CMatrix: TypeAlias = NDArray[np.complex128]
RMatrix: TypeAlias = NDArray[np.float64]
RVector: TypeAlias = NDArray[np.float64]

_HERMITIAN_RTOL = 1e-10


def as_cmatrix(m: ArrayLike, /, *, name: str = "matrix") -> CMatrix:
    """
    Converts `m` to a 2-D complex double-precision matrix, checking that
    it is non-empty and that every entry is finite.

    One-dimensional input is taken as a column.

    Examples
    --------
    >>> as_cmatrix([1, 2]).shape
    (2, 1)
    >>> as_cmatrix([[1, 2, 3]]).dtype
    dtype('complex128')
    """

    array = np.asarray(m)
    if array.dtype.kind not in "biufc":
        raise ContractViolationError(f"{name} must be numeric, got dtype {array.dtype}")

    array = array.astype(np.complex128, copy=False)
    if array.ndim == 1:
        array = array.reshape(-1, 1)
    if array.ndim != 2:
        raise ContractViolationError(f"{name} must be 2-D, got {array.ndim}-D")
    if array.shape[0] == 0 or array.shape[1] == 0:
        raise ContractViolationError(f"{name} must have positive dimensions, got {array.shape}")
    if not np.all(np.isfinite(array)):
        raise ContractViolationError(f"{name} has non-finite entries")

    return array


def as_column(v: ArrayLike, /, *, name: str = "vector") -> CMatrix:
    """
    Converts `v` to an N×1 complex column.
    """

    column = as_cmatrix(v, name=name)
    if column.shape[0] == 1:
        column = column.reshape(-1, 1)
    if column.shape[1] != 1:
        raise ContractViolationError(f"{name} must be a vector, got shape {column.shape}")

    return column


def is_hermitian(m: CMatrix, /, *, rtol: float = _HERMITIAN_RTOL) -> bool:
    """
    Tells whether `m` is square and equal to its conjugate transpose
    within `rtol` relative to its Frobenius norm.

    Examples
    --------
    >>> is_hermitian(np.array([[1, 1j], [-1j, 2]]))
    True
    >>> is_hermitian(np.array([[1, 1j], [1j, 2]]))
    False
    """

    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False

    scale = float(np.linalg.norm(m))
    return float(np.linalg.norm(m - m.conj().T)) <= rtol * max(scale, np.finfo(float).tiny)


def hermitian_eig(m: ArrayLike, /) -> tuple[RVector, CMatrix]:
    """
    Eigen-decomposition of a Hermitian matrix.

    Eigenvalues are returned in descending order. Each eigenvector is
    phase-canonicalized so that its first non-negligible entry is real
    and positive; eigenvectors of (numerically) equal eigenvalues are
    ordered lexicographically by their canonical entries, which makes
    the output reproducible bit for bit.

    Examples
    --------
    >>> values, _ = hermitian_eig(np.diag([3.0, 1.0, 2.0]))
    >>> values.tolist()
    [3.0, 2.0, 1.0]
    """

    matrix = as_cmatrix(m)
    if matrix.shape[0] != matrix.shape[1]:
        raise ContractViolationError(f"hermitian_eig expects a square matrix, got {matrix.shape}")
    if not is_hermitian(matrix):
        raise ContractViolationError("hermitian_eig expects a Hermitian matrix")

    values, vectors = scipy.linalg.eigh(0.5 * (matrix + matrix.conj().T))
    values = values[::-1].astype(np.float64)
    vectors = _canonicalize_phases(vectors[:, ::-1].astype(np.complex128))

    order = _tie_break_order(values, vectors)
    return values[order], np.ascontiguousarray(vectors[:, order])


def svd(m: ArrayLike, /) -> tuple[CMatrix, RVector, CMatrix]:
    """
    Full singular value decomposition `m = U @ diag(s) @ V^H`.

    `U` and `V` are square unitary matrices; singular values are sorted
    in descending order.

    Examples
    --------
    >>> _, s, _ = svd(np.zeros((2, 3)))
    >>> s.tolist()
    [0.0, 0.0]
    """

    matrix = as_cmatrix(m)
    try:
        u, s, vh = scipy.linalg.svd(matrix, full_matrices=True, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        u, s, vh = scipy.linalg.svd(matrix, full_matrices=True, lapack_driver="gesvd")

    return u.astype(np.complex128), s.astype(np.float64), vh.conj().T.astype(np.complex128)


def pinv(m: ArrayLike, /, tol: float | None = None) -> CMatrix:
    """
    Moore-Penrose pseudo-inverse.

    Singular values not above `tol` are treated as zero. The default is
    `max(rows, cols) * sigma_max * eps`.

    Examples
    --------
    >>> pinv(np.zeros((2, 3))).shape
    (3, 2)
    >>> np.allclose(pinv(np.array([[2.0, 0.0], [0.0, 4.0]])), [[0.5, 0.0], [0.0, 0.25]])
    True
    """

    matrix = as_cmatrix(m)
    if tol is not None and not tol >= 0:
        raise ContractViolationError(f"pinv tolerance must be non-negative, got {tol}")

    u, s, v = svd(matrix)
    rows, cols = matrix.shape
    if tol is None:
        tol = max(rows, cols) * (float(s[0]) if s.size > 0 else 0.0) * float(np.finfo(np.float64).eps)

    keep = s > tol
    k = int(np.count_nonzero(keep))
    if k == 0:
        return np.zeros((cols, rows), dtype=np.complex128)

    return (v[:, :k] / s[:k]) @ u[:, :k].conj().T


def psd_sqrt(m: ArrayLike, /) -> CMatrix:
    """
    Hermitian square root of a positive semidefinite matrix; negative
    eigenvalues from round-off are clipped to zero.
    """

    values, vectors = hermitian_eig(m)
    roots = np.sqrt(np.clip(values, 0.0, None))
    return (vectors * roots) @ vectors.conj().T


def _canonicalize_phases(vectors: CMatrix, /) -> CMatrix:
    n = vectors.shape[0]
    threshold = 1e-8 / np.sqrt(n)
    for j in range(vectors.shape[1]):
        column = vectors[:, j]
        (candidates,) = np.nonzero(np.abs(column) > threshold)
        if candidates.size == 0:
            continue
        pivot = column[candidates[0]]
        vectors[:, j] = column * (abs(pivot) / pivot)

    return vectors


def _tie_break_order(values: RVector, vectors: CMatrix, /) -> NDArray[Any]:
    n = values.size
    scale = max(float(np.max(np.abs(values))), np.finfo(float).tiny)
    tie_tol = 1e-12 * scale

    order = np.arange(n)
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and values[start] - values[stop] <= tie_tol:
            stop += 1
        if stop - start > 1:
            block = vectors[:, start:stop]
            keys = np.round(np.concatenate([block.real, block.imag]), 12)
            # Primary key last for `lexsort`.
            local = np.lexsort(keys[::-1])
            order[start:stop] = start + local
        start = stop

    return order
