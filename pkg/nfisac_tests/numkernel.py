from __future__ import annotations

import numpy as np
import pytest

from nfisac import (
    ContractViolationError,
    Stream,
    as_cmatrix,
    as_column,
    db_to_linear,
    dbm_to_watts,
    hermitian_eig,
    linear_to_db,
    pinv,
    psd_sqrt,
    stream_rng,
    svd,
    watts_to_dbm,
)


def _random_hermitian(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return a + a.conj().T


class Test__as_cmatrix:
    @staticmethod
    def test__rejects_non_finite_entries() -> None:
        """
        Every kernel input is checked once at the boundary; `nan` and
        `inf` never reach a decomposition.
        """

        with pytest.raises(ContractViolationError):
            _ = as_cmatrix([[1.0, np.nan]])
        with pytest.raises(ContractViolationError):
            _ = as_cmatrix([[np.inf]])

    @staticmethod
    def test__rejects_empty_and_high_rank_input() -> None:
        with pytest.raises(ContractViolationError):
            _ = as_cmatrix(np.zeros((0, 3)))
        with pytest.raises(ContractViolationError):
            _ = as_cmatrix(np.zeros((2, 2, 2)))

    @staticmethod
    def test__takes_vectors_as_columns() -> None:
        assert as_column([1, 2, 3]).shape == (3, 1)
        assert as_column([[1, 2, 3]]).shape == (3, 1)
        with pytest.raises(ContractViolationError):
            _ = as_column(np.ones((2, 2)))


class Test__hermitian_eig:
    @staticmethod
    def test__reconstructs_the_matrix() -> None:
        """
        `V diag(w) V^H` gives back the input, eigenvalues come sorted in
        descending order and the eigenvectors are orthonormal.
        """

        m = _random_hermitian(12, 1)
        values, vectors = hermitian_eig(m)

        assert np.all(np.diff(values) <= 0)
        assert np.allclose(vectors.conj().T @ vectors, np.eye(12), atol=1e-10)
        assert np.allclose((vectors * values) @ vectors.conj().T, m, atol=1e-9)

    @staticmethod
    def test__is_reproducible_under_degenerate_eigenvalues() -> None:
        """
        Repeated eigenvalues leave the eigenbasis free; the output must
        still be the same on every call.
        """

        m = np.diag([2.0, 2.0, 2.0, 1.0]).astype(np.complex128)
        first = hermitian_eig(m)
        second = hermitian_eig(m.copy())

        assert np.array_equal(first[0], second[0])
        assert np.array_equal(first[1], second[1])

    @staticmethod
    def test__canonicalizes_eigenvector_phases() -> None:
        _, vectors = hermitian_eig(_random_hermitian(6, 2))
        for j in range(6):
            column = vectors[:, j]
            pivot = column[np.nonzero(np.abs(column) > 1e-8 / np.sqrt(6))[0][0]]
            assert abs(pivot.imag) < 1e-12
            assert pivot.real > 0

    @staticmethod
    def test__rejects_non_hermitian_input() -> None:
        with pytest.raises(ContractViolationError):
            _ = hermitian_eig(np.array([[1.0, 1.0], [0.0, 1.0]]))


class Test__svd:
    @staticmethod
    def test__reconstructs_the_matrix() -> None:
        rng = np.random.default_rng(3)
        m = rng.standard_normal((4, 7)) + 1j * rng.standard_normal((4, 7))
        u, s, v = svd(m)

        assert u.shape == (4, 4)
        assert v.shape == (7, 7)
        assert np.all(np.diff(s) <= 0)
        assert np.allclose(u[:, :4] @ np.diag(s) @ v[:, :4].conj().T, m, atol=1e-10)


class Test__pinv:
    @staticmethod
    def test__satisfies_the_penrose_identities() -> None:
        rng = np.random.default_rng(4)
        m = rng.standard_normal((3, 6)) + 1j * rng.standard_normal((3, 6))
        p = pinv(m)

        assert np.allclose(m @ p @ m, m, atol=1e-10)
        assert np.allclose(p @ m @ p, p, atol=1e-10)
        assert np.allclose(m @ p, np.eye(3), atol=1e-10)

    @staticmethod
    def test__drops_singular_values_under_the_tolerance() -> None:
        m = np.diag([1.0, 1e-3])
        assert np.allclose(pinv(m, 1e-2), np.diag([1.0, 0.0]))


class Test__psd_sqrt:
    @staticmethod
    def test__squares_back_to_the_input() -> None:
        rng = np.random.default_rng(5)
        a = rng.standard_normal((5, 3)) + 1j * rng.standard_normal((5, 3))
        m = a @ a.conj().T
        root = psd_sqrt(m)

        assert np.allclose(root, root.conj().T)
        assert np.allclose(root @ root, m, atol=1e-9)


class Test__stream_rng:
    @staticmethod
    def test__streams_are_independent_of_creation_order() -> None:
        """
        A generator depends only on (seed, stream, indices), which is
        what lets sweep tasks run in any order or process.
        """

        late = [stream_rng(11, Stream.SYMBOLS, 5).standard_normal(3) for _ in range(2)]
        _ = [stream_rng(11, Stream.NOISE, i).standard_normal(10) for i in range(20)]
        again = stream_rng(11, Stream.SYMBOLS, 5).standard_normal(3)

        assert np.array_equal(late[0], late[1])
        assert np.array_equal(late[0], again)

    @staticmethod
    def test__streams_differ() -> None:
        a = stream_rng(0, Stream.NOISE, 0).standard_normal(4)
        b = stream_rng(0, Stream.SYMBOLS, 0).standard_normal(4)
        assert not np.array_equal(a, b)


class Test__units:
    @staticmethod
    def test__conversions_invert_each_other() -> None:
        values = np.array([-60.0, 0.0, 17.5, 30.0])
        assert np.allclose(linear_to_db(db_to_linear(values)), values)
        assert np.allclose(watts_to_dbm(dbm_to_watts(values)), values)

    @staticmethod
    def test__thirty_dbm_is_one_watt() -> None:
        assert float(dbm_to_watts(30.0)) == 1.0
        assert float(dbm_to_watts(-60.0)) == pytest.approx(1e-9)
