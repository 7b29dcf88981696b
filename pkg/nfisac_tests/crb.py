from __future__ import annotations

import math
import warnings

import numpy as np
import pytest

from nfisac import (
    ArrayConfig,
    ContractViolationError,
    CrbConsistencyWarning,
    EstimationParams,
    FimBlocks,
    PolarCoord,
    TargetTruth,
    beampattern_at,
    crb_matrix,
    crb_range_known_angle,
    crb_report,
    crb_theta_known_range,
    fim_blocks,
    g_derivatives,
    g_matrix,
    near_focusing,
    snr_r,
)

_TX = ArrayConfig.half_wavelength(16, 0.01)
_RX = ArrayConfig.half_wavelength(16, 0.01)
_TRUTH = TargetTruth.from_tx(0.3 - 0.4j, PolarCoord(3.0, 0.3), _TX, _RX)


def _focused_covariance(p: PolarCoord, power: float = 1.0) -> np.ndarray:
    a = near_focusing(_TX, p)
    return power * (a @ a.conj().T) / _TX.n_elements


def _random_covariance(rng: np.random.Generator, n: int, snapshots: int) -> tuple[np.ndarray, np.ndarray]:
    x = rng.standard_normal((n, snapshots)) + 1j * rng.standard_normal((n, snapshots))
    r_x = x @ x.conj().T / snapshots
    return x, 0.5 * (r_x + r_x.conj().T)


def _random_truth(rng: np.random.Generator, cfg: ArrayConfig, ranges: tuple[float, float]) -> TargetTruth:
    beta = complex(rng.standard_normal(), rng.standard_normal())
    return TargetTruth.from_tx(beta, PolarCoord(rng.uniform(*ranges), rng.uniform(-1.0, 1.0)), cfg, cfg)


def _full_fim(blocks: FimBlocks) -> np.ndarray:
    return np.block([[blocks.J_phiphi, blocks.J_phibeta], [blocks.J_phibeta.T, blocks.J_betabeta]])


def _relative_error(actual: np.ndarray, expected: np.ndarray) -> float:
    return float(np.linalg.norm(actual - expected) / np.linalg.norm(expected))


class Test__g_matrix:
    @staticmethod
    def test__is_a_rank_one_round_trip() -> None:
        g = g_matrix(_TRUTH, _TX, _RX)
        assert g.shape == (16, 16)
        assert float(np.linalg.norm(g) ** 2) == pytest.approx(256.0)
        assert np.linalg.matrix_rank(g) == 1


class Test__g_derivatives:
    @staticmethod
    def test__analytic_matches_finite_differences() -> None:
        """
        The analytic form carries the receive coordinates along with the
        transmit ones; central differences over the bistatic relation
        must agree.
        """

        analytic = g_derivatives(_TRUTH, _TX, _RX)
        numeric = g_derivatives(_TRUTH, _TX, _RX, "finite_difference")
        for exact, approx in zip(analytic, numeric):
            assert np.linalg.norm(exact - approx) < 1e-5 * np.linalg.norm(exact)

    @staticmethod
    def test__analytic_matches_finite_differences_on_random_targets() -> None:
        rng = np.random.default_rng(11)
        for _ in range(50):
            truth = _random_truth(rng, _TX, (2.0, 10.0))
            analytic = g_derivatives(truth, _TX, _TX)
            numeric = g_derivatives(truth, _TX, _TX, "finite_difference")
            for exact, approx in zip(analytic, numeric):
                assert _relative_error(approx, exact) < 1e-5

    @staticmethod
    def test__rejects_unknown_modes() -> None:
        with pytest.raises(ContractViolationError):
            _ = g_derivatives(_TRUTH, _TX, _RX, "spline")  # pyright: ignore[reportArgumentType]


class Test__fim_blocks:
    @staticmethod
    def test__total_power_term_follows_the_beampattern() -> None:
        r_x = _focused_covariance(PolarCoord(5.0, -0.2), 2.0)
        g_r, g_t = g_derivatives(_TRUTH, _TX, _RX)
        blocks = fim_blocks(g_matrix(_TRUTH, _TX, _RX), g_r, g_t, r_x, _TRUTH.beta, 8, 0.5)

        assert blocks.terms.total == pytest.approx(16 * beampattern_at(r_x, _TX, _TRUTH.tx))
        assert blocks.terms.transmit_power == pytest.approx(2.0)
        assert np.allclose(blocks.J_phiphi, blocks.J_phiphi.T)

    @staticmethod
    def test__matches_the_fisher_information_of_the_echo() -> None:
        """
        For `Y = beta G X + W` with white noise of power `sigma^2`, the
        Fisher information is `2 / sigma^2 Re <dmu_i, dmu_j>` over the
        derivatives of the mean `beta G X`.
        """

        cfg = ArrayConfig.half_wavelength(4, 0.01)
        rng = np.random.default_rng(3)
        for _ in range(5):
            truth = _random_truth(rng, cfg, (0.5, 3.0))
            x, r_x = _random_covariance(rng, 4, 2)
            g = g_matrix(truth, cfg, cfg)
            g_r, g_t = g_derivatives(truth, cfg, cfg)
            blocks = fim_blocks(g, g_r, g_t, r_x, truth.beta, 2, 0.3)

            means = [truth.beta * g_r @ x, truth.beta * g_t @ x, g @ x, 1j * g @ x]
            brute = np.array([[2.0 / 0.3 * np.real(np.vdot(m_i, m_j)) for m_j in means] for m_i in means])
            scale = np.sqrt(np.outer(np.diag(brute), np.diag(brute)))

            assert np.max(np.abs(_full_fim(blocks) - brute) / scale) < 1e-8

    @staticmethod
    def test__rejects_non_positive_noise() -> None:
        g_r, g_t = g_derivatives(_TRUTH, _TX, _RX)
        with pytest.raises(ContractViolationError):
            _ = fim_blocks(g_matrix(_TRUTH, _TX, _RX), g_r, g_t, np.eye(16), _TRUTH.beta, 8, 0.0)


class Test__crb_matrix:
    @staticmethod
    def test__explicit_and_schur_forms_agree() -> None:
        with warnings.catch_warnings():
            warnings.simplefilter("error", CrbConsistencyWarning)
            report = crb_report(_TRUTH, _TX, _RX, _focused_covariance(_TRUTH.tx), 16, 0.1)

        assert report.status == "finite"
        assert 0 < report.crb_r < math.inf
        assert 0 < report.crb_theta < math.inf
        assert report.rcrb_r == pytest.approx(math.sqrt(report.crb_r))

    @staticmethod
    def test__schur_complement_inverts_the_full_information() -> None:
        rng = np.random.default_rng(5)
        for _ in range(20):
            truth = _random_truth(rng, _TX, (2.0, 10.0))
            _, r_x = _random_covariance(rng, 16, 16)
            g_r, g_t = g_derivatives(truth, _TX, _TX)
            blocks = fim_blocks(g_matrix(truth, _TX, _TX), g_r, g_t, r_x, truth.beta, 16, 0.1)
            report = crb_matrix(blocks)

            full = _full_fim(blocks)
            d = 1.0 / np.sqrt(np.diag(full))
            inverse = d[:, None] * np.linalg.inv(d[:, None] * full * d[None, :]) * d[None, :]

            assert report.status == "finite"
            assert _relative_error(report.crb_matrix, inverse[:2, :2]) < 1e-7

    @staticmethod
    def test__explicit_form_matches_on_random_targets() -> None:
        rng = np.random.default_rng(6)
        for _ in range(20):
            truth = _random_truth(rng, _TX, (2.0, 10.0))
            _, r_x = _random_covariance(rng, 16, 16)
            g_r, g_t = g_derivatives(truth, _TX, _TX)
            blocks = fim_blocks(g_matrix(truth, _TX, _TX), g_r, g_t, r_x, truth.beta, 16, 0.1)
            with warnings.catch_warnings():
                warnings.simplefilter("error", CrbConsistencyWarning)
                report = crb_matrix(blocks)

            terms = blocks.terms
            t = terms.cross
            m = np.real(terms.total * terms.derivative - np.outer(t, t.conj()))
            prefactor = 0.1 * terms.total / (2.0 * 16 * abs(truth.beta) ** 2)
            explicit = prefactor * np.linalg.inv(0.5 * (m + m.T))

            assert _relative_error(report.crb_matrix, explicit) < 1e-8

    @staticmethod
    def test__known_parameter_bounds_invert_the_reduced_information() -> None:
        """
        With one coordinate known, the bound on the other inverts its
        Fisher information after eliminating the reflection coefficient.
        """

        rng = np.random.default_rng(7)
        for _ in range(20):
            truth = _random_truth(rng, _TX, (2.0, 10.0))
            _, r_x = _random_covariance(rng, 16, 16)
            g_r, g_t = g_derivatives(truth, _TX, _TX)
            blocks = fim_blocks(g_matrix(truth, _TX, _TX), g_r, g_t, r_x, truth.beta, 16, 0.1)
            j_bb = blocks.J_betabeta[0, 0]

            def reduced(i: int, /) -> float:
                row = blocks.J_phibeta[i]
                return 1.0 / (blocks.J_phiphi[i, i] - float(row @ row) / j_bb)

            assert crb_range_known_angle(blocks) == pytest.approx(reduced(0), rel=1e-8)
            assert crb_theta_known_range(blocks) == pytest.approx(reduced(1), rel=1e-8)

    @staticmethod
    def test__scales_with_snapshots_noise_and_gain() -> None:
        r_x = np.eye(16) / 16
        base = crb_report(_TRUTH, _TX, _RX, r_x, 4, 0.1)
        longer = crb_report(_TRUTH, _TX, _RX, r_x, 8, 0.1)
        noisier = crb_report(_TRUTH, _TX, _RX, r_x, 4, 0.3)
        stronger = TargetTruth.from_tx(2 * _TRUTH.beta, _TRUTH.tx, _TX, _RX)

        assert np.allclose(longer.crb_matrix, base.crb_matrix / 2)
        assert np.allclose(noisier.crb_matrix, 3 * base.crb_matrix)
        assert np.allclose(crb_report(stronger, _TX, _RX, r_x, 4, 0.1).crb_matrix, base.crb_matrix / 4)

    @staticmethod
    def test__focusing_on_the_target_tightens_the_bound() -> None:
        on = crb_report(_TRUTH, _TX, _RX, _focused_covariance(_TRUTH.tx), 4, 0.1)
        off = crb_report(_TRUTH, _TX, _RX, _focused_covariance(PolarCoord(3.0, -0.6)), 4, 0.1)

        assert on.crb_r < off.crb_r
        assert on.crb_theta < off.crb_theta

    @staticmethod
    def test__no_illumination_gives_an_infinite_bound() -> None:
        report = crb_report(_TRUTH, _TX, _RX, np.zeros((16, 16)), 4, 0.1)
        assert report.status == "infinite"
        assert report.crb_r == math.inf
        assert report.crb_theta == math.inf

    @staticmethod
    def test__zero_reflection_gives_an_infinite_bound() -> None:
        silent = TargetTruth.from_tx(0.0, _TRUTH.tx, _TX, _RX)
        assert crb_report(silent, _TX, _RX, np.eye(16) / 16, 4, 0.1).status == "infinite"

    @staticmethod
    def test__known_nuisance_can_only_help() -> None:
        r_x = _focused_covariance(_TRUTH.tx)
        g_r, g_t = g_derivatives(_TRUTH, _TX, _RX)
        blocks = fim_blocks(g_matrix(_TRUTH, _TX, _RX), g_r, g_t, r_x, _TRUTH.beta, 4, 0.1)
        joint = crb_matrix(blocks)

        assert crb_theta_known_range(blocks) <= joint.crb_theta * (1 + 1e-9)
        assert crb_range_known_angle(blocks) <= joint.crb_r * (1 + 1e-9)


class Test__snr_r:
    @staticmethod
    def test__matches_the_report() -> None:
        report = crb_report(_TRUTH, _TX, _RX, np.eye(16) / 8, 10, 0.2)
        assert report.snr_r == pytest.approx(snr_r(_TRUTH.beta, 10, 2.0, 0.2))
        assert snr_r(_TRUTH.beta, 10, 2.0, 0.2) == pytest.approx(0.25 * 10 * 2.0 / 0.2)


class Test__EstimationParams:
    @staticmethod
    def test__reads_the_transmit_view() -> None:
        params = EstimationParams.from_truth(_TRUTH)
        assert (params.r_t, params.theta_t) == (3.0, 0.3)
        assert (params.beta_re, params.beta_im) == (0.3, -0.4)
