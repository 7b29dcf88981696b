from __future__ import annotations

import math

import numpy as np
import pytest

from nfisac import (
    ArrayConfig,
    ContractViolationError,
    EchoBatch,
    GeometryError,
    MusicGrid,
    PolarCoord,
    TargetTruth,
    bistatic_tx,
    detect,
    detection_statistic,
    music_estimate,
    music_search,
    music_spectrum,
    noise_subspace,
    radar_precoder,
    rx_focusing,
    sample_covariance,
    synthesize_echo,
    synthesize_symbols,
    threshold_from_pfa,
)

_TX = ArrayConfig.half_wavelength(16, 0.01)
_RX = ArrayConfig.half_wavelength(64, 0.01)
_GRID = MusicGrid.uniform(2.0, 4.0, 0.02, -0.2, 0.2, 0.002)


def _on_grid_truth(i: int = 57, j: int = 133) -> TargetTruth:
    rx = PolarCoord(float(_GRID.ranges[i]), float(_GRID.angles[j]))
    return TargetTruth.from_rx(0.5 + 0.5j, rx, _TX, _RX)


def _echo(truth: TargetTruth, noise_power: float, snapshots: int = 32, seed: int = 0) -> EchoBatch:
    rng = np.random.default_rng(seed)
    f = radar_precoder(_TX, truth.tx, 1.0, "near")
    s = synthesize_symbols(rng, 1, snapshots)
    return synthesize_echo(f, s, truth, _TX, _RX, noise_power, rng)


class Test__TargetTruth:
    @staticmethod
    def test__both_views_describe_one_point() -> None:
        truth = _on_grid_truth()
        assert truth.offset == pytest.approx(0.2)
        assert bistatic_tx(truth.rx, truth.offset).range == pytest.approx(truth.tx.range)
        assert bistatic_tx(truth.rx, truth.offset).angle == pytest.approx(truth.tx.angle)

    @staticmethod
    def test__rejects_inconsistent_coordinates() -> None:
        truth = _on_grid_truth()
        with pytest.raises(GeometryError):
            _ = TargetTruth(truth.beta, truth.tx, PolarCoord(truth.rx.range + 0.1, truth.rx.angle), truth.offset)


class Test__synthesize_symbols:
    @staticmethod
    def test__symbols_are_white_and_unit_modulus() -> None:
        s = synthesize_symbols(np.random.default_rng(1), 2, 4000)
        assert np.allclose(np.abs(s), 1.0)
        assert np.allclose(s @ s.conj().T / 4000, np.eye(2), atol=0.1)

    @staticmethod
    def test__rejects_empty_blocks() -> None:
        with pytest.raises(ContractViolationError):
            _ = synthesize_symbols(np.random.default_rng(1), 0, 4)


class Test__synthesize_echo:
    @staticmethod
    def test__noise_free_echo_is_rank_one() -> None:
        truth = _on_grid_truth()
        echo = _echo(truth, 0.0)
        r_y = sample_covariance(echo)
        values = np.linalg.eigvalsh(r_y)

        assert echo.y.shape == (64, 32)
        assert echo.truth is truth
        assert values[-2] < 1e-10 * values[-1]

    @staticmethod
    def test__echo_lies_along_the_receive_response() -> None:
        truth = _on_grid_truth()
        y = _echo(truth, 0.0).y
        b = rx_focusing(_RX, truth.rx)
        residual = y - b @ (b.conj().T @ y) / 64
        assert np.linalg.norm(residual) < 1e-10 * np.linalg.norm(y)

    @staticmethod
    def test__noise_needs_a_generator() -> None:
        truth = _on_grid_truth()
        f = radar_precoder(_TX, truth.tx, 1.0, "near")
        with pytest.raises(ContractViolationError):
            _ = synthesize_echo(f, np.ones((1, 4)), truth, _TX, _RX, 0.1)


class Test__music:
    @staticmethod
    def test__noise_subspace_is_orthogonal_to_the_echo() -> None:
        truth = _on_grid_truth()
        q_n = noise_subspace(sample_covariance(_echo(truth, 0.0)))
        b = rx_focusing(_RX, truth.rx)

        assert q_n.shape == (64, 63)
        assert np.linalg.norm(q_n.conj().T @ b) < 1e-6

    @staticmethod
    def test__spectrum_peaks_on_the_target_cell() -> None:
        truth = _on_grid_truth()
        grid = _GRID.subgrid(slice(50, 65), slice(125, 141))
        q_n = noise_subspace(sample_covariance(_echo(truth, 0.0)))
        spectrum = music_spectrum(q_n, grid, _RX)

        assert spectrum.shape == grid.shape
        assert np.all(np.isfinite(spectrum))
        assert np.unravel_index(int(np.argmax(spectrum)), grid.shape) == (7, 8)

    @staticmethod
    def test__search_recovers_an_on_grid_target() -> None:
        """
        The coarse pass sees every tenth cell; the fine pass around its
        peak still lands on the exact noise-free cell.
        """

        truth = _on_grid_truth()
        estimate = music_search(sample_covariance(_echo(truth, 0.0)), _GRID, _TX, _RX)

        assert estimate is not None
        assert estimate.rx.range == pytest.approx(truth.rx.range)
        assert estimate.rx.angle == pytest.approx(truth.rx.angle)
        assert estimate.tx.range == pytest.approx(truth.tx.range)
        assert estimate.tx.angle == pytest.approx(truth.tx.angle)

    @staticmethod
    def test__polishing_recovers_an_off_grid_target() -> None:
        """
        A noise-free target between cells is located well inside a cell,
        where the plain search stops on the nearest cell.
        """

        rx = PolarCoord(float(_GRID.ranges[57]) + 0.37 * 0.02, float(_GRID.angles[133]) + 0.41 * 0.002)
        truth = TargetTruth.from_rx(0.5 + 0.5j, rx, _TX, _RX)
        r_y = sample_covariance(_echo(truth, 0.0))

        plain = music_search(r_y, _GRID, _TX, _RX)
        polished = music_search(r_y, _GRID, _TX, _RX, polish=True)

        assert plain is not None and polished is not None
        assert plain.rx.range == pytest.approx(_GRID.ranges[57])
        assert plain.rx.angle == pytest.approx(_GRID.angles[133])
        assert abs(polished.rx.range - rx.range) < 2e-4
        assert abs(polished.rx.angle - rx.angle) < 2e-5
        assert polished.tx.angle == pytest.approx(truth.tx.angle, abs=1e-4)

    @staticmethod
    def test__flat_spectrum_gives_no_estimate() -> None:
        assert music_estimate(np.ones(_GRID.shape), _GRID, _TX, _RX) is None

    @staticmethod
    def test__parabolic_refinement_stays_within_a_cell() -> None:
        truth = _on_grid_truth()
        q_n = noise_subspace(sample_covariance(_echo(truth, 1e-3)))
        spectrum = music_spectrum(q_n, _GRID, _RX)
        estimate = music_estimate(spectrum, _GRID, _TX, _RX, parabolic=True)

        assert estimate is not None
        assert abs(estimate.rx.angle - truth.rx.angle) <= 0.002

    @staticmethod
    def test__grid_rejects_bad_axes() -> None:
        with pytest.raises(ContractViolationError):
            _ = MusicGrid([2.0, 1.0], [0.0])
        with pytest.raises(ContractViolationError):
            _ = MusicGrid([1.0], [0.0, math.pi / 2])
        with pytest.raises(ContractViolationError):
            _ = MusicGrid.uniform(1.0, 2.0, 0.0, -0.1, 0.1, 0.1)


class Test__detection:
    @staticmethod
    def test__analytic_and_empirical_thresholds_agree() -> None:
        analytic = threshold_from_pfa(0.01, 4, method="analytic")
        empirical = threshold_from_pfa(0.01, 4, 200_000, np.random.default_rng(2))
        assert empirical == pytest.approx(analytic, rel=0.03)

    @staticmethod
    def test__single_snapshot_threshold_is_exponential() -> None:
        assert threshold_from_pfa(1e-3, 1, method="analytic") == pytest.approx(-math.log(1e-3))

    @staticmethod
    def test__noise_only_false_alarm_rate_is_calibrated() -> None:
        truth = _on_grid_truth()
        threshold = threshold_from_pfa(0.05, 4, method="analytic")
        rng = np.random.default_rng(3)
        alarms = 0
        for _ in range(4000):
            z = math.sqrt(0.5) * (rng.standard_normal((64, 4)) + 1j * rng.standard_normal((64, 4)))
            alarms += detect(EchoBatch(z, 1.0), _RX, truth.rx, threshold)

        assert 0.03 < alarms / 4000 < 0.07

    @staticmethod
    def test__strong_target_is_detected() -> None:
        truth = _on_grid_truth()
        echo = _echo(truth, 1e-3, snapshots=4)
        threshold = threshold_from_pfa(1e-3, 4, method="analytic")

        assert detection_statistic(echo, _RX, truth.rx) > 100 * threshold
        assert detect(echo, _RX, truth.rx, threshold)

    @staticmethod
    def test__calibration_rejects_bad_requests() -> None:
        with pytest.raises(ContractViolationError):
            _ = threshold_from_pfa(0.0, 4, method="analytic")
        with pytest.raises(ContractViolationError):
            _ = threshold_from_pfa(1e-3, 4, 1000, np.random.default_rng(0))
        with pytest.raises(ContractViolationError):
            _ = detection_statistic(_echo(_on_grid_truth(), 0.0), _RX, _on_grid_truth().rx)
