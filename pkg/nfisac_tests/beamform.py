from __future__ import annotations

import math

import numpy as np
import pytest

from nfisac import (
    ArrayConfig,
    AuxiliaryRow,
    ChannelMatrix,
    ContractViolationError,
    ConvergenceWarning,
    PolarCoord,
    RankDeficiencyError,
    UserPlacement,
    beampattern_at,
    beampattern_far,
    beampattern_near,
    channel_matrix,
    design_precoder,
    far_steering,
    is_hermitian,
    ls_solution,
    near_focusing,
    opp_aux,
    radar_precoder,
    tradeoff_am,
    tradeoff_ls,
    tradeoff_objective,
    tx_covariance,
    zf_precoder,
)

_CFG = ArrayConfig.half_wavelength(32, 0.01)
_TARGET = PolarCoord(4.0, math.radians(30.0))
_ONES = AuxiliaryRow(np.ones((1, 2)) / math.sqrt(2.0))


def _channel(model: str = "near") -> ChannelMatrix:
    users = [
        UserPlacement(PolarCoord(5.0, 0.0), (PolarCoord(3.0, 0.4),)),
        UserPlacement(PolarCoord(15.0, -0.3), (PolarCoord(7.0, -0.7),)),
    ]
    return channel_matrix(_CFG, users, "near" if model == "near" else "far")


def _random_row(rng: np.random.Generator, k: int) -> AuxiliaryRow:
    row = rng.standard_normal((1, k)) + 1j * rng.standard_normal((1, k))
    return AuxiliaryRow(row / np.linalg.norm(row))


class Test__zf_precoder:
    @staticmethod
    def test__cancels_inter_user_interference() -> None:
        h = _channel()
        f = zf_precoder(h, 2.0)
        effective = h.entries @ f.entries

        assert f.power == pytest.approx(2.0)
        assert abs(effective[0, 1]) < 1e-9 * abs(effective[0, 0])
        assert abs(effective[1, 0]) < 1e-9 * abs(effective[1, 1])

    @staticmethod
    def test__holds_on_random_placements() -> None:
        rng = np.random.default_rng(17)
        for _ in range(100):
            k = int(rng.integers(1, 4))
            users = [UserPlacement(PolarCoord(rng.uniform(3.0, 20.0), rng.uniform(-1.0, 1.0))) for _ in range(k)]
            h = channel_matrix(_CFG, users, "near")
            power = rng.uniform(0.1, 10.0)
            f = zf_precoder(h, power)
            effective = h.entries @ f.entries
            diagonal = np.abs(np.diag(effective))

            assert abs(float(np.linalg.norm(f.entries)) ** 2 - power) <= 1e-12 * power
            assert np.all(np.abs(effective - np.diag(np.diag(effective))) <= 1e-8 * diagonal.max())

    @staticmethod
    def test__rejects_dependent_rows() -> None:
        u = UserPlacement(PolarCoord(5.0, 0.1))
        h = channel_matrix(_CFG, [u, u, UserPlacement(PolarCoord(8.0, -0.5))], "near")
        with pytest.raises(RankDeficiencyError) as info:
            _ = zf_precoder(h, 1.0)
        assert info.value.rows == (0, 1)

    @staticmethod
    def test__rejects_more_users_than_antennas() -> None:
        cfg = ArrayConfig.half_wavelength(2, 0.01)
        users = [UserPlacement(PolarCoord(5.0, a)) for a in (-0.5, 0.0, 0.5)]
        with pytest.raises(RankDeficiencyError):
            _ = zf_precoder(channel_matrix(cfg, users, "far"), 1.0)


class Test__radar_precoder:
    @staticmethod
    def test__matches_the_target_response() -> None:
        near = radar_precoder(_CFG, _TARGET, 4.0, "near")
        far = radar_precoder(_CFG, _TARGET, 4.0, "far")

        assert near.power == pytest.approx(4.0)
        assert np.allclose(near.entries, math.sqrt(4.0 / 32) * near_focusing(_CFG, _TARGET))
        assert np.allclose(far.entries, math.sqrt(4.0 / 32) * far_steering(_CFG, _TARGET.angle))


class Test__opp_aux:
    @staticmethod
    def test__is_unit_norm_and_optimal() -> None:
        """
        No unit row brings `F_rad F_u` closer to the communication
        precoder than the returned one.
        """

        f_com = zf_precoder(_channel(), 1.0)
        f_rad = radar_precoder(_CFG, _TARGET, 1.0, "near")
        best = opp_aux(f_rad, f_com)

        def distance(row: AuxiliaryRow) -> float:
            return float(np.linalg.norm(f_com.entries - f_rad.entries @ row.entries))

        rng = np.random.default_rng(0)
        assert float(np.linalg.norm(best.entries)) == pytest.approx(1.0)
        assert all(distance(best) <= distance(_random_row(rng, 2)) + 1e-12 for _ in range(200))

    @staticmethod
    def test__falls_back_to_the_first_stream_when_orthogonal() -> None:
        f_u = opp_aux(np.array([[1.0], [0.0]]), np.array([[0.0, 0.0], [1.0, 2.0]]))
        assert np.allclose(f_u.entries, [[1.0, 0.0]])

    @staticmethod
    def test__rejects_multi_column_radar_precoders() -> None:
        with pytest.raises(ContractViolationError):
            _ = opp_aux(np.eye(2), np.eye(2))


class Test__ls_solution:
    @staticmethod
    def test__closed_form_matches_the_pseudo_inverse() -> None:
        f_com = zf_precoder(_channel(), 1.0)
        f_rad = radar_precoder(_CFG, _TARGET, 1.0, "near")
        aux = opp_aux(f_rad, f_com)

        for eta in (0.0, 0.3, 0.8, 1.0):
            closed = ls_solution(f_com, f_rad, aux, eta)
            stacked = ls_solution(f_com, f_rad, aux, eta, method="pinv")
            assert np.allclose(closed, stacked, atol=1e-12)

    @staticmethod
    def test__collapses_to_the_weighted_average() -> None:
        rng = np.random.default_rng(23)
        for _ in range(100):
            com = rng.standard_normal((32, 2)) + 1j * rng.standard_normal((32, 2))
            rad = rng.standard_normal((32, 1)) + 1j * rng.standard_normal((32, 1))
            aux = _random_row(rng, 2)
            eta = rng.uniform(0.0, 1.0)
            expected = eta * com + (1.0 - eta) * rad @ aux.entries

            for fitted in (ls_solution(com, rad, aux, eta), ls_solution(com, rad, aux, eta, method="pinv")):
                assert np.linalg.norm(fitted - expected) <= 1e-12 * np.linalg.norm(expected)

    @staticmethod
    def test__rejects_weights_outside_the_unit_interval() -> None:
        f_com = zf_precoder(_channel(), 1.0)
        f_rad = radar_precoder(_CFG, _TARGET, 1.0, "near")
        with pytest.raises(ContractViolationError):
            _ = ls_solution(f_com, f_rad, opp_aux(f_rad, f_com), 1.5)


class Test__tradeoff_ls:
    @staticmethod
    def test__endpoints_are_the_pure_designs() -> None:
        f_com = zf_precoder(_channel(), 3.0)
        f_rad = radar_precoder(_CFG, _TARGET, 3.0, "near")
        aux = opp_aux(f_rad, f_com)

        comm = tradeoff_ls(f_com, f_rad, 1.0, 3.0)
        radar = tradeoff_ls(f_com, f_rad, 0.0, 3.0)

        assert np.allclose(comm.entries, f_com.entries)
        assert np.allclose(radar.entries, math.sqrt(3.0) * f_rad.entries @ aux.entries / np.linalg.norm(f_rad.entries))
        assert np.linalg.matrix_rank(radar.entries) == 1

    @staticmethod
    def test__meets_the_power_budget() -> None:
        f_com = zf_precoder(_channel(), 0.5)
        f_rad = radar_precoder(_CFG, _TARGET, 0.5, "near")
        for eta in np.linspace(0.0, 1.0, 11):
            assert tradeoff_ls(f_com, f_rad, float(eta), 0.5).power == pytest.approx(0.5)


class Test__tradeoff_am:
    @staticmethod
    def test__objective_never_increases() -> None:
        """
        Both half-steps solve their sub-problem exactly, so the traced
        objective is non-increasing from any start.
        """

        f_com = zf_precoder(_channel(), 1.0)
        f_rad = radar_precoder(_CFG, _TARGET, 1.0, "near")
        result = tradeoff_am(f_com, f_rad, 0.4, 1.0, 1e-10, 200, aux=_ONES)

        assert result.converged
        assert np.all(np.diff(result.objective_trace) <= 1e-12)
        assert result.precoder.power == pytest.approx(1.0)
        assert result.objective == pytest.approx(tradeoff_objective(result.precoder, result.aux, f_com, f_rad, 0.4))

    @staticmethod
    def test__agrees_with_the_least_squares_design() -> None:
        rng = np.random.default_rng(2024)
        for _ in range(100):
            users = [UserPlacement(PolarCoord(rng.uniform(3.0, 20.0), rng.uniform(-1.0, 1.0))) for _ in range(2)]
            target = PolarCoord(rng.uniform(3.0, 20.0), rng.uniform(-1.0, 1.0))
            eta = rng.uniform(0.05, 0.95)
            f_com = zf_precoder(channel_matrix(_CFG, users, "near"), 1.0)
            f_rad = radar_precoder(_CFG, target, 1.0, "near")

            am = tradeoff_am(f_com, f_rad, eta, 1.0, 1e-10, 200)
            ls = tradeoff_ls(f_com, f_rad, eta, 1.0)
            ls_objective = tradeoff_objective(ls, opp_aux(f_rad, f_com), f_com, f_rad, eta)

            assert am.converged
            assert abs(am.objective - ls_objective) <= 1e-4 * ls_objective
            assert np.all(np.diff(am.objective_trace) <= 1e-12)
            assert np.allclose(am.precoder.entries, ls.entries, rtol=0.0, atol=1e-9)

    @staticmethod
    def test__random_start_is_reproducible() -> None:
        f_com = zf_precoder(_channel(), 1.0)
        f_rad = radar_precoder(_CFG, _TARGET, 1.0, "near")
        a = tradeoff_am(f_com, f_rad, 0.6, 1.0, rng=np.random.default_rng(5))
        b = tradeoff_am(f_com, f_rad, 0.6, 1.0, rng=np.random.default_rng(5))
        assert a.objective_trace == b.objective_trace

    @staticmethod
    def test__endpoints_need_no_iteration() -> None:
        f_com = zf_precoder(_channel(), 1.0)
        f_rad = radar_precoder(_CFG, _TARGET, 1.0, "near")
        result = tradeoff_am(f_com, f_rad, 1.0, 1.0)

        assert result.iterations == 0
        assert np.allclose(result.precoder.entries, f_com.entries)

    @staticmethod
    def test__warns_at_the_iteration_limit() -> None:
        f_com = zf_precoder(_channel(), 1.0)
        f_rad = radar_precoder(_CFG, _TARGET, 1.0, "near")
        with pytest.warns(ConvergenceWarning):
            result = tradeoff_am(f_com, f_rad, 0.5, 1.0, 1e-300, 1, aux=_ONES)
        assert not result.converged
        assert result.iterations == 1

    @staticmethod
    def test__rejects_two_starting_points() -> None:
        f_com = zf_precoder(_channel(), 1.0)
        f_rad = radar_precoder(_CFG, _TARGET, 1.0, "near")
        with pytest.raises(ContractViolationError):
            _ = tradeoff_am(f_com, f_rad, 0.5, 1.0, aux=_ONES, rng=np.random.default_rng(0))


class Test__design_precoder:
    @staticmethod
    def test__communication_only_weight_is_zero_forcing() -> None:
        h = _channel()
        f = design_precoder(h, _CFG, _TARGET, 1.0, 1.0)
        assert np.allclose(f.entries, zf_precoder(h, 1.0).entries)

    @staticmethod
    def test__both_algorithms_meet_the_power_budget() -> None:
        for model in ("near", "far"):
            h = _channel(model)
            for algorithm in ("ls", "am"):
                f = design_precoder(h, _CFG, _TARGET, 2.0, 0.5, algorithm)
                assert f.power == pytest.approx(2.0)


class Test__beampattern:
    @staticmethod
    def test__far_pattern_peaks_at_the_steered_angle() -> None:
        a = far_steering(_CFG, 0.3)
        angles = np.linspace(-1.4, 1.4, 281)
        pattern = beampattern_far(a @ a.conj().T, _CFG, angles)

        assert float(beampattern_far(a @ a.conj().T, _CFG, [0.3])[0]) == pytest.approx(32.0**2)
        assert np.all(pattern <= 32.0**2 + 1e-9)
        assert np.all(pattern >= 0.0)

    @staticmethod
    def test__near_pattern_peaks_at_the_focus() -> None:
        a = near_focusing(_CFG, _TARGET)
        r_x = a @ a.conj().T

        assert beampattern_at(r_x, _CFG, _TARGET) == pytest.approx(32.0**2)
        grid = beampattern_near(r_x, _CFG, [2.0, 4.0, 8.0], [0.0, _TARGET.angle])
        assert grid.shape == (3, 2)
        assert grid[1, 1] == pytest.approx(grid.max())

    @staticmethod
    def test__near_pattern_rejects_endfire() -> None:
        with pytest.raises(ContractViolationError):
            _ = beampattern_near(np.eye(32), _CFG, [4.0], [math.pi / 2])

    @staticmethod
    def test__covariance_is_hermitian() -> None:
        f = design_precoder(_channel(), _CFG, _TARGET, 1.0, 0.5)
        r_x = tx_covariance(f)

        assert is_hermitian(r_x)
        assert float(np.real(np.trace(r_x))) == pytest.approx(1.0)
        with pytest.raises(ContractViolationError):
            _ = beampattern_far(np.triu(np.ones((32, 32))), _CFG, [0.0])

    @staticmethod
    def test__identity_covariance_radiates_evenly() -> None:
        pattern = beampattern_far(np.eye(32), _CFG, [-1.0, 0.0, 0.7])
        assert np.allclose(pattern, 32.0)
