from __future__ import annotations

import math

import numpy as np
import pytest

from nfisac import (
    ArrayConfig,
    ChannelMatrix,
    ContractViolationError,
    PolarCoord,
    Precoder,
    UserPlacement,
    channel_matrix,
    far_channel,
    far_steering,
    field_boundaries,
    near_channel,
    near_focusing,
    sample_gains,
    sum_rate,
    user_sinr,
    user_sinr_covariance,
)

_CFG = ArrayConfig.half_wavelength(32, 0.01)


def _correlation(a: np.ndarray, b: np.ndarray) -> float:
    return abs(np.vdot(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b))


def _random_instance(seed: int, users: int = 2) -> tuple[ChannelMatrix, np.ndarray]:
    rng = np.random.default_rng(seed)
    placements = [
        UserPlacement(
            PolarCoord(float(rng.uniform(3.0, 20.0)), float(rng.uniform(-1.0, 1.0))),
            (PolarCoord(float(rng.uniform(2.0, 30.0)), float(rng.uniform(-1.0, 1.0))),),
            complex(rng.standard_normal(), rng.standard_normal()),
            (complex(rng.standard_normal(), rng.standard_normal()),),
        )
        for _ in range(users)
    ]
    f = rng.standard_normal((32, users)) + 1j * rng.standard_normal((32, users))
    return channel_matrix(_CFG, placements, "near"), f


class Test__near_channel:
    @staticmethod
    def test__line_of_sight_only_is_the_focusing_vector() -> None:
        p = PolarCoord(6.0, 0.2)
        h = near_channel(_CFG, UserPlacement(p))
        assert np.allclose(h, near_focusing(_CFG, p))
        assert float(np.linalg.norm(h) ** 2) == pytest.approx(32.0)

    @staticmethod
    def test__sums_the_paths() -> None:
        los, s1, s2 = PolarCoord(6.0, 0.2), PolarCoord(3.0, -0.5), PolarCoord(12.0, 0.8)
        h = near_channel(_CFG, UserPlacement(los, (s1, s2)))
        expected = near_focusing(_CFG, los) + math.sqrt(0.5) * (near_focusing(_CFG, s1) + near_focusing(_CFG, s2))
        assert np.allclose(h, expected)

    @staticmethod
    def test__separates_users_in_distance() -> None:
        """
        Two broadside users at 5 m and 15 m are told apart by the
        spherical wavefront; the plane-wave model sees one direction.
        """

        cfg = ArrayConfig.half_wavelength(256, 0.01)
        near = [near_channel(cfg, UserPlacement(PolarCoord(r, 0.0))) for r in (5.0, 15.0)]
        far = [far_channel(cfg, UserPlacement(PolarCoord(r, 0.0))) for r in (5.0, 15.0)]

        assert _correlation(near[0], near[1]) < 0.9
        assert _correlation(far[0], far[1]) == pytest.approx(1.0)

    @staticmethod
    def test__converges_to_the_far_channel() -> None:
        _, d_f = field_boundaries(_CFG)
        u = UserPlacement(
            PolarCoord(100.0 * d_f, 0.3),
            (PolarCoord(150.0 * d_f, -0.6), PolarCoord(200.0 * d_f, 1.1)),
            1.0,
            (0.1 + 0.05j, -0.08j),
        )
        phase = np.angle(near_channel(_CFG, u) * far_channel(_CFG, u).conj())
        assert np.max(np.abs(phase)) < 1e-2


class Test__far_channel:
    @staticmethod
    def test__line_of_sight_only_is_the_scaled_steering_vector() -> None:
        u = UserPlacement(PolarCoord(9.0, -0.4), los_gain=0.5j)
        assert np.allclose(far_channel(_CFG, u), 0.5j * far_steering(_CFG, -0.4))


class Test__sample_gains:
    @staticmethod
    def test__is_deterministic_per_seed() -> None:
        u = UserPlacement(PolarCoord(5.0, 0.0), (PolarCoord(4.0, 0.1), PolarCoord(8.0, -0.3)))
        a = sample_gains(np.random.default_rng(9), u, 0.01)
        b = sample_gains(np.random.default_rng(9), u, 0.01)
        assert a.los_gain == b.los_gain
        assert a.scatter_gains == b.scatter_gains

    @staticmethod
    def test__follows_the_free_space_law() -> None:
        near = sample_gains(np.random.default_rng(1), UserPlacement(PolarCoord(5.0, 0.0)), 0.01)
        far = sample_gains(np.random.default_rng(1), UserPlacement(PolarCoord(10.0, 0.0)), 0.01)

        assert abs(near.los_gain) == pytest.approx(0.01 / (4 * math.pi * 5.0))
        assert abs(far.los_gain) == pytest.approx(abs(near.los_gain) / 2)

    @staticmethod
    def test__scattering_gains_are_zero_mean() -> None:
        """
        Scattering gains are circularly-symmetric Gaussian with standard
        deviation `0.1 |alpha_0|` per component.
        """

        n = 10_000
        u = UserPlacement(PolarCoord(5.0, 0.0), (PolarCoord(4.0, 0.1),) * n)
        drawn = sample_gains(np.random.default_rng(2), u, 0.01)
        gains = np.array(drawn.scatter_gains)
        sigma = 0.1 * abs(drawn.los_gain)

        assert abs(gains.real.mean()) < 5 * sigma / math.sqrt(n)
        assert abs(gains.imag.mean()) < 5 * sigma / math.sqrt(n)
        assert gains.real.std() == pytest.approx(sigma, rel=0.05)
        assert gains.imag.std() == pytest.approx(sigma, rel=0.05)


class Test__user_sinr:
    @staticmethod
    def test__single_user_is_the_received_snr() -> None:
        h, _ = _random_instance(3, users=1)
        f = np.ones((32, 1), dtype=np.complex128)
        expected = abs((h.entries @ f).item()) ** 2 / 0.1
        assert user_sinr(h, f, 0.1, 0) == pytest.approx(expected)

    @staticmethod
    def test__vector_and_covariance_forms_agree() -> None:
        h, f = _random_instance(4, users=3)
        covariances = [np.outer(f[:, i], f[:, i].conj()) for i in range(3)]
        for k in range(3):
            assert user_sinr_covariance(h, covariances, 0.5, k) == pytest.approx(user_sinr(h, f, 0.5, k), rel=1e-12)

    @staticmethod
    def test__zero_precoder_gives_zero() -> None:
        h, _ = _random_instance(5)
        assert user_sinr(h, np.zeros((32, 2)), 1.0, 1) == 0.0

    @staticmethod
    def test__rejects_non_positive_noise() -> None:
        h, f = _random_instance(6)
        with pytest.raises(ContractViolationError):
            _ = user_sinr(h, f, 0.0, 0)


class Test__sum_rate:
    @staticmethod
    def test__zero_precoder_carries_nothing() -> None:
        h, _ = _random_instance(7)
        assert sum_rate(h, Precoder(np.zeros((32, 2)), 0.0), 1.0) == 0.0

    @staticmethod
    def test__matched_filter_closed_form() -> None:
        h, _ = _random_instance(8, users=1)
        column = h.column(0)
        p_t = 2.0
        f = math.sqrt(p_t) * column / np.linalg.norm(column)
        expected = math.log2(1 + p_t * float(np.linalg.norm(column)) ** 2 / 0.3)
        assert sum_rate(h, f, 0.3) == pytest.approx(expected)

    @staticmethod
    def test__sums_the_per_user_rates() -> None:
        h, f = _random_instance(9)
        g = np.abs(h.entries @ f) ** 2
        expected = math.log2(1 + g[0, 0] / (g[0, 1] + 0.2)) + math.log2(1 + g[1, 1] / (g[1, 0] + 0.2))
        assert sum_rate(h, f, 0.2) == pytest.approx(expected)

    @staticmethod
    def test__ignores_the_phase_of_each_stream() -> None:
        h, f = _random_instance(10)
        rotated = f * np.exp(1j * np.array([0.7, -2.1]))
        assert sum_rate(h, rotated, 0.2) == pytest.approx(sum_rate(h, f, 0.2), rel=1e-12)
