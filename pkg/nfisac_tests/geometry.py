from __future__ import annotations

import math

import numpy as np
import pytest

from nfisac import (
    ArrayConfig,
    ContractViolationError,
    FresnelValidityWarning,
    GeometryError,
    PolarCoord,
    UnsupportedConfigurationError,
    bistatic_rx,
    bistatic_tx,
    far_steering,
    field_boundaries,
    fraunhofer_distance,
    fresnel_focusing,
    fresnel_w_matrix,
    gain_loss_approx,
    gain_loss_exact,
    near_focusing,
    rx_geometry,
    tx_geometry,
    wavelength_from_carrier,
)

_LAMBDA = 0.01


def _cfg(n: int) -> ArrayConfig:
    return ArrayConfig.half_wavelength(n, _LAMBDA)


class Test__wavelength_from_carrier:
    @staticmethod
    def test__uses_the_rounded_speed_of_light() -> None:
        assert wavelength_from_carrier(3e8) == 1.0
        assert wavelength_from_carrier(30e9) == pytest.approx(0.01, rel=1e-15)
        assert wavelength_from_carrier(28e9) == pytest.approx(0.010714, abs=1e-6)

    @staticmethod
    def test__rejects_non_positive_frequencies() -> None:
        with pytest.raises(ContractViolationError):
            _ = wavelength_from_carrier(0.0)
        with pytest.raises(ContractViolationError):
            _ = wavelength_from_carrier(-1.0)


class Test__fraunhofer_distance:
    @staticmethod
    def test__matches_closed_values() -> None:
        assert fraunhofer_distance(1.0, 2.0) == 1.0
        assert fraunhofer_distance(0.3, 0.3) == pytest.approx(0.6)
        assert fraunhofer_distance(2.0, wavelength_from_carrier(28e9)) == pytest.approx(746.7, abs=0.05)

    @staticmethod
    def test__rejects_non_positive_input() -> None:
        with pytest.raises(ContractViolationError):
            _ = fraunhofer_distance(0.0, 1.0)


class Test__far_steering:
    @staticmethod
    def test__endfire_of_two_elements() -> None:
        a = far_steering(ArrayConfig.half_wavelength(2, 1.0), math.pi / 2).ravel()
        assert np.allclose(a, [-1j, 1j], atol=1e-15)

    @staticmethod
    def test__matches_the_element_formula() -> None:
        cfg = _cfg(8)
        a = far_steering(cfg, 0.3).ravel()
        expected = [
            np.exp(1j * 2 * np.pi * ((2 * n - 8 + 1) / 2) * cfg.spacing * math.sin(0.3) / cfg.wavelength)
            for n in range(8)
        ]
        assert np.allclose(a, expected, atol=1e-12)

    @staticmethod
    def test__is_conjugate_symmetric_in_the_angle() -> None:
        cfg = _cfg(16)
        assert np.allclose(far_steering(cfg, -0.7), far_steering(cfg, 0.7).conj(), atol=1e-12)


class Test__near_focusing:
    @staticmethod
    def test__has_unit_modulus_entries() -> None:
        """
        The amplitude difference across the aperture is disregarded, so
        `||a||^2 = N` for every location.
        """

        cfg = _cfg(64)
        for p in (PolarCoord(2.0, 0.0), PolarCoord(7.5, 0.9), PolarCoord(300.0, -1.2)):
            a = near_focusing(cfg, p)
            assert np.allclose(np.abs(a), 1.0, atol=1e-12)
            assert float(np.vdot(a, a).real) == pytest.approx(64.0)

    @staticmethod
    def test__matches_the_exact_distance_formula() -> None:
        cfg = ArrayConfig(4, 0.005, 0.01)
        r = 5.0
        a = near_focusing(cfg, PolarCoord(r, 0.0)).ravel()
        delta = np.array([-1.5, -0.5, 0.5, 1.5])
        r_n = np.sqrt(r**2 + (delta * 0.005) ** 2)
        assert np.allclose(a, np.exp(-2j * np.pi * (r_n - r) / 0.01), atol=1e-12)

    @staticmethod
    def test__approaches_far_steering_at_long_range() -> None:
        cfg = _cfg(256)
        _, d_f = field_boundaries(cfg)
        theta = 0.4
        near = near_focusing(cfg, PolarCoord(100.0 * d_f, theta)).ravel()
        far = far_steering(cfg, theta).ravel()
        assert np.max(np.abs(np.angle(near * far.conj()))) < 1e-2

    @staticmethod
    def test__warns_inside_the_lower_fresnel_boundary() -> None:
        cfg = _cfg(256)
        lower, _ = field_boundaries(cfg)
        with pytest.warns(FresnelValidityWarning):
            _ = near_focusing(cfg, PolarCoord(0.5 * lower, 0.0))


class Test__fresnel_focusing:
    @staticmethod
    def test__phase_error_stays_small_in_the_fresnel_region() -> None:
        cfg = _cfg(64)
        for r in (2.0, 5.0, 10.0):
            for angle in (0.0, 0.5, 1.0):
                p = PolarCoord(r, angle)
                error = np.angle(near_focusing(cfg, p) * fresnel_focusing(cfg, p).conj())
                assert np.max(np.abs(error)) < math.pi / 8

    @staticmethod
    def test__two_elements_differ_from_far_steering_by_a_common_phase() -> None:
        cfg = _cfg(2)
        p = PolarCoord(0.2, 0.3)
        ratio = (fresnel_focusing(cfg, p) / far_steering(cfg, p.angle)).ravel()
        assert ratio[0] == pytest.approx(ratio[1])


class Test__fresnel_w_matrix:
    @staticmethod
    def test__corner_entries() -> None:
        for n in (4, 8, 16, 64):
            w = fresnel_w_matrix(n).entries
            m = n // 2 - 1
            assert w.shape == (m, m)
            assert w[0, 0] == n - 2
            assert w[0, m - 1] == (n * n - 2 * n) // 4
            assert w[m - 1, m - 1] == 2

    @staticmethod
    def test__entries_are_positive_even_and_upper_triangular() -> None:
        w = fresnel_w_matrix(32)
        support = w.support
        assert np.all(w.entries[~support] == 0)
        assert np.all(w.entries[support] > 0)
        assert np.all(w.entries[support] % 2 == 0)

    @staticmethod
    def test__rejects_odd_and_tiny_arrays() -> None:
        with pytest.raises(UnsupportedConfigurationError):
            _ = fresnel_w_matrix(7)
        with pytest.raises(UnsupportedConfigurationError):
            _ = fresnel_w_matrix(2)


class Test__gain_loss_exact:
    @staticmethod
    def test__vanishes_at_long_range() -> None:
        cfg = _cfg(16)
        _, d_f = field_boundaries(cfg)
        assert gain_loss_exact(cfg, PolarCoord(1e6 * d_f, 0.2)) < 1e-6

    @staticmethod
    def test__vanishes_towards_endfire() -> None:
        assert gain_loss_exact(_cfg(64), PolarCoord(3.0, math.pi / 2 - 1e-9)) < 1e-9

    @staticmethod
    def test__matches_the_brute_force_inner_product() -> None:
        cfg = _cfg(256)
        r = 10.0
        delta = (2.0 * np.arange(256) - 255) / 2.0
        x = delta * cfg.spacing
        r_n = np.sqrt(r**2 + x**2)
        inner = np.sum(np.exp(-2j * np.pi * (r_n - r) / cfg.wavelength))
        loss = gain_loss_exact(cfg, PolarCoord(r, 0.0))

        assert loss > 0
        assert loss == pytest.approx(1 - abs(inner) / 256, abs=1e-10)

    @staticmethod
    def test__is_monotone_in_range_towards_the_fraunhofer_distance() -> None:
        """
        Sampled along broadside from an eighth of the Fraunhofer distance
        outwards; closer in, the loss oscillates with the Fresnel spiral.
        """

        cfg = _cfg(64)
        _, d_f = field_boundaries(cfg)
        losses = [gain_loss_exact(cfg, PolarCoord(float(r), 0.0)) for r in np.geomspace(d_f / 8, d_f, 40)]
        assert np.all(np.diff(losses) <= 1e-12)


class Test__gain_loss_approx:
    @staticmethod
    def test__vanishes_towards_endfire() -> None:
        """
        With `cos(theta) = 0` every cosine is one and the pair count of
        the triangular support makes the root exactly `N`.
        """

        cfg = _cfg(32)
        assert gain_loss_approx(cfg, PolarCoord(4.0, math.pi / 2 - 1e-12)) == pytest.approx(0.0, abs=1e-12)

    @staticmethod
    def test__four_elements_by_hand() -> None:
        cfg = _cfg(4)
        p = PolarCoord(0.05, 0.4)
        k = _LAMBDA * math.pi * math.cos(p.angle) ** 2 / (2 * p.range)
        assert gain_loss_approx(cfg, p) == pytest.approx(1 - math.sqrt(8 + 8 * math.cos(k)) / 4, abs=1e-12)

    @staticmethod
    def test__equals_the_loss_of_the_fresnel_vector() -> None:
        """
        The closed form sums the same cosines as the inner product of the
        far-field and Fresnel-approximated vectors.
        """

        cfg = _cfg(64)
        for r in (1.5, 4.0, 20.0):
            for angle in (0.0, 0.6, -1.1):
                p = PolarCoord(r, angle)
                inner = (far_steering(cfg, angle).conj().T @ fresnel_focusing(cfg, p)).item()
                assert gain_loss_approx(cfg, p) == pytest.approx(1 - abs(inner) / 64, abs=1e-9)

    @staticmethod
    def test__tracks_the_exact_loss_in_the_fresnel_region() -> None:
        for n in (16, 64, 256):
            cfg = _cfg(n)
            lower, d_f = field_boundaries(cfg)
            for r in np.geomspace(lower, d_f, 16):
                for degrees in (0.0, 30.0, 60.0):
                    p = PolarCoord.from_degrees(float(r), degrees)
                    assert abs(gain_loss_approx(cfg, p) - gain_loss_exact(cfg, p)) < 0.02

    @staticmethod
    def test__both_losses_vanish_outside_the_near_field() -> None:
        for n in (16, 64, 256):
            cfg = _cfg(n)
            lower, d_f = field_boundaries(cfg)
            assert gain_loss_approx(cfg, PolarCoord(lower, math.pi / 2 - 1e-12)) == 0.0
            for degrees in (0.0, 30.0, 60.0):
                assert gain_loss_exact(cfg, PolarCoord.from_degrees(10.0 * d_f, degrees)) < 1e-3

    @staticmethod
    def test__rejects_unsupported_arrays() -> None:
        with pytest.raises(UnsupportedConfigurationError):
            _ = gain_loss_approx(ArrayConfig.half_wavelength(9, _LAMBDA), PolarCoord(5.0, 0.0))
        with pytest.raises(UnsupportedConfigurationError):
            _ = gain_loss_approx(ArrayConfig(8, 0.4 * _LAMBDA, _LAMBDA), PolarCoord(5.0, 0.0))


class Test__rx_geometry:
    @staticmethod
    def test__satisfies_the_law_of_cosines() -> None:
        cfg = _cfg(256)
        tx = PolarCoord(5.0, math.radians(60.0))
        rx = rx_geometry(tx, cfg, cfg)
        offset = 256 * cfg.spacing

        expected = tx.range**2 + offset**2 - 2 * tx.range * offset * math.sin(tx.angle)
        assert rx.range**2 == pytest.approx(expected, rel=1e-12)
        assert math.sin(rx.angle) == pytest.approx((offset - tx.range * math.sin(tx.angle)) / rx.range, rel=1e-12)

    @staticmethod
    def test__zero_offset_mirrors_the_angle() -> None:
        tx = PolarCoord(7.0, 0.3)
        rx = bistatic_rx(tx, 0.0)
        assert rx.range == pytest.approx(7.0)
        assert math.sin(rx.angle) == pytest.approx(-math.sin(0.3))

    @staticmethod
    def test__point_abreast_of_the_other_center_is_broadside() -> None:
        rx = bistatic_rx(PolarCoord(2.0, math.asin(0.5)), 1.0)
        assert rx.angle == pytest.approx(0.0, abs=1e-12)

    @staticmethod
    def test__point_on_the_other_center_has_no_angle() -> None:
        with pytest.raises(GeometryError):
            _ = bistatic_rx(PolarCoord(1.0, math.pi / 2 - 1e-9), 1.0)


class Test__tx_geometry:
    @staticmethod
    def test__inverts_rx_geometry() -> None:
        cfg_tx, cfg_rx = _cfg(256), _cfg(128)
        rng = np.random.default_rng(0)
        for _ in range(100):
            tx = PolarCoord(float(rng.uniform(1.0, 50.0)), float(rng.uniform(-1.4, 1.4)))
            back = tx_geometry(rx_geometry(tx, cfg_tx, cfg_rx), cfg_tx, cfg_rx)
            assert back.range == pytest.approx(tx.range, rel=1e-10)
            assert back.angle == pytest.approx(tx.angle, rel=1e-10, abs=1e-10)

    @staticmethod
    def test__ranges_differ_by_at_most_the_offset() -> None:
        offset = 0.3
        for angle in (-1.0, 0.0, 0.7):
            rx = PolarCoord(4.0, angle)
            assert abs(bistatic_tx(rx, offset).range - rx.range) <= offset + 1e-12
