from __future__ import annotations

__all__ = [
    "SPEED_OF_LIGHT",
    "ArrayConfig",
    "FresnelW",
    "PolarCoord",
    "array_offset",
    "bistatic_rx",
    "bistatic_tx",
    "far_steering",
    "field_boundaries",
    "focusing_derivatives",
    "fraunhofer_distance",
    "fresnel_focusing",
    "fresnel_w_matrix",
    "gain_loss_approx",
    "gain_loss_exact",
    "lower_fresnel_distance",
    "near_focusing",
    "near_focusing_grid",
    "rx_geometry",
    "tx_geometry",
    "wavelength_from_carrier",
]

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Final, final
from warnings import warn

import numpy as np
from numpy.typing import NDArray

from .._utils import (
    CMatrix,
    ContractViolationError,
    FresnelValidityWarning,
    GeometryError,
    RVector,
    UnsupportedConfigurationError,
)

SPEED_OF_LIGHT: Final = 3.0e8
"""
Speed of light in m/s, rounded the way link-budget worked examples do.
"""


@final
@dataclass(frozen=True)
class ArrayConfig:
    """
    A uniform linear array of `n_elements` antennas with element
    `spacing` (m) operated at `wavelength` (m).

    Element `n` (0-based) sits at `delta_n * spacing` from the array
    center along the array axis, with `delta_n = (2n - N + 1) / 2`.
    """

    n_elements: int
    spacing: float
    wavelength: float

    def __post_init__(self, /) -> None:
        if self.n_elements < 2:
            raise ContractViolationError(f"an array needs at least 2 elements, got {self.n_elements}")
        if not (math.isfinite(self.spacing) and self.spacing > 0):
            raise ContractViolationError(f"element spacing must be positive, got {self.spacing}")
        if not (math.isfinite(self.wavelength) and self.wavelength > 0):
            raise ContractViolationError(f"wavelength must be positive, got {self.wavelength}")

    @classmethod
    def half_wavelength(cls, n_elements: int, wavelength: float, /) -> ArrayConfig:
        """
        Examples
        --------
        >>> ArrayConfig.half_wavelength(4, 0.01).spacing
        0.005
        """

        return cls(n_elements, wavelength / 2, wavelength)

    @cached_property
    def delta(self, /) -> RVector:
        """
        Element indices `delta_n` relative to the array center.

        Examples
        --------
        >>> ArrayConfig.half_wavelength(4, 1.0).delta.tolist()
        [-1.5, -0.5, 0.5, 1.5]
        """

        n = self.n_elements
        return (2.0 * np.arange(n) - n + 1) / 2.0

    @property
    def offsets(self, /) -> RVector:
        """
        Element positions (m) relative to the array center.
        """

        return self.delta * self.spacing

    @property
    def aperture(self, /) -> float:
        return self.n_elements * self.spacing

    @property
    def is_half_wavelength(self, /) -> bool:
        return abs(self.spacing - self.wavelength / 2) <= 1e-12 * self.wavelength


@final
@dataclass(frozen=True)
class PolarCoord:
    """
    A location `range` meters away from an array center, at `angle`
    radians from the broadside normal.
    """

    range: float
    angle: float

    def __post_init__(self, /) -> None:
        if not (math.isfinite(self.range) and self.range > 0):
            raise ContractViolationError(f"range must be positive, got {self.range}")
        if not (math.isfinite(self.angle) and abs(self.angle) < math.pi / 2):
            raise ContractViolationError(f"angle must lie strictly inside (-pi/2, pi/2), got {self.angle}")

    @classmethod
    def from_degrees(cls, range: float, angle_deg: float, /) -> PolarCoord:
        return cls(range, math.radians(angle_deg))


@final
@dataclass(frozen=True, eq=False)
class FresnelW:
    """
    The constant upper triangular matrix of the closed-form gain loss,
    of size `(N/2 - 1) x (N/2 - 1)`.
    """

    n_elements: int
    entries: NDArray[np.int64]

    @property
    def support(self, /) -> NDArray[np.bool_]:
        m = self.entries.shape[0]
        return np.triu(np.ones((m, m), dtype=np.bool_))


def wavelength_from_carrier(f_carrier: float, /) -> float:
    """
    Examples
    --------
    >>> wavelength_from_carrier(30e9)
    0.01
    """

    if not (math.isfinite(f_carrier) and f_carrier > 0):
        raise ContractViolationError(f"carrier frequency must be positive, got {f_carrier}")

    return SPEED_OF_LIGHT / f_carrier


def fraunhofer_distance(aperture: float, wavelength: float, /) -> float:
    """
    Boundary `2 D^2 / lambda` beyond which the far-field plane-wave model
    holds.

    Examples
    --------
    >>> round(fraunhofer_distance(2.0, wavelength_from_carrier(28e9)), 1)
    746.7
    """

    if not (aperture > 0 and wavelength > 0):
        raise ContractViolationError(f"aperture and wavelength must be positive, got {aperture}, {wavelength}")

    return 2.0 * aperture**2 / wavelength


def lower_fresnel_distance(aperture: float, wavelength: float, /) -> float:
    """
    Inner boundary `0.62 sqrt(D^3 / lambda)` of the radiating near field.
    """

    if not (aperture > 0 and wavelength > 0):
        raise ContractViolationError(f"aperture and wavelength must be positive, got {aperture}, {wavelength}")

    return 0.62 * math.sqrt(aperture**3 / wavelength)


def field_boundaries(cfg: ArrayConfig, /) -> tuple[float, float]:
    """
    Returns `(lower_fresnel, fraunhofer)` distances of an array.
    """

    return (
        lower_fresnel_distance(cfg.aperture, cfg.wavelength),
        fraunhofer_distance(cfg.aperture, cfg.wavelength),
    )


def far_steering(cfg: ArrayConfig, theta: float, /) -> CMatrix:
    """
    Far-field steering vector (N×1) towards angle `theta`.

    The closed interval `[-pi/2, pi/2]` is accepted; endfire is a valid
    direction for a plane wave.

    Examples
    --------
    >>> far_steering(ArrayConfig.half_wavelength(2, 1.0), 0.0).ravel().tolist()
    [(1+0j), (1+0j)]
    """

    if not (math.isfinite(theta) and abs(theta) <= math.pi / 2):
        raise ContractViolationError(f"angle must lie in [-pi/2, pi/2], got {theta}")

    phase = 2.0 * np.pi * cfg.offsets * math.sin(theta) / cfg.wavelength
    return np.exp(1j * phase).reshape(-1, 1)


def _path_difference(cfg: ArrayConfig, p: PolarCoord, /) -> RVector:
    # r_n - r, written so that it does not cancel at large ranges.
    x = cfg.offsets
    s = math.sin(p.angle)
    r_n = np.sqrt(p.range**2 + x**2 - 2.0 * p.range * x * s)
    return (x**2 - 2.0 * p.range * x * s) / (r_n + p.range)


def _warn_if_inside_fresnel(cfg: ArrayConfig, p: PolarCoord, /) -> None:
    boundary = lower_fresnel_distance(cfg.aperture, cfg.wavelength)
    if p.range < boundary:
        warn(
            f"range {p.range:.4g} m is inside the lower Fresnel boundary {boundary:.4g} m", FresnelValidityWarning, 3
        )


def near_focusing(cfg: ArrayConfig, p: PolarCoord, /) -> CMatrix:
    """
    Near-field focusing vector (N×1) towards `p`, using exact
    element-to-point distances and ignoring amplitude differences.

    Emits `FresnelValidityWarning` when `p` is closer than the lower
    Fresnel boundary.
    """

    _warn_if_inside_fresnel(cfg, p)
    phase = -2.0 * np.pi * _path_difference(cfg, p) / cfg.wavelength
    return np.exp(1j * phase).reshape(-1, 1)


def near_focusing_grid(cfg: ArrayConfig, ranges: RVector, angles: RVector, /) -> CMatrix:
    """
    Focusing vectors of every `(range, angle)` pair of a grid, as the
    columns of an N×(len(ranges)*len(angles)) matrix in range-major
    order. No validity warnings are emitted.
    """

    x = cfg.offsets[:, np.newaxis, np.newaxis]
    r = np.asarray(ranges, dtype=np.float64)[np.newaxis, :, np.newaxis]
    s = np.sin(np.asarray(angles, dtype=np.float64))[np.newaxis, np.newaxis, :]
    r_n = np.sqrt(r**2 + x**2 - 2.0 * r * x * s)
    phase = -2.0 * np.pi * ((x**2 - 2.0 * r * x * s) / (r_n + r)) / cfg.wavelength
    return np.exp(1j * phase).reshape(cfg.n_elements, -1)


def focusing_derivatives(cfg: ArrayConfig, p: PolarCoord, /) -> tuple[CMatrix, CMatrix]:
    """
    Partial derivatives of `near_focusing(cfg, p)` with respect to range
    and angle.
    """

    a = near_focusing(cfg, p).ravel()
    x = cfg.offsets
    r, s, c = p.range, math.sin(p.angle), math.cos(p.angle)
    r_n = np.sqrt(r**2 + x**2 - 2.0 * r * x * s)
    k = 2.0 * np.pi / cfg.wavelength

    # d(r_n - r)/dr = (r - x s - r_n) / r_n, without cancellation.
    d_range = -(x * c) ** 2 / ((r - x * s + r_n) * r_n)
    d_angle = -r * x * c / r_n

    return (-1j * k * d_range * a).reshape(-1, 1), (-1j * k * d_angle * a).reshape(-1, 1)


def fresnel_focusing(cfg: ArrayConfig, p: PolarCoord, /) -> CMatrix:
    """
    Second-order (Fresnel) approximation of `near_focusing`.
    """

    x = cfg.offsets
    lam = cfg.wavelength
    c2 = math.cos(p.angle) ** 2
    phase = -np.pi * (x**2 * c2 / (p.range * lam) - 2.0 * x * math.sin(p.angle) / lam)
    return np.exp(1j * phase).reshape(-1, 1)


def fresnel_w_matrix(n_elements: int, /) -> FresnelW:
    """
    Examples
    --------
    >>> fresnel_w_matrix(8).entries.tolist()
    [[6, 10, 12], [0, 4, 6], [0, 0, 2]]
    """

    _require_even_size(n_elements)

    m = n_elements // 2 - 1
    i, j = np.meshgrid(np.arange(1, m + 1), np.arange(1, m + 1), indexing="ij")
    values = (i - 1) ** 2 - j**2 + (n_elements - 1) * (j + 1 - i)
    entries = np.where(i <= j, values, 0).astype(np.int64)
    return FresnelW(n_elements, entries)


def gain_loss_exact(cfg: ArrayConfig, p: PolarCoord, /) -> float:
    """
    Normalized beamforming gain lost by steering with the far-field
    vector at a near-field location.
    """

    inner = (far_steering(cfg, p.angle).conj().T @ near_focusing(cfg, p)).item()
    return float(np.clip(1.0 - abs(inner) / cfg.n_elements, 0.0, 1.0))


def gain_loss_approx(cfg: ArrayConfig, p: PolarCoord, /) -> float:
    """
    Closed-form gain loss for even `N` at half-wavelength spacing.

    The cosine sum runs over the upper triangular support of
    `fresnel_w_matrix(N)` only.
    """

    n = cfg.n_elements
    _require_even_size(n)
    if not cfg.is_half_wavelength:
        raise UnsupportedConfigurationError("the closed-form gain loss requires half-wavelength spacing")

    w = fresnel_w_matrix(n)
    scale = cfg.wavelength * math.pi * math.cos(p.angle) ** 2 / (4.0 * p.range)
    total = float(np.sum(np.cos(scale * w.entries[w.support])))
    magnitude = math.sqrt(max(2.0 * n + 8.0 * total, 0.0))
    return 1.0 - magnitude / n


def _require_even_size(n_elements: int, /) -> None:
    if n_elements % 2 != 0:
        raise UnsupportedConfigurationError(f"the closed-form gain loss needs an even element count, got {n_elements}")
    if n_elements < 4:
        raise UnsupportedConfigurationError(f"the closed-form gain loss needs at least 4 elements, got {n_elements}")


def array_offset(cfg_tx: ArrayConfig, cfg_rx: ArrayConfig, /) -> float:
    """
    Distance between the centers of two collinear, abutting arrays.
    """

    return (cfg_tx.aperture + cfg_rx.aperture) / 2.0


def bistatic_rx(tx: PolarCoord, offset: float, /) -> PolarCoord:
    """
    Location seen from the receive array center, given the location
    seen from the transmit array center and the center offset.
    """

    return _transfer(tx, offset)


def bistatic_tx(rx: PolarCoord, offset: float, /) -> PolarCoord:
    """
    Inverse of `bistatic_rx`; the relation is symmetric in the two
    centers.
    """

    return _transfer(rx, offset)


def _transfer(p: PolarCoord, offset: float, /) -> PolarCoord:
    if not (math.isfinite(offset) and offset >= 0):
        raise ContractViolationError(f"array offset must be non-negative, got {offset}")

    r, s = p.range, math.sin(p.angle)
    r_other = math.sqrt(max(r * r + offset * offset - 2.0 * offset * r * s, 0.0))
    if r_other == 0.0:
        raise GeometryError("the point coincides with the other array center")

    s_other = (offset - r * s) / r_other
    if abs(s_other) >= 1.0:
        raise GeometryError(f"no valid angle at the other array center (sin = {s_other:.12g})")

    return PolarCoord(r_other, math.asin(s_other))


def rx_geometry(tx: PolarCoord, cfg_tx: ArrayConfig, cfg_rx: ArrayConfig, /) -> PolarCoord:
    """
    Receive-side coordinates of a target located at `tx` relative to the
    transmit array.
    """

    return bistatic_rx(tx, array_offset(cfg_tx, cfg_rx))


def tx_geometry(rx: PolarCoord, cfg_tx: ArrayConfig, cfg_rx: ArrayConfig, /) -> PolarCoord:
    """
    Transmit-side coordinates of a target located at `rx` relative to the
    receive array.
    """

    return bistatic_tx(rx, array_offset(cfg_tx, cfg_rx))
