from __future__ import annotations

__all__ = [
    "ChannelMatrix",
    "ChannelModel",
    "UserPlacement",
    "channel_matrix",
    "far_channel",
    "near_channel",
    "sample_gains",
    "sample_scatterers",
    "sum_rate",
    "user_sinr",
    "user_sinr_covariance",
]

import math
from collections.abc import Sequence
from dataclasses import dataclass, replace
from typing import Literal, TypeAlias, final

import numpy as np
from numpy.typing import ArrayLike

from ._geometry import ArrayConfig, PolarCoord, far_steering, near_focusing
from ._precoder import Precoder, precoder_entries
from .._utils import CMatrix, ContractViolationError, as_cmatrix

ChannelModel: TypeAlias = Literal["near", "far"]


@final
@dataclass(frozen=True)
class UserPlacement:
    """
    A user reached through a line-of-sight path and `P` scattering
    paths, each with its complex gain.

    When `scatter_gains` is left empty every scattering path gets a unit
    gain.
    """

    los: PolarCoord
    scatterers: tuple[PolarCoord, ...] = ()
    los_gain: complex = 1.0 + 0.0j
    scatter_gains: tuple[complex, ...] = ()

    def __post_init__(self, /) -> None:
        object.__setattr__(self, "scatterers", tuple(self.scatterers))
        gains = tuple(complex(g) for g in self.scatter_gains)
        if len(gains) == 0:
            gains = (1.0 + 0.0j,) * len(self.scatterers)
        if len(gains) != len(self.scatterers):
            raise ContractViolationError(
                f"{len(self.scatterers)} scatterers but {len(gains)} scattering gains were given"
            )
        if not all(math.isfinite(abs(g)) for g in (self.los_gain, *gains)):
            raise ContractViolationError("path gains must be finite")
        object.__setattr__(self, "los_gain", complex(self.los_gain))
        object.__setattr__(self, "scatter_gains", gains)

    @property
    def n_paths(self, /) -> int:
        return len(self.scatterers)


@final
@dataclass(frozen=True, eq=False)
class ChannelMatrix:
    """
    Multiuser channel; row `k` of `entries` is `h_k^H`.
    """

    entries: CMatrix
    model: ChannelModel

    def __post_init__(self, /) -> None:
        object.__setattr__(self, "entries", as_cmatrix(self.entries, name="channel"))
        if self.model not in ("near", "far"):
            raise ContractViolationError(f"unknown channel model {self.model!r}")

    @property
    def n_users(self, /) -> int:
        return self.entries.shape[0]

    @property
    def n_antennas(self, /) -> int:
        return self.entries.shape[1]

    def column(self, k: int, /) -> CMatrix:
        """
        The channel `h_k` of user `k` as an N_t×1 column.
        """

        return self.entries[k : k + 1, :].conj().T


def _compose(u: UserPlacement, responses: Sequence[CMatrix], /) -> CMatrix:
    h = u.los_gain * responses[0]
    if u.n_paths > 0:
        scattered = sum((g * a for g, a in zip(u.scatter_gains, responses[1:])), np.zeros_like(h))
        h = h + math.sqrt(1.0 / u.n_paths) * scattered

    return h


def near_channel(cfg: ArrayConfig, u: UserPlacement, /) -> CMatrix:
    """
    Spherical-wave channel of a user (N_t×1).
    """

    return _compose(u, [near_focusing(cfg, p) for p in (u.los, *u.scatterers)])


def far_channel(cfg: ArrayConfig, u: UserPlacement, /) -> CMatrix:
    """
    Plane-wave channel of a user (N_t×1); path ranges are ignored.
    """

    return _compose(u, [far_steering(cfg, p.angle) for p in (u.los, *u.scatterers)])


def channel_matrix(cfg: ArrayConfig, users: Sequence[UserPlacement], model: ChannelModel, /) -> ChannelMatrix:
    if len(users) == 0:
        raise ContractViolationError("at least one user is needed")

    build = near_channel if model == "near" else far_channel
    rows = [build(cfg, u).conj().T for u in users]
    return ChannelMatrix(np.vstack(rows), model)


def sample_gains(rng: np.random.Generator, u: UserPlacement, wavelength: float, /) -> UserPlacement:
    """
    Draws path gains: free-space magnitude `lambda / (4 pi r_0)` with a
    uniform phase for the line-of-sight path, and circularly-symmetric
    Gaussian gains with per-component standard deviation `0.1 |alpha_0|`
    for the scattering paths.
    """

    phase = rng.uniform(0.0, 2.0 * math.pi)
    magnitude = wavelength / (4.0 * math.pi * u.los.range)
    los_gain = magnitude * complex(math.cos(phase), math.sin(phase))

    draws = rng.standard_normal((u.n_paths, 2))
    scatter_gains = tuple(0.1 * magnitude * complex(re, im) for re, im in draws)

    return replace(u, los_gain=los_gain, scatter_gains=scatter_gains)


def sample_scatterers(
    rng: np.random.Generator,
    n_paths: int,
    /,
    range_bounds: tuple[float, float] = (1.0, 30.0),
    angle_bounds: tuple[float, float] = (-math.pi / 3, math.pi / 3),
) -> tuple[PolarCoord, ...]:
    """
    Draws scatterer locations uniformly over a range and angle window
    (by default 1 m to 30 m and -60 to 60 degrees).
    """

    if n_paths < 0:
        raise ContractViolationError(f"path count must be non-negative, got {n_paths}")

    ranges = rng.uniform(*range_bounds, size=n_paths)
    angles = rng.uniform(*angle_bounds, size=n_paths)
    return tuple(PolarCoord(float(r), float(a)) for r, a in zip(ranges, angles))


def _check_noise(noise_power: float, /) -> None:
    if not noise_power > 0:
        raise ContractViolationError(f"noise power must be positive, got {noise_power}")


def user_sinr(h_true: ChannelMatrix, f: Precoder | ArrayLike, noise_power: float, k: int, /) -> float:
    """
    Signal-to-interference-plus-noise ratio of user `k`, with stream `i`
    of `f` intended for user `i`.
    """

    _check_noise(noise_power)
    entries = precoder_entries(f)
    if entries.shape != (h_true.n_antennas, h_true.n_users):
        raise ContractViolationError(
            f"precoder shape {entries.shape} does not match {h_true.n_users} users and {h_true.n_antennas} antennas"
        )

    gains = np.abs(h_true.entries[k, :] @ entries) ** 2
    signal = float(gains[k])
    interference = float(np.sum(np.delete(gains, k)))
    return signal / (interference + noise_power)


def user_sinr_covariance(
    h_true: ChannelMatrix, covariances: Sequence[ArrayLike], noise_power: float, k: int, /
) -> float:
    """
    Same ratio as `user_sinr`, written with per-user transmit covariances
    `F_i = f_i f_i^H`.
    """

    _check_noise(noise_power)
    if len(covariances) != h_true.n_users:
        raise ContractViolationError(f"expected {h_true.n_users} covariances, got {len(covariances)}")

    h = h_true.column(k)
    powers = [float(np.real((h.conj().T @ as_cmatrix(c) @ h).item())) for c in covariances]
    signal = powers[k]
    interference = sum(p for i, p in enumerate(powers) if i != k)
    return signal / (interference + noise_power)


def sum_rate(h_true: ChannelMatrix, f: Precoder | ArrayLike, noise_power: float, /) -> float:
    """
    Achievable sum spectral efficiency (bit/s/Hz).

    Pass the near-field channel here even for precoders designed with
    the far-field model.
    """

    return float(sum(math.log2(1.0 + user_sinr(h_true, f, noise_power, k)) for k in range(h_true.n_users)))
