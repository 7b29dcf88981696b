from __future__ import annotations

__all__ = [
    "MusicSettings",
    "Profile",
    "QosSettings",
    "Scenario",
    "SweepGrids",
    "complete_user",
    "make_scenario",
]

import math
from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from typing import Literal, TypeAlias, final

from .._core import (
    SPEED_OF_LIGHT,
    ArrayConfig,
    ChannelMatrix,
    ChannelModel,
    MusicGrid,
    PolarCoord,
    QosSpec,
    TargetTruth,
    TradeoffWeight,
    UserPlacement,
    array_offset,
    channel_matrix,
    sample_gains,
    sample_scatterers,
)
from .._utils import ContractViolationError, Stream, db_to_linear, stream_rng

Profile: TypeAlias = Literal["paper", "desk"]

_PROFILE_SIZES: dict[str, tuple[int, int]] = {
    # elements per array, Monte-Carlo trials
    "paper": (256, 500),
    "desk": (64, 100),
}


def _axis(start: float, stop: float, step: float, /) -> tuple[float, ...]:
    count = int(round((stop - start) / step)) + 1
    return tuple(round(start + i * step, 12) for i in range(count))


@final
@dataclass(frozen=True)
class MusicSettings:
    """
    Receive-side MUSIC grid (meters and radians) and the two-stage
    search parameters. `polish` refines each peak off the grid.
    """

    range_min: float = 1.0
    range_max: float = 30.0
    range_step: float = 0.1
    angle_limit: float = math.radians(89.75)
    angle_step: float = math.radians(0.25)
    refinement: int = 10
    window: int = 2
    parabolic: bool = False
    polish: bool = True

    def __post_init__(self, /) -> None:
        if not 0 < self.range_min < self.range_max:
            raise ContractViolationError(f"MUSIC range window [{self.range_min}, {self.range_max}] is empty")
        if not 0 < self.angle_limit < math.pi / 2:
            raise ContractViolationError(f"MUSIC angle limit must lie in (0, pi/2), got {self.angle_limit}")
        if not (self.range_step > 0 and self.angle_step > 0):
            raise ContractViolationError("MUSIC grid steps must be positive")
        if self.refinement < 1 or self.window < 1:
            raise ContractViolationError("MUSIC refinement and window must be positive")

    def grid(self, /) -> MusicGrid:
        return MusicGrid.uniform(
            self.range_min, self.range_max, self.range_step, -self.angle_limit, self.angle_limit, self.angle_step
        )


@final
@dataclass(frozen=True)
class QosSettings:
    """
    Quality-of-service point of the power-minimization experiments:
    a common SINR threshold (dB) and the target beampattern floor (W).
    """

    gamma_db: float = 15.0
    target_power_floor: float = 100.0
    randomization_trials: int = 200

    def __post_init__(self, /) -> None:
        if not math.isfinite(self.gamma_db):
            raise ContractViolationError(f"SINR threshold must be finite, got {self.gamma_db}")
        if not self.target_power_floor >= 0:
            raise ContractViolationError(f"target power floor must be non-negative, got {self.target_power_floor}")
        if self.randomization_trials < 0:
            raise ContractViolationError("randomization trial count must be non-negative")

    def spec(self, n_users: int, noise_power: float, /) -> QosSpec:
        gamma = float(db_to_linear(self.gamma_db))
        return QosSpec((gamma,) * n_users, self.target_power_floor, noise_power)


@final
@dataclass(frozen=True)
class SweepGrids:
    snr_db: tuple[float, ...] = _axis(-10.0, 30.0, 5.0)
    detection_snr_db: tuple[float, ...] = _axis(-40.0, 0.0, 2.5)
    rate_snr_db: tuple[float, ...] = _axis(60.0, 160.0, 5.0)
    eta: tuple[float, ...] = _axis(0.0, 1.0, 0.1)
    tradeoff_distances: tuple[float, ...] = (5.0, 15.0)
    distance: tuple[float, ...] = (2.0, 3.0, 5.0, 8.0, 12.0, 20.0, 30.0, 50.0, 80.0, 120.0, 200.0, 300.0)
    gamma_db: tuple[float, ...] = _axis(5.0, 20.0, 2.5)
    target_power_floor: tuple[float, ...] = (25.0, 50.0, 100.0, 200.0, 400.0)

    def __post_init__(self, /) -> None:
        for name in (
            "snr_db",
            "detection_snr_db",
            "rate_snr_db",
            "eta",
            "tradeoff_distances",
            "distance",
            "gamma_db",
            "target_power_floor",
        ):
            values = tuple(float(v) for v in getattr(self, name))
            if len(values) == 0 or not all(math.isfinite(v) for v in values):
                raise ContractViolationError(f"sweep grid {name} must hold finite values")
            object.__setattr__(self, name, values)
        if any(not 0.0 <= v <= 1.0 for v in self.eta):
            raise ContractViolationError("trade-off weights must lie in [0, 1]")
        if any(v <= 0 for v in self.tradeoff_distances + self.distance):
            raise ContractViolationError("target distances must be positive")
        if any(v < 0 for v in self.target_power_floor):
            raise ContractViolationError("target power floors must be non-negative")


@final
@dataclass(frozen=True, eq=False)
class Scenario:
    """
    Everything an experiment needs: arrays, users, target, powers,
    sensing parameters, design choices, sweep grids and the master seed.

    All quantities are SI and radians.
    """

    cfg_tx: ArrayConfig
    cfg_rx: ArrayConfig
    carrier: float
    users: tuple[UserPlacement, ...]
    target: TargetTruth
    transmit_power: float
    comm_noise_power: float = 1e-9
    snapshots: int = 64
    eta: float = 0.5
    algorithm: Literal["ls", "am"] = "ls"
    am_tolerance: float = 1e-6
    am_max_iterations: int = 100
    pfa: float = 1e-7
    sensing_snr_db: float = 10.0
    music: MusicSettings = field(default_factory=MusicSettings)
    qos: QosSettings = field(default_factory=QosSettings)
    grids: SweepGrids = field(default_factory=SweepGrids)
    trials: int = 100
    master_seed: int = 0

    def __post_init__(self, /) -> None:
        object.__setattr__(self, "users", tuple(self.users))
        if len(self.users) == 0:
            raise ContractViolationError("a scenario needs at least one user")
        if not math.isclose(self.cfg_tx.wavelength, SPEED_OF_LIGHT / self.carrier, rel_tol=1e-12):
            raise ContractViolationError("transmit array wavelength does not match the carrier")
        if not math.isclose(self.cfg_rx.wavelength, self.cfg_tx.wavelength, rel_tol=1e-12):
            raise ContractViolationError("transmit and receive arrays must share one wavelength")
        if not math.isclose(self.target.offset, array_offset(self.cfg_tx, self.cfg_rx), rel_tol=1e-12):
            raise ContractViolationError("target geometry was built for other arrays")
        if not (math.isfinite(self.transmit_power) and self.transmit_power > 0):
            raise ContractViolationError(f"transmit power must be positive, got {self.transmit_power}")
        if not self.comm_noise_power > 0:
            raise ContractViolationError(f"noise power must be positive, got {self.comm_noise_power}")
        if self.snapshots < 1 or self.trials < 1:
            raise ContractViolationError("snapshot and trial counts must be positive")
        if self.master_seed < 0:
            raise ContractViolationError(f"master seed must be non-negative, got {self.master_seed}")
        if self.algorithm not in ("ls", "am"):
            raise ContractViolationError(f"unknown trade-off algorithm {self.algorithm!r}")
        if not 0.0 < self.pfa < 1.0:
            raise ContractViolationError(f"false-alarm probability must lie in (0, 1), got {self.pfa}")
        TradeoffWeight(self.eta)

    @property
    def wavelength(self, /) -> float:
        return self.cfg_tx.wavelength

    def channels(self, model: ChannelModel, /) -> ChannelMatrix:
        return channel_matrix(self.cfg_tx, self.users, model)

    def sensing_noise_power(self, snr_db: float, /, transmit_power: float | None = None) -> float:
        """
        Receiver noise power giving a radar SNR `|beta|^2 L P_t / sigma^2`
        of `snr_db`.
        """

        power = self.transmit_power if transmit_power is None else transmit_power
        gain = abs(self.target.beta) ** 2 * self.snapshots * power
        if gain == 0:
            raise ContractViolationError("a target with zero reflection has no radar SNR")

        return gain / float(db_to_linear(snr_db))

    def qos_spec(self, /, gamma_db: float | None = None, target_power_floor: float | None = None) -> QosSpec:
        settings = self.qos
        if gamma_db is not None:
            settings = replace(settings, gamma_db=gamma_db)
        if target_power_floor is not None:
            settings = replace(settings, target_power_floor=target_power_floor)

        return settings.spec(len(self.users), self.comm_noise_power)

    def with_target(self, tx: PolarCoord, /) -> Scenario:
        return replace(self, target=TargetTruth.from_tx(self.target.beta, tx, self.cfg_tx, self.cfg_rx))

    def with_transmit_power(self, transmit_power: float, /) -> Scenario:
        return replace(self, transmit_power=transmit_power)


def complete_user(
    master_seed: int,
    index: int,
    los: PolarCoord,
    wavelength: float,
    /,
    n_paths: int = 2,
    *,
    scatterers: Sequence[PolarCoord] | None = None,
    los_gain: complex | None = None,
    scatter_gains: Sequence[complex] | None = None,
) -> UserPlacement:
    """
    Fills the unpinned parts of a user from the scenario streams: the
    scatterer locations from `Stream.SCATTERERS` and the path gains from
    `Stream.GAINS`, both keyed by the user index.
    """

    if scatterers is None:
        scatterers = sample_scatterers(stream_rng(master_seed, Stream.SCATTERERS, index), n_paths)
    rng = stream_rng(master_seed, Stream.GAINS, index)
    drawn = sample_gains(rng, UserPlacement(los, tuple(scatterers)), wavelength)

    if los_gain is not None:
        drawn = replace(drawn, los_gain=complex(los_gain))
    if scatter_gains is not None:
        drawn = replace(drawn, scatter_gains=tuple(complex(g) for g in scatter_gains))

    return drawn


def make_scenario(
    profile: Profile = "paper",
    /,
    *,
    n_tx: int | None = None,
    n_rx: int | None = None,
    carrier: float = 30e9,
    spacing_wavelengths: float = 0.5,
    users: Sequence[UserPlacement] | None = None,
    user_locations: Sequence[PolarCoord] = (PolarCoord(5.0, 0.0), PolarCoord(15.0, 0.0)),
    n_paths: int = 2,
    target: PolarCoord = PolarCoord(5.0, math.radians(60.0)),
    beta: complex = 1.0,
    transmit_power: float = 1.0,
    trials: int | None = None,
    master_seed: int = 0,
    **options: object,
) -> Scenario:
    """
    Scenario of the near-field simulation setup: 30 GHz, two users at
    5 m and 15 m broadside with two scattering paths each, a target at
    5 m and 60 degrees, 1 W (30 dBm) transmit power and 64 snapshots.

    `profile` picks the array size and trial count that are not given
    explicitly (`"paper"`: 256 elements and 500 trials, `"desk"`: 64
    elements and 100 trials). Remaining keyword options are `Scenario`
    fields.
    """

    if profile not in _PROFILE_SIZES:
        raise ContractViolationError(f"unknown profile {profile!r}")
    size, default_trials = _PROFILE_SIZES[profile]

    wavelength = SPEED_OF_LIGHT / carrier
    spacing = spacing_wavelengths * wavelength
    cfg_tx = ArrayConfig(size if n_tx is None else n_tx, spacing, wavelength)
    cfg_rx = ArrayConfig(size if n_rx is None else n_rx, spacing, wavelength)

    if users is None:
        users = tuple(
            complete_user(master_seed, k, location, wavelength, n_paths) for k, location in enumerate(user_locations)
        )

    return Scenario(
        cfg_tx,
        cfg_rx,
        carrier,
        tuple(users),
        TargetTruth.from_tx(beta, target, cfg_tx, cfg_rx),
        transmit_power,
        trials=default_trials if trials is None else trials,
        master_seed=master_seed,
        **options,  # pyright: ignore[reportArgumentType]
    )
