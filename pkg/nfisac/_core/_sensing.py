from __future__ import annotations

__all__ = [
    "EchoBatch",
    "MusicEstimate",
    "MusicGrid",
    "TargetTruth",
    "detect",
    "detection_statistic",
    "music_estimate",
    "music_search",
    "music_spectrum",
    "noise_subspace",
    "rx_focusing",
    "sample_covariance",
    "steering_dictionary",
    "synthesize_echo",
    "synthesize_symbols",
    "threshold_from_pfa",
]

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal, final

import numpy as np
import scipy.optimize
import scipy.stats
from numpy.typing import ArrayLike

from ._geometry import (
    ArrayConfig,
    PolarCoord,
    array_offset,
    bistatic_rx,
    bistatic_tx,
    near_focusing,
    near_focusing_grid,
)
from ._precoder import Precoder, precoder_entries
from .._utils import CMatrix, ContractViolationError, GeometryError, RMatrix, RVector, as_cmatrix, hermitian_eig

_SPECTRUM_FLOOR = 1e-15
_FLAT_PEAK_RATIO = 1.5
_CALIBRATION_CHUNK = 1 << 16
_POLISH_XATOL = 1e-4
_POLISH_MAX_ITER = 400


@final
@dataclass(frozen=True)
class TargetTruth:
    """
    A point target with reflection coefficient `beta` (path loss
    included), seen at `tx` from the transmit array and at `rx` from the
    receive array, whose centers are `offset` meters apart.
    """

    beta: complex
    tx: PolarCoord
    rx: PolarCoord
    offset: float

    def __post_init__(self, /) -> None:
        object.__setattr__(self, "beta", complex(self.beta))
        if not math.isfinite(abs(self.beta)):
            raise ContractViolationError("reflection coefficient must be finite")

        expected = bistatic_rx(self.tx, self.offset)
        if not (
            math.isclose(expected.range, self.rx.range, rel_tol=1e-10)
            and math.isclose(expected.angle, self.rx.angle, rel_tol=1e-10, abs_tol=1e-12)
        ):
            raise GeometryError(f"receive coordinates {self.rx} do not match transmit coordinates {self.tx}")

    @classmethod
    def from_tx(cls, beta: complex, tx: PolarCoord, cfg_tx: ArrayConfig, cfg_rx: ArrayConfig, /) -> TargetTruth:
        offset = array_offset(cfg_tx, cfg_rx)
        return cls(beta, tx, bistatic_rx(tx, offset), offset)

    @classmethod
    def from_rx(cls, beta: complex, rx: PolarCoord, cfg_tx: ArrayConfig, cfg_rx: ArrayConfig, /) -> TargetTruth:
        offset = array_offset(cfg_tx, cfg_rx)
        return cls(beta, bistatic_tx(rx, offset), rx, offset)


@final
@dataclass(frozen=True, eq=False)
class EchoBatch:
    """
    `L` snapshots of the received radar echo (N_r×L) and the noise power
    they were generated with.
    """

    y: CMatrix
    noise_power: float
    truth: TargetTruth | None = None

    def __post_init__(self, /) -> None:
        object.__setattr__(self, "y", as_cmatrix(self.y, name="echo"))
        if not (math.isfinite(self.noise_power) and self.noise_power >= 0):
            raise ContractViolationError(f"noise power must be non-negative, got {self.noise_power}")

    @property
    def snapshots(self, /) -> int:
        return self.y.shape[1]


@final
@dataclass(frozen=True, eq=False)
class MusicGrid:
    """
    Receive-side search grid of strictly increasing ranges (m) and
    angles (rad).
    """

    ranges: RVector
    angles: RVector

    def __post_init__(self, /) -> None:
        ranges = np.array(self.ranges, dtype=np.float64, ndmin=1)
        angles = np.array(self.angles, dtype=np.float64, ndmin=1)
        for name, axis in (("ranges", ranges), ("angles", angles)):
            if axis.ndim != 1 or axis.size == 0:
                raise ContractViolationError(f"grid {name} must be a non-empty vector")
            if np.any(np.diff(axis) <= 0):
                raise ContractViolationError(f"grid {name} must be strictly increasing")
        if ranges[0] <= 0:
            raise ContractViolationError("grid ranges must be positive")
        if np.any(np.abs(angles) >= math.pi / 2):
            raise ContractViolationError("grid angles must lie strictly inside (-pi/2, pi/2)")

        ranges.setflags(write=False)
        angles.setflags(write=False)
        object.__setattr__(self, "ranges", ranges)
        object.__setattr__(self, "angles", angles)

    @classmethod
    def uniform(
        cls,
        range_min: float,
        range_max: float,
        range_step: float,
        angle_min: float,
        angle_max: float,
        angle_step: float,
    ) -> MusicGrid:
        """
        Grid from `min` to `max` inclusive (up to rounding) at the given
        steps; angles in radians.

        Examples
        --------
        >>> MusicGrid.uniform(1.0, 2.0, 0.5, -0.1, 0.1, 0.1).ranges.tolist()
        [1.0, 1.5, 2.0]
        """

        return cls(_uniform_axis(range_min, range_max, range_step), _uniform_axis(angle_min, angle_max, angle_step))

    @property
    def shape(self, /) -> tuple[int, int]:
        return self.ranges.size, self.angles.size

    def subgrid(self, range_slice: slice, angle_slice: slice, /) -> MusicGrid:
        return MusicGrid(self.ranges[range_slice], self.angles[angle_slice])


def _uniform_axis(start: float, stop: float, step: float, /) -> RVector:
    if not step > 0:
        raise ContractViolationError(f"grid step must be positive, got {step}")

    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(count)


@final
@dataclass(frozen=True)
class MusicEstimate:
    rx: PolarCoord
    tx: PolarCoord
    peak_ratio: float


def synthesize_symbols(rng: np.random.Generator, n_streams: int, snapshots: int, /) -> CMatrix:
    """
    Unit-modulus QPSK symbols (N_s×L), independent across streams and
    snapshots so that `E[S S^H] / L = I`.
    """

    if n_streams < 1 or snapshots < 1:
        raise ContractViolationError(f"symbol block must be non-empty, got {n_streams}x{snapshots}")

    quadrant = rng.integers(0, 4, size=(n_streams, snapshots))
    return np.exp(1j * (math.pi / 4 + quadrant * (math.pi / 2)))


def rx_focusing(cfg_rx: ArrayConfig, p: PolarCoord, /) -> CMatrix:
    """
    Focusing vector of the receive array towards `p` (N_r×1).
    """

    return near_focusing(cfg_rx, p)


def synthesize_echo(
    f: Precoder | ArrayLike,
    s: ArrayLike,
    truth: TargetTruth,
    cfg_tx: ArrayConfig,
    cfg_rx: ArrayConfig,
    noise_power: float,
    /,
    rng: np.random.Generator | None = None,
) -> EchoBatch:
    """
    Received echo `beta b(r_r, theta_r) a^H(r_t, theta_t) F S + Z`, with
    `Z` circularly-symmetric Gaussian of per-entry variance
    `noise_power`.
    """

    precoder = precoder_entries(f)
    symbols = as_cmatrix(s, name="symbols")
    if precoder.shape[0] != cfg_tx.n_elements or precoder.shape[1] != symbols.shape[0]:
        raise ContractViolationError(
            f"precoder {precoder.shape} and symbols {symbols.shape} do not fit {cfg_tx.n_elements} antennas"
        )

    a = near_focusing(cfg_tx, truth.tx)
    b = rx_focusing(cfg_rx, truth.rx)
    y = truth.beta * b @ (a.conj().T @ precoder @ symbols)

    if noise_power > 0:
        if rng is None:
            raise ContractViolationError("a generator is required to draw noise")
        scale = math.sqrt(noise_power / 2.0)
        y = y + scale * (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape))
    elif noise_power < 0:
        raise ContractViolationError(f"noise power must be non-negative, got {noise_power}")

    return EchoBatch(y, noise_power, truth)


def sample_covariance(echo: EchoBatch, /) -> CMatrix:
    y = echo.y
    return (y @ y.conj().T) / echo.snapshots


def noise_subspace(r_y: ArrayLike, /, n_sources: int = 1) -> CMatrix:
    """
    Orthonormal basis (N_r×(N_r - M)) of the eigenvectors belonging to
    the `N_r - M` smallest eigenvalues.
    """

    matrix = as_cmatrix(r_y, name="covariance")
    n = matrix.shape[0]
    if not 1 <= n_sources < n:
        raise ContractViolationError(f"source count must lie in [1, {n - 1}], got {n_sources}")

    _, vectors = hermitian_eig(matrix)
    return vectors[:, n_sources:]


@lru_cache(maxsize=8)
def _cached_dictionary(cfg_rx: ArrayConfig, ranges: tuple[float, ...], angles: tuple[float, ...], /) -> CMatrix:
    dictionary = near_focusing_grid(cfg_rx, np.array(ranges), np.array(angles))
    dictionary.setflags(write=False)
    return dictionary


def steering_dictionary(cfg_rx: ArrayConfig, grid: MusicGrid, /) -> CMatrix:
    """
    Receive focusing vectors of every grid cell (N_r×cells, range-major).

    Results are cached and read-only, so repeated Monte-Carlo trials on
    one grid share them.
    """

    return _cached_dictionary(cfg_rx, tuple(grid.ranges.tolist()), tuple(grid.angles.tolist()))


def _spectrum(q_n: CMatrix, dictionary: CMatrix, /) -> RVector:
    projected = q_n.conj().T @ dictionary
    denominator = np.sum(np.abs(projected) ** 2, axis=0)
    floor = _SPECTRUM_FLOOR * q_n.shape[0]
    return 1.0 / np.maximum(denominator, floor)


def music_spectrum(q_n: ArrayLike, grid: MusicGrid, cfg_rx: ArrayConfig, /) -> RMatrix:
    """
    `1 / (b^H Q_N Q_N^H b)` over the grid, shaped like `grid`.

    The denominator is floored at a tiny positive value so the spectrum
    stays finite at exact noise-free peaks.
    """

    basis = as_cmatrix(q_n, name="noise subspace")
    if basis.shape[0] != cfg_rx.n_elements:
        raise ContractViolationError(f"noise subspace has {basis.shape[0]} rows, expected {cfg_rx.n_elements}")

    rows = [
        _spectrum(basis, near_focusing_grid(cfg_rx, np.array([r]), grid.angles)) for r in grid.ranges.tolist()
    ]
    return np.vstack(rows)


def _parabolic_offset(left: float, center: float, right: float, /) -> float:
    curvature = left - 2.0 * center + right
    if curvature >= 0:
        return 0.0

    return float(np.clip(0.5 * (left - right) / curvature, -0.5, 0.5))


def _refine_axis(axis: RVector, values: RVector, index: int, /) -> float:
    if index == 0 or index == axis.size - 1:
        return float(axis[index])

    shift = _parabolic_offset(float(values[index - 1]), float(values[index]), float(values[index + 1]))
    step = float(axis[index + 1] - axis[index]) if shift > 0 else float(axis[index] - axis[index - 1])
    return float(axis[index]) + shift * step


def music_estimate(
    spectrum: ArrayLike,
    grid: MusicGrid,
    cfg_tx: ArrayConfig,
    cfg_rx: ArrayConfig,
    /,
    *,
    parabolic: bool = False,
    peak_ratio: float | None = None,
) -> MusicEstimate | None:
    """
    Peak of a MUSIC spectrum as receive coordinates and, through the
    bistatic relation, transmit coordinates.

    Returns `None` for a flat spectrum (peak below 1.5 times the median).
    `peak_ratio` overrides the ratio measured on `spectrum`, for callers
    that judge flatness on a coarser grid.
    """

    values = np.asarray(spectrum, dtype=np.float64)
    if values.shape != grid.shape:
        raise ContractViolationError(f"spectrum shape {values.shape} does not match grid {grid.shape}")

    i, j = np.unravel_index(int(np.argmax(values)), values.shape)
    ratio = float(values[i, j] / np.median(values)) if peak_ratio is None else peak_ratio
    if not ratio >= _FLAT_PEAK_RATIO:
        return None

    if parabolic:
        r = _refine_axis(grid.ranges, values[:, j], int(i))
        theta = _refine_axis(grid.angles, values[i, :], int(j))
    else:
        r, theta = float(grid.ranges[i]), float(grid.angles[j])

    rx = PolarCoord(r, theta)
    try:
        tx = bistatic_tx(rx, array_offset(cfg_tx, cfg_rx))
    except GeometryError:
        return None

    return MusicEstimate(rx, tx, ratio)


def _polish_peak(q_n: CMatrix, cfg_rx: ArrayConfig, grid: MusicGrid, rx: PolarCoord, /) -> PolarCoord:
    """
    Minimizes the MUSIC denominator `||Q_N^H b(r, theta)||^2` from the
    peak cell `rx` over the extent of `grid`, by bounded Nelder-Mead in
    cell units.
    """

    if min(grid.shape) < 2:
        return rx

    def denominator(r: float, theta: float, /) -> float:
        b = near_focusing_grid(cfg_rx, np.array([r]), np.array([theta]))
        return float(np.sum(np.abs(q_n.conj().T @ b) ** 2))

    start = denominator(rx.range, rx.angle)
    if start <= _SPECTRUM_FLOOR * q_n.shape[0]:
        return rx

    center = np.array([rx.range, rx.angle])
    step = np.array([np.min(np.diff(grid.ranges)), np.min(np.diff(grid.angles))])
    low = (np.array([grid.ranges[0], grid.angles[0]]) - center) / step
    high = (np.array([grid.ranges[-1], grid.angles[-1]]) - center) / step

    def objective(u: RVector, /) -> float:
        r, theta = center + u * step
        return denominator(float(r), float(theta)) / start

    # First moves point into the grid, also from a peak on its edge.
    moves = np.where(high >= 0.5, 0.5, -0.5)
    simplex = np.array([[0.0, 0.0], [moves[0], 0.0], [0.0, moves[1]]])
    result = scipy.optimize.minimize(
        objective,
        np.zeros(2),
        method="Nelder-Mead",
        bounds=list(zip(low, high)),
        options={"initial_simplex": simplex, "xatol": _POLISH_XATOL, "fatol": 1e-12, "maxiter": _POLISH_MAX_ITER},
    )
    if not result.fun < 1.0:
        return rx

    r, theta = np.clip(center + result.x * step, [grid.ranges[0], grid.angles[0]], [grid.ranges[-1], grid.angles[-1]])
    return PolarCoord(float(r), float(theta))


def music_search(
    r_y: ArrayLike,
    grid: MusicGrid,
    cfg_tx: ArrayConfig,
    cfg_rx: ArrayConfig,
    /,
    *,
    refinement: int = 10,
    window: int = 2,
    parabolic: bool = False,
    polish: bool = False,
    n_sources: int = 1,
) -> MusicEstimate | None:
    """
    Two-stage MUSIC peak search.

    The spectrum is first evaluated on every `refinement`-th cell of
    `grid`, then on the full-resolution cells within `window` coarse
    steps of the coarse peak.

    With `polish`, the peak cell is refined off the grid by a local
    minimization of the MUSIC denominator, which replaces the parabolic
    step and removes the grid-quantization floor of the estimates.
    """

    if refinement < 1 or window < 1:
        raise ContractViolationError(f"refinement and window must be positive, got {refinement}, {window}")

    q_n = noise_subspace(r_y, n_sources)
    coarse = grid.subgrid(slice(None, None, refinement), slice(None, None, refinement))
    coarse_values = _spectrum(q_n, steering_dictionary(cfg_rx, coarse)).reshape(coarse.shape)

    i, j = np.unravel_index(int(np.argmax(coarse_values)), coarse.shape)
    ratio = float(coarse_values[i, j] / np.median(coarse_values))

    n_r, n_t = grid.shape
    radius = window * refinement
    ci, cj = int(i) * refinement, int(j) * refinement
    range_slice = slice(max(ci - radius, 0), min(ci + radius + 1, n_r))
    angle_slice = slice(max(cj - radius, 0), min(cj + radius + 1, n_t))
    fine = grid.subgrid(range_slice, angle_slice)
    fine_values = music_spectrum(q_n, fine, cfg_rx)

    estimate = music_estimate(fine_values, fine, cfg_tx, cfg_rx, parabolic=parabolic and not polish, peak_ratio=ratio)
    if estimate is None or not polish:
        return estimate

    rx = _polish_peak(q_n, cfg_rx, fine, estimate.rx)
    try:
        tx = bistatic_tx(rx, array_offset(cfg_tx, cfg_rx))
    except GeometryError:
        return None

    return MusicEstimate(rx, tx, estimate.peak_ratio)


def detection_statistic(echo: EchoBatch, cfg_rx: ArrayConfig, candidate: PolarCoord, /) -> float:
    """
    Normalized matched-subspace energy `||b^H Y||^2 / (N_r sigma^2 L)`,
    distributed as Gamma(L, 1/L) under noise only.
    """

    if echo.noise_power <= 0:
        raise ContractViolationError("the detection statistic needs a positive noise power")

    b = rx_focusing(cfg_rx, candidate)
    energy = float(np.sum(np.abs(b.conj().T @ echo.y) ** 2))
    return energy / (cfg_rx.n_elements * echo.noise_power * echo.snapshots)


def detect(echo: EchoBatch, cfg_rx: ArrayConfig, candidate: PolarCoord, threshold: float, /) -> bool:
    return detection_statistic(echo, cfg_rx, candidate) > threshold


def _check_pfa(pfa: float, /) -> None:
    if not 0.0 < pfa < 1.0:
        raise ContractViolationError(f"false-alarm probability must lie in (0, 1), got {pfa}")


def threshold_from_pfa(
    pfa: float,
    snapshots: int,
    /,
    draws: int = 1_000_000,
    rng: np.random.Generator | None = None,
    *,
    method: Literal["empirical", "analytic"] = "empirical",
) -> float:
    """
    Detection threshold for a false-alarm probability `pfa`.

    The empirical method takes the `1 - pfa` quantile of `draws`
    noise-only statistics; the analytic one the same quantile of
    Gamma(L, 1/L), i.e. `chi2(2L) / (2L)`.

    Examples
    --------
    >>> round(threshold_from_pfa(0.5, 1, method="analytic"), 6)
    0.693147
    """

    _check_pfa(pfa)
    if snapshots < 1:
        raise ContractViolationError(f"snapshot count must be positive, got {snapshots}")

    if method == "analytic":
        return float(scipy.stats.gamma.isf(pfa, snapshots, scale=1.0 / snapshots))

    if rng is None:
        raise ContractViolationError("a generator is required for empirical calibration")
    if draws * pfa < 10:
        raise ContractViolationError(f"{draws} draws are too few to calibrate a false-alarm probability of {pfa}")

    chunks: list[RVector] = []
    remaining = draws
    while remaining > 0:
        n = min(remaining, _CALIBRATION_CHUNK)
        z = rng.standard_normal((n, snapshots, 2))
        chunks.append(np.sum(z**2, axis=(1, 2)) / (2.0 * snapshots))
        remaining -= n

    return float(np.quantile(np.concatenate(chunks), 1.0 - pfa))
