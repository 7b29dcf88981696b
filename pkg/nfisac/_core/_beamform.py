from __future__ import annotations

__all__ = [
    "AmResult",
    "beampattern_at",
    "beampattern_far",
    "beampattern_near",
    "design_precoder",
    "ls_solution",
    "opp_aux",
    "radar_precoder",
    "tradeoff_am",
    "tradeoff_ls",
    "tradeoff_objective",
    "tx_covariance",
    "zf_precoder",
]

import math
from dataclasses import dataclass
from typing import Literal, final
from warnings import warn

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike

from ._channel import ChannelMatrix, ChannelModel
from ._geometry import ArrayConfig, PolarCoord, far_steering, near_focusing, near_focusing_grid
from ._precoder import AuxiliaryRow, Precoder, TradeoffWeight, precoder_entries
from .._utils import (
    CMatrix,
    ContractViolationError,
    ConvergenceWarning,
    RankDeficiencyError,
    RMatrix,
    RVector,
    as_cmatrix,
    is_hermitian,
    pinv,
    svd,
)

_RANK_RTOL = 1e-10


def zf_precoder(h: ChannelMatrix, transmit_power: float, /) -> Precoder:
    """
    Zero-forcing precoder `H^H (H H^H)^-1`, scaled to the power budget.

    Raises `RankDeficiencyError` naming the rows involved when `H` does
    not have full row rank.
    """

    entries = h.entries
    k, n = entries.shape
    if k > n:
        raise RankDeficiencyError(range(k))

    u, s, _ = svd(entries)
    deficient = s <= _RANK_RTOL * s[0] if s[0] > 0 else np.ones_like(s, dtype=np.bool_)
    if np.any(deficient):
        null_rows = np.abs(u[:, : s.size][:, deficient]) > 1e-8
        raise RankDeficiencyError(np.nonzero(np.any(null_rows, axis=1))[0].tolist())

    gram = entries @ entries.conj().T
    f_zf = entries.conj().T @ scipy.linalg.solve(gram, np.eye(k, dtype=np.complex128), assume_a="her")
    return Precoder.normalized(f_zf, transmit_power)


def radar_precoder(cfg: ArrayConfig, target: PolarCoord, transmit_power: float, model: ChannelModel, /) -> Precoder:
    """
    Single-beam radar precoder matched to the response of the target.

    The near model focuses on `(range, angle)`; the far model steers
    towards `angle` only.
    """

    a = near_focusing(cfg, target) if model == "near" else far_steering(cfg, target.angle)
    return Precoder.normalized(a, transmit_power)


def opp_aux(f_rad: Precoder | ArrayLike, f_com: Precoder | ArrayLike, /) -> AuxiliaryRow:
    """
    Unit-norm row `F_u` minimizing `||F_com - F_rad F_u||_F`, from the
    SVD of `F_rad^H F_com`.

    Examples
    --------
    >>> f_u = opp_aux(np.array([[1.0], [0.0]]), np.array([[0.0, 2.0], [1.0, 0.0]]))
    >>> np.abs(f_u.entries).round(12).tolist()
    [[0.0, 1.0]]
    """

    rad = precoder_entries(f_rad)
    com = precoder_entries(f_com)
    if rad.shape[1] != 1:
        raise ContractViolationError(f"radar precoder must be a single column, got {rad.shape}")
    if rad.shape[0] != com.shape[0]:
        raise ContractViolationError(f"antenna counts differ: {rad.shape[0]} and {com.shape[0]}")

    cross = rad.conj().T @ com
    u, s, v = svd(cross)
    if s[0] <= np.finfo(np.float64).tiny:
        row = np.zeros((1, com.shape[1]), dtype=np.complex128)
        row[0, 0] = 1.0
        return AuxiliaryRow(row)

    row = u[:, :1] @ v[:, :1].conj().T
    return AuxiliaryRow(row / np.linalg.norm(row))


def tradeoff_objective(
    f: Precoder | ArrayLike,
    f_u: AuxiliaryRow,
    f_com: Precoder | ArrayLike,
    f_rad: Precoder | ArrayLike,
    eta: float,
    /,
) -> float:
    """
    `eta ||F - F_com||^2 + (1 - eta) ||F - F_rad F_u||^2`.
    """

    matrix = precoder_entries(f)
    radar = precoder_entries(f_rad) @ f_u.entries
    return float(
        eta * np.linalg.norm(matrix - precoder_entries(f_com)) ** 2 + (1.0 - eta) * np.linalg.norm(matrix - radar) ** 2
    )


def ls_solution(
    f_com: Precoder | ArrayLike,
    f_rad: Precoder | ArrayLike,
    f_u: AuxiliaryRow,
    eta: float,
    /,
    method: Literal["closed", "pinv"] = "closed",
) -> CMatrix:
    """
    Unconstrained least-squares fit `A^+ B` with the stacked forms
    `A = [sqrt(eta) I; sqrt(1 - eta) I]` and
    `B = [sqrt(eta) F_com; sqrt(1 - eta) F_rad F_u]`.

    Since `A^H A = I`, `method="closed"` evaluates the collapsed form
    `eta F_com + (1 - eta) F_rad F_u`; `method="pinv"` builds `A` and
    applies the pseudo-inverse.
    """

    weight = TradeoffWeight(eta)
    com = precoder_entries(f_com)
    radar = precoder_entries(f_rad) @ f_u.entries
    if radar.shape != com.shape:
        raise ContractViolationError(f"shapes differ: {radar.shape} and {com.shape}")

    if method == "closed":
        return weight.eta * com + (1.0 - weight.eta) * radar

    n = com.shape[0]
    identity = np.eye(n, dtype=np.complex128)
    a = np.vstack([math.sqrt(weight.eta) * identity, math.sqrt(1.0 - weight.eta) * identity])
    b = np.vstack([math.sqrt(weight.eta) * com, math.sqrt(1.0 - weight.eta) * radar])
    return pinv(a) @ b


def tradeoff_ls(
    f_com: Precoder,
    f_rad: Precoder,
    eta: float,
    transmit_power: float,
    /,
    *,
    aux: AuxiliaryRow | None = None,
    method: Literal["closed", "pinv"] = "closed",
) -> Precoder:
    """
    Weighted trade-off precoder, solved once in closed form and scaled
    onto the power constraint.

    `aux` defaults to `opp_aux(f_rad, f_com)`.
    """

    weight = TradeoffWeight(eta)
    if aux is None:
        aux = opp_aux(f_rad, f_com)

    if weight.eta == 1.0:
        return Precoder.normalized(f_com.entries, transmit_power)
    if weight.eta == 0.0:
        return Precoder.normalized(f_rad.entries @ aux.entries, transmit_power)

    return Precoder.normalized(ls_solution(f_com, f_rad, aux, weight.eta, method), transmit_power)


@final
@dataclass(frozen=True, eq=False)
class AmResult:
    precoder: Precoder
    aux: AuxiliaryRow
    objective_trace: tuple[float, ...]
    converged: bool

    @property
    def iterations(self, /) -> int:
        return len(self.objective_trace) - 1

    @property
    def objective(self, /) -> float:
        return self.objective_trace[-1]


def tradeoff_am(
    f_com: Precoder,
    f_rad: Precoder,
    eta: float,
    transmit_power: float,
    /,
    epsilon: float = 1e-6,
    k_max: int = 100,
    *,
    aux: AuxiliaryRow | None = None,
    rng: np.random.Generator | None = None,
) -> AmResult:
    """
    Weighted trade-off precoder by alternating minimization.

    Each iteration re-fits `F_u` to the current precoder and then solves
    the power-constrained least-squares step. Iteration stops once the
    objective changes by at most `epsilon`, or after `k_max` iterations
    with a `ConvergenceWarning`.

    `F_u` starts from `opp_aux(f_rad, f_com)`, the row `tradeoff_ls`
    uses. That start is a fixed point of the iteration, so the default
    result agrees with `tradeoff_ls`. Pass `aux` for another starting
    row, or `rng` for a random unit row.
    """

    weight = TradeoffWeight(eta)
    if not epsilon > 0:
        raise ContractViolationError(f"tolerance must be positive, got {epsilon}")
    if k_max < 1:
        raise ContractViolationError(f"iteration limit must be positive, got {k_max}")
    if aux is not None and rng is not None:
        raise ContractViolationError("give either a starting row or a generator, not both")

    n_streams = f_com.n_streams
    if rng is not None:
        row = rng.standard_normal((1, n_streams)) + 1j * rng.standard_normal((1, n_streams))
        aux = AuxiliaryRow(row / np.linalg.norm(row))
    elif aux is None:
        aux = opp_aux(f_rad, f_com)
    elif aux.entries.shape != (1, n_streams):
        raise ContractViolationError(f"starting row must have shape (1, {n_streams}), got {aux.entries.shape}")

    if weight.is_endpoint:
        if weight.eta == 0.0:
            aux = opp_aux(f_rad, f_com)
        precoder = tradeoff_ls(f_com, f_rad, weight.eta, transmit_power, aux=aux)
        objective = tradeoff_objective(precoder, aux, f_com, f_rad, weight.eta)
        return AmResult(precoder, aux, (objective,), True)

    precoder = Precoder.normalized(ls_solution(f_com, f_rad, aux, weight.eta), transmit_power)
    trace = [tradeoff_objective(precoder, aux, f_com, f_rad, weight.eta)]

    for _ in range(k_max):
        aux = opp_aux(f_rad, precoder)
        precoder = Precoder.normalized(ls_solution(f_com, f_rad, aux, weight.eta), transmit_power)
        trace.append(tradeoff_objective(precoder, aux, f_com, f_rad, weight.eta))
        if abs(trace[-1] - trace[-2]) <= epsilon:
            return AmResult(precoder, aux, tuple(trace), True)

    warn(f"alternating minimization did not converge within {k_max} iterations", ConvergenceWarning, 2)
    return AmResult(precoder, aux, tuple(trace), False)


def design_precoder(
    h: ChannelMatrix,
    cfg: ArrayConfig,
    target: PolarCoord,
    transmit_power: float,
    eta: float,
    /,
    algorithm: Literal["ls", "am"] = "ls",
    *,
    epsilon: float = 1e-6,
    k_max: int = 100,
) -> Precoder:
    """
    Full design pipeline of one model: ZF communication precoder on `h`,
    radar beam towards `target` under the model of `h`, then the
    weighted trade-off.
    """

    f_com = zf_precoder(h, transmit_power)
    f_rad = radar_precoder(cfg, target, transmit_power, h.model)
    if algorithm == "am":
        return tradeoff_am(f_com, f_rad, eta, transmit_power, epsilon, k_max).precoder

    return tradeoff_ls(f_com, f_rad, eta, transmit_power)


def tx_covariance(f: Precoder | ArrayLike, /) -> CMatrix:
    matrix = precoder_entries(f)
    return matrix @ matrix.conj().T


def _check_covariance(r_x: ArrayLike, n: int, /) -> CMatrix:
    matrix = as_cmatrix(r_x, name="covariance")
    if matrix.shape != (n, n):
        raise ContractViolationError(f"covariance must be {n}x{n}, got {matrix.shape}")
    if not is_hermitian(matrix):
        raise ContractViolationError("covariance must be Hermitian")

    return matrix


def _quadratic_forms(r_x: CMatrix, vectors: CMatrix, /) -> RVector:
    values = np.real(np.sum(vectors.conj() * (r_x @ vectors), axis=0))
    return np.clip(values, 0.0, None)


def beampattern_far(r_x: ArrayLike, cfg: ArrayConfig, angles: ArrayLike, /) -> RVector:
    """
    Transmitted power `a(theta)^H R_x a(theta)` towards each angle.
    """

    matrix = _check_covariance(r_x, cfg.n_elements)
    thetas = np.atleast_1d(np.asarray(angles, dtype=np.float64))
    vectors = np.hstack([far_steering(cfg, float(t)) for t in thetas])
    return _quadratic_forms(matrix, vectors)


def beampattern_near(r_x: ArrayLike, cfg: ArrayConfig, ranges: ArrayLike, angles: ArrayLike, /) -> RMatrix:
    """
    Transmitted power `a(r, theta)^H R_x a(r, theta)` over a range-angle
    grid, shaped `(len(ranges), len(angles))`.
    """

    matrix = _check_covariance(r_x, cfg.n_elements)
    r = np.atleast_1d(np.asarray(ranges, dtype=np.float64))
    t = np.atleast_1d(np.asarray(angles, dtype=np.float64))
    if np.any(r <= 0) or np.any(np.abs(t) >= math.pi / 2):
        raise ContractViolationError("beampattern grid must have positive ranges and angles inside (-pi/2, pi/2)")

    return _quadratic_forms(matrix, near_focusing_grid(cfg, r, t)).reshape(r.size, t.size)


def beampattern_at(r_x: ArrayLike, cfg: ArrayConfig, p: PolarCoord, /) -> float:
    return float(beampattern_near(r_x, cfg, [p.range], [p.angle])[0, 0])
