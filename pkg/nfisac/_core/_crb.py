from __future__ import annotations

__all__ = [
    "CrbReport",
    "CrbStatus",
    "EstimationParams",
    "FimBlocks",
    "TraceTerms",
    "crb_matrix",
    "crb_range_known_angle",
    "crb_report",
    "crb_theta_known_range",
    "fim_blocks",
    "g_derivatives",
    "g_matrix",
    "snr_r",
    "target_power_to_trace",
]

import math
from dataclasses import dataclass
from typing import Literal, TypeAlias, final
from warnings import warn

import numpy as np
from numpy.typing import ArrayLike

from ._geometry import ArrayConfig, PolarCoord, focusing_derivatives, near_focusing
from ._sensing import TargetTruth
from .._utils import CMatrix, ContractViolationError, CrbConsistencyWarning, RMatrix, as_cmatrix, is_hermitian, pinv

CrbStatus: TypeAlias = Literal["finite", "rank_deficient", "infinite"]

_FD_RANGE_STEP = 1e-4
_FD_ANGLE_STEP = 1e-6
_CONSISTENCY_RTOL = 1e-6
_DEGENERATE_RTOL = 1e-12


@final
@dataclass(frozen=True)
class EstimationParams:
    """
    Unknowns of the estimation problem: target range and angle at the
    transmit array, and the real and imaginary parts of `beta`.
    """

    r_t: float
    theta_t: float
    beta_re: float
    beta_im: float

    def __post_init__(self, /) -> None:
        if not self.r_t > 0:
            raise ContractViolationError(f"target range must be positive, got {self.r_t}")

    @classmethod
    def from_truth(cls, truth: TargetTruth, /) -> EstimationParams:
        return cls(truth.tx.range, truth.tx.angle, truth.beta.real, truth.beta.imag)


@final
@dataclass(frozen=True, eq=False)
class TraceTerms:
    """
    Trace quantities shared by the bound formulas:
    `T = tr(G R_x G^H)`, `t_l = tr(G R_x Gdot_l^H)` and
    `D[l, p] = tr(Gdot_p R_x Gdot_l^H)`, plus the scalars they are
    scaled with.
    """

    total: float
    cross: CMatrix
    derivative: CMatrix
    beta: complex
    snapshots: int
    noise_power: float
    transmit_power: float
    total_bound: float

    @property
    def reaches_target(self, /) -> bool:
        """
        Whether any power illuminates the target, judged against the
        largest possible `T = ||G||_F^2 tr(R_x)`.
        """

        return self.beta != 0 and self.total > _DEGENERATE_RTOL * self.total_bound


@final
@dataclass(frozen=True, eq=False)
class FimBlocks:
    """
    Fisher information of `[r_t, theta_t, Re beta, Im beta]` split into
    its 2×2 blocks.
    """

    J_phiphi: RMatrix
    J_phibeta: RMatrix
    J_betabeta: RMatrix
    terms: TraceTerms


@final
@dataclass(frozen=True, eq=False)
class CrbReport:
    """
    Bound on `(r_t, theta_t)` together with every scalar it depends on.

    `status` is `"infinite"` when no information reaches the target (all
    bounds are `inf`), and `"rank_deficient"` when the pseudo-inverse
    had to drop a direction.
    """

    crb_matrix: RMatrix
    crb_r: float
    crb_theta: float
    snr_r: float
    status: CrbStatus
    beta: complex
    snapshots: int
    noise_power: float
    transmit_power: float

    @property
    def rcrb_r(self, /) -> float:
        return math.sqrt(self.crb_r)

    @property
    def rcrb_theta(self, /) -> float:
        return math.sqrt(self.crb_theta)


def g_matrix(truth: TargetTruth, cfg_tx: ArrayConfig, cfg_rx: ArrayConfig, /) -> CMatrix:
    """
    Rank-one round-trip response `G = b(r_r, theta_r) a^H(r_t, theta_t)`.
    """

    a = near_focusing(cfg_tx, truth.tx)
    b = near_focusing(cfg_rx, truth.rx)
    return b @ a.conj().T


def _rx_jacobian(truth: TargetTruth, /) -> tuple[float, float, float, float]:
    # Derivatives of (r_r, theta_r) with respect to (r_t, theta_t).
    o = truth.offset
    r_t, s_t, c_t = truth.tx.range, math.sin(truth.tx.angle), math.cos(truth.tx.angle)
    r_r, c_r = truth.rx.range, math.cos(truth.rx.angle)
    numerator = o - r_t * s_t

    drr_drt = (r_t - o * s_t) / r_r
    drr_dtt = -o * r_t * c_t / r_r
    dsr_drt = (-s_t * r_r - numerator * drr_drt) / r_r**2
    dsr_dtt = (-r_t * c_t * r_r - numerator * drr_dtt) / r_r**2

    return drr_drt, drr_dtt, dsr_drt / c_r, dsr_dtt / c_r


def g_derivatives(
    truth: TargetTruth,
    cfg_tx: ArrayConfig,
    cfg_rx: ArrayConfig,
    /,
    mode: Literal["analytic", "finite_difference"] = "analytic",
) -> tuple[CMatrix, CMatrix]:
    """
    Total derivatives `(dG/dr_t, dG/dtheta_t)`.

    Both the transmit response and, through the bistatic relation, the
    receive response move with the target. `"finite_difference"` uses
    central differences with steps `1e-4 * r_t` and `1e-6` rad.
    """

    if mode == "finite_difference":
        return _g_derivatives_fd(truth, cfg_tx, cfg_rx)
    if mode != "analytic":
        raise ContractViolationError(f"unknown derivative mode {mode!r}")

    a = near_focusing(cfg_tx, truth.tx)
    b = near_focusing(cfg_rx, truth.rx)
    da_dr, da_dt = focusing_derivatives(cfg_tx, truth.tx)
    db_dr, db_dt = focusing_derivatives(cfg_rx, truth.rx)
    drr_drt, drr_dtt, dtr_drt, dtr_dtt = _rx_jacobian(truth)

    db_drt = db_dr * drr_drt + db_dt * dtr_drt
    db_dtt = db_dr * drr_dtt + db_dt * dtr_dtt

    g_r = db_drt @ a.conj().T + b @ da_dr.conj().T
    g_t = db_dtt @ a.conj().T + b @ da_dt.conj().T
    return g_r, g_t


def _g_derivatives_fd(truth: TargetTruth, cfg_tx: ArrayConfig, cfg_rx: ArrayConfig, /) -> tuple[CMatrix, CMatrix]:
    r, theta = truth.tx.range, truth.tx.angle
    h_r = _FD_RANGE_STEP * r
    h_t = _FD_ANGLE_STEP

    def at(r_t: float, theta_t: float, /) -> CMatrix:
        moved = TargetTruth.from_tx(truth.beta, PolarCoord(r_t, theta_t), cfg_tx, cfg_rx)
        return g_matrix(moved, cfg_tx, cfg_rx)

    g_r = (at(r + h_r, theta) - at(r - h_r, theta)) / (2.0 * h_r)
    g_t = (at(r, theta + h_t) - at(r, theta - h_t)) / (2.0 * h_t)
    return g_r, g_t


def fim_blocks(
    g: ArrayLike,
    g_r: ArrayLike,
    g_theta: ArrayLike,
    r_x: ArrayLike,
    beta: complex,
    snapshots: int,
    noise_power: float,
    /,
) -> FimBlocks:
    """
    Closed-form Fisher information blocks for the echo model
    `Y = beta G X + W` with `R_x = X X^H / L`.
    """

    if not noise_power > 0:
        raise ContractViolationError(f"noise power must be positive, got {noise_power}")
    if snapshots < 1:
        raise ContractViolationError(f"snapshot count must be positive, got {snapshots}")

    g = as_cmatrix(g, name="G")
    dots = [as_cmatrix(g_r, name="dG/dr"), as_cmatrix(g_theta, name="dG/dtheta")]
    covariance = as_cmatrix(r_x, name="covariance")
    if covariance.shape != (g.shape[1], g.shape[1]) or not is_hermitian(covariance):
        raise ContractViolationError(f"covariance must be Hermitian {g.shape[1]}x{g.shape[1]}")

    beta = complex(beta)
    g_r_x = g @ covariance
    total = float(np.real(np.trace(g_r_x @ g.conj().T)))
    cross = np.array([np.trace(g_r_x @ d.conj().T) for d in dots], dtype=np.complex128)
    derivative = np.array(
        [[np.trace(dots[p] @ covariance @ dots[l].conj().T) for p in range(2)] for l in range(2)], dtype=np.complex128
    )

    scale = 2.0 * snapshots / noise_power
    j_phiphi = scale * abs(beta) ** 2 * np.real(derivative)
    j_phiphi = 0.5 * (j_phiphi + j_phiphi.T)
    weighted = beta.conjugate() * cross
    j_phibeta = scale * np.column_stack([weighted.real, -weighted.imag])
    j_betabeta = scale * total * np.eye(2)

    transmit_power = float(np.real(np.trace(covariance)))
    total_bound = float(np.linalg.norm(g) ** 2) * max(transmit_power, 0.0)
    terms = TraceTerms(total, cross, derivative, beta, snapshots, noise_power, transmit_power, total_bound)
    return FimBlocks(j_phiphi, j_phibeta, j_betabeta, terms)


def snr_r(beta: complex, snapshots: int, transmit_power: float, noise_power: float, /) -> float:
    """
    Radar receive SNR `|beta|^2 L P_t / sigma^2`.

    Examples
    --------
    >>> snr_r(0.5, 4, 2.0, 0.5)
    4.0
    """

    if not noise_power > 0:
        raise ContractViolationError(f"noise power must be positive, got {noise_power}")

    return abs(beta) ** 2 * snapshots * transmit_power / noise_power


def _explicit_crb(terms: TraceTerms, /) -> RMatrix:
    t = terms.cross
    m = np.real(terms.total * terms.derivative - np.outer(t, t.conj()))
    prefactor = terms.noise_power * terms.total / (2.0 * terms.snapshots * abs(terms.beta) ** 2)
    return prefactor * np.real(pinv(0.5 * (m + m.T)))


def crb_matrix(blocks: FimBlocks, /) -> CrbReport:
    """
    Bound on `(r_t, theta_t)` as the pseudo-inverse of the Schur
    complement of the `beta` block.

    The explicit trace form is evaluated as well; a disagreement beyond
    round-off emits `CrbConsistencyWarning`.
    """

    terms = blocks.terms
    snr = snr_r(terms.beta, terms.snapshots, terms.transmit_power, terms.noise_power)

    def report(matrix: RMatrix, status: CrbStatus, /) -> CrbReport:
        return CrbReport(
            matrix,
            float(matrix[0, 0]),
            float(matrix[1, 1]),
            snr,
            status,
            terms.beta,
            terms.snapshots,
            terms.noise_power,
            terms.transmit_power,
        )

    infinite = np.full((2, 2), np.inf)
    j_bb = float(blocks.J_betabeta[0, 0])
    if not terms.reaches_target:
        return report(infinite, "infinite")

    schur = blocks.J_phiphi - blocks.J_phibeta @ blocks.J_phibeta.T / j_bb
    schur = 0.5 * (schur + schur.T)
    eigenvalues = np.linalg.eigvalsh(schur)
    scale = max(float(np.max(np.abs(blocks.J_phiphi))), np.finfo(float).tiny)
    if eigenvalues[-1] <= _DEGENERATE_RTOL * scale:
        return report(infinite, "infinite")

    crb = np.real(pinv(schur))
    crb = 0.5 * (crb + crb.T)
    status: CrbStatus = "rank_deficient" if eigenvalues[0] <= _DEGENERATE_RTOL * scale else "finite"

    explicit = _explicit_crb(terms)
    mismatch = float(np.linalg.norm(explicit - crb)) / max(float(np.linalg.norm(crb)), np.finfo(float).tiny)
    if mismatch > _CONSISTENCY_RTOL:
        warn(f"explicit and Schur-complement bounds differ by {mismatch:.3g} (relative)", CrbConsistencyWarning, 2)

    return report(crb, status)


def _known_parameter_crb(terms: TraceTerms, index: int, /) -> float:
    if not terms.reaches_target:
        return math.inf

    t = terms.cross[index]
    denominator = terms.total * float(np.real(terms.derivative[index, index])) - abs(t) ** 2
    if not denominator > _DEGENERATE_RTOL * terms.total * abs(terms.derivative[index, index]):
        return math.inf

    return terms.noise_power * terms.total / (2.0 * terms.snapshots * abs(terms.beta) ** 2 * denominator)


def crb_theta_known_range(blocks: FimBlocks, /) -> float:
    """
    Bound on the angle when the range is known (`inf` when no
    information reaches the target).
    """

    return _known_parameter_crb(blocks.terms, 1)


def crb_range_known_angle(blocks: FimBlocks, /) -> float:
    """
    Bound on the range when the angle is known.
    """

    return _known_parameter_crb(blocks.terms, 0)


def crb_report(
    truth: TargetTruth,
    cfg_tx: ArrayConfig,
    cfg_rx: ArrayConfig,
    r_x: ArrayLike,
    snapshots: int,
    noise_power: float,
    /,
    mode: Literal["analytic", "finite_difference"] = "analytic",
) -> CrbReport:
    """
    End-to-end bound for a target and a transmit covariance.
    """

    g = g_matrix(truth, cfg_tx, cfg_rx)
    g_r, g_t = g_derivatives(truth, cfg_tx, cfg_rx, mode)
    return crb_matrix(fim_blocks(g, g_r, g_t, r_x, truth.beta, snapshots, noise_power))


def target_power_to_trace(target_power: float, n_rx: int, /) -> float:
    """
    `tr(G R_x G^H)` implied by a transmit beampattern value at the
    target: `N_r` times the beampattern.

    Examples
    --------
    >>> target_power_to_trace(100.0, 64)
    6400.0
    """

    return n_rx * target_power
