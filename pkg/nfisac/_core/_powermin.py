from __future__ import annotations

__all__ = [
    "PowerMinProblem",
    "QosSpec",
    "SdpSolution",
    "SdpStatus",
    "build_problem",
    "principal_directions",
    "randomize_rank1",
    "reduce_subspace",
    "restore_feasibility",
    "solve_sdp",
]

import math
from collections.abc import Sequence
from dataclasses import dataclass, replace
from typing import Any, Literal, TypeAlias, final
from warnings import warn

import numpy as np
import scipy.optimize
from cvxopt import matrix as cvx_matrix, solvers as cvx_solvers
from numpy.typing import ArrayLike, NDArray

from ._channel import ChannelMatrix, ChannelModel
from ._geometry import ArrayConfig, PolarCoord, far_steering, near_focusing
from ._precoder import Precoder
from .._utils import (
    CMatrix,
    ContractViolationError,
    RandomizationWarning,
    RMatrix,
    RVector,
    as_cmatrix,
    as_column,
    hermitian_eig,
    psd_sqrt,
    svd,
)

SdpStatus: TypeAlias = Literal["optimal", "infeasible", "max_iter"]

_BASIS_RTOL = 1e-10
_RANK_ONE_RATIO = 1e-6
_TARGET_MARGIN = 1e-8


@final
@dataclass(frozen=True)
class QosSpec:
    """
    Per-user SINR thresholds (linear), a floor on the transmit
    beampattern at the target (W) and the receiver noise power (W).

    Thresholds may be zero. A zero threshold drops that user's SINR
    constraint, which leaves the pure sensing problem when every
    threshold is zero.
    """

    sinr_thresholds: tuple[float, ...]
    target_power_floor: float
    noise_power: float

    def __post_init__(self, /) -> None:
        object.__setattr__(self, "sinr_thresholds", tuple(float(g) for g in self.sinr_thresholds))
        if any(not (math.isfinite(g) and g >= 0) for g in self.sinr_thresholds):
            raise ContractViolationError(f"SINR thresholds must be non-negative, got {self.sinr_thresholds}")
        if not (math.isfinite(self.target_power_floor) and self.target_power_floor >= 0):
            raise ContractViolationError(f"target power floor must be non-negative, got {self.target_power_floor}")
        if not self.noise_power > 0:
            raise ContractViolationError(f"noise power must be positive, got {self.noise_power}")


@final
@dataclass(frozen=True, eq=False)
class PowerMinProblem:
    """
    Minimize `sum_k tr(F_k)` subject to
    `tr(h_k h_k^H F_k) >= Gamma_k (sum_{i != k} tr(h_k h_k^H F_i) + sigma^2)`
    for every user, `a^H (sum_k F_k) a >= G_hat` and `F_k >= 0`.

    `channels` holds `h_k^H` as rows.
    """

    channels: CMatrix
    target_vector: CMatrix
    qos: QosSpec

    def __post_init__(self, /) -> None:
        channels = as_cmatrix(self.channels, name="channels")
        target = as_column(self.target_vector, name="target vector")
        if target.shape[0] != channels.shape[1]:
            raise ContractViolationError(f"target vector has {target.shape[0]} entries, expected {channels.shape[1]}")
        if len(self.qos.sinr_thresholds) != channels.shape[0]:
            raise ContractViolationError(
                f"{len(self.qos.sinr_thresholds)} SINR thresholds for {channels.shape[0]} users"
            )
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "target_vector", target)

    @property
    def n_users(self, /) -> int:
        return self.channels.shape[0]

    @property
    def n_antennas(self, /) -> int:
        return self.channels.shape[1]

    def sinrs(self, covariances: Sequence[ArrayLike], /) -> RVector:
        """
        SINR of every user under per-user transmit covariances.
        """

        powers = self._received_powers(covariances)
        signal = np.diag(powers)
        return signal / (powers.sum(axis=1) - signal + self.qos.noise_power)

    def target_power(self, covariances: Sequence[ArrayLike], /) -> float:
        a = self.target_vector
        return float(sum(np.real((a.conj().T @ as_cmatrix(c) @ a).item()) for c in covariances))

    def violations(self, covariances: Sequence[ArrayLike], /) -> dict[str, float]:
        """
        Relative shortfall of every active constraint (zero or negative
        when satisfied), keyed by constraint name.
        """

        result: dict[str, float] = {}
        sinrs = self.sinrs(covariances)
        for k, gamma in enumerate(self.qos.sinr_thresholds):
            if gamma > 0:
                result[f"sinr[{k}]"] = 1.0 - sinrs[k] / gamma
        floor = self.qos.target_power_floor
        if floor > 0:
            result["target_power"] = 1.0 - self.target_power(covariances) / floor

        return result

    def _received_powers(self, covariances: Sequence[ArrayLike], /) -> RMatrix:
        if len(covariances) != self.n_users:
            raise ContractViolationError(f"expected {self.n_users} covariances, got {len(covariances)}")

        h = self.channels
        # powers[k, i] = h_k^H F_i h_k
        return np.array(
            [[float(np.real(h[k] @ as_cmatrix(c) @ h[k].conj())) for c in covariances] for k in range(self.n_users)]
        )


def build_problem(
    h: ChannelMatrix, target: PolarCoord, qos: QosSpec, cfg: ArrayConfig, /, model: ChannelModel | None = None
) -> PowerMinProblem:
    """
    Power-minimization problem for the channels `h` and a target seen
    under `model` (by default the model of `h`).
    """

    if h.n_antennas != cfg.n_elements:
        raise ContractViolationError(f"channel has {h.n_antennas} antennas, array has {cfg.n_elements}")

    model = h.model if model is None else model
    a = near_focusing(cfg, target) if model == "near" else far_steering(cfg, target.angle)
    return PowerMinProblem(h.entries, a, qos)


def reduce_subspace(h: ChannelMatrix | ArrayLike, a_target: ArrayLike, /) -> CMatrix:
    """
    Orthonormal basis of `span{h_1, ..., h_K, a}`.

    Components of a beamformer outside this span change no constraint
    and only add power, so the problem can be solved in it.
    """

    rows = h.entries if isinstance(h, ChannelMatrix) else as_cmatrix(h, name="channels")
    stacked = np.hstack([rows.conj().T, as_column(a_target, name="target vector")])
    u, s, _ = svd(stacked)
    rank = int(np.count_nonzero(s > _BASIS_RTOL * s[0])) if s[0] > 0 else 0
    if rank == 0:
        raise ContractViolationError("channels and target vector are all zero")

    return np.ascontiguousarray(u[:, :rank])


@final
@dataclass(frozen=True, eq=False)
class SdpSolution:
    """
    Relaxed solution of a `PowerMinProblem`.

    `violated` names the constraint that could not be met when `status`
    is `"infeasible"`; `recovered` holds a rank-one precoder once
    `randomize_rank1` succeeded.
    """

    problem: PowerMinProblem
    covariances: tuple[CMatrix, ...]
    total_power: float
    ranks: tuple[int, ...]
    status: SdpStatus
    gap: float
    iterations: int
    violated: str | None = None
    recovered: Precoder | None = None


def _hermitian_basis(m: int, /) -> list[CMatrix]:
    # Real coordinates of an m×m Hermitian matrix: diagonal entries, then
    # real and imaginary parts of the strictly lower triangle.
    basis: list[CMatrix] = []
    for i in range(m):
        e = np.zeros((m, m), dtype=np.complex128)
        e[i, i] = 1.0
        basis.append(e)
    lower = [(i, j) for i in range(m) for j in range(i)]
    for i, j in lower:
        e = np.zeros((m, m), dtype=np.complex128)
        e[i, j] = e[j, i] = 1.0
        basis.append(e)
    for i, j in lower:
        e = np.zeros((m, m), dtype=np.complex128)
        e[i, j] = 1j
        e[j, i] = -1j
        basis.append(e)

    return basis


def _real_embedding(z: CMatrix, /) -> RMatrix:
    return np.block([[z.real, -z.imag], [z.imag, z.real]])


def _functional(q: CMatrix, basis: Sequence[CMatrix], /) -> RVector:
    # Coefficients of Z -> tr(Q Z) in the real coordinates of Z.
    return np.array([float(np.real(np.trace(q @ e))) for e in basis])


@dataclass
class _SdpData:
    c: RVector
    g_lin: RMatrix
    h_lin: RVector
    g_psd: list[RMatrix]
    h_psd: list[RMatrix]
    names: list[str]


def _cvx(array: NDArray[Any], /) -> Any:
    values = np.asfortranarray(np.asarray(array, dtype=np.float64))
    if values.ndim == 1:
        values = values.reshape(-1, 1, order="F")
    return cvx_matrix(values)


def _run_cvxopt(data: _SdpData, tol: float, max_iter: int, /) -> dict[str, Any]:
    options = {
        "show_progress": False,
        "abstol": tol / 10.0,
        "reltol": tol / 10.0,
        "feastol": tol,
        "maxiters": max_iter,
    }
    return cvx_solvers.sdp(
        _cvx(data.c),
        Gl=_cvx(data.g_lin),
        hl=_cvx(data.h_lin),
        Gs=[_cvx(g) for g in data.g_psd],
        hs=[_cvx(h) for h in data.h_psd],
        options=options,
    )


def _assemble(
    problem: PowerMinProblem, basis_vectors: CMatrix, scale: float, /, *, phase_one: bool = False
) -> tuple[_SdpData, list[CMatrix], int]:
    k_users = problem.n_users
    m = basis_vectors.shape[1]
    herm = _hermitian_basis(m)
    block = m * m
    n_vars = k_users * block + (1 if phase_one else 0)

    g = basis_vectors.conj().T @ problem.channels.conj().T
    c_vec = basis_vectors.conj().T @ problem.target_vector
    qos = problem.qos

    rows: list[RVector] = []
    rhs: list[float] = []
    names: list[str] = []

    for k, gamma in enumerate(qos.sinr_thresholds):
        if gamma == 0:
            continue
        q = g[:, k : k + 1] @ g[:, k : k + 1].conj().T
        coeff = _functional(q, herm)
        row = np.zeros(n_vars)
        for i in range(k_users):
            row[i * block : (i + 1) * block] = coeff if i == k else -gamma * coeff
        # -(signal - gamma * interference) <= -gamma * sigma^2, in scaled variables.
        rows.append(-scale * row)
        rhs.append(-gamma * qos.noise_power)
        names.append(f"sinr[{k}]")

    if qos.target_power_floor > 0:
        coeff = _functional(c_vec @ c_vec.conj().T, herm)
        row = np.zeros(n_vars)
        for i in range(k_users):
            row[i * block : (i + 1) * block] = coeff
        rows.append(-scale * row)
        rhs.append(-qos.target_power_floor)
        names.append("target_power")

    trace_coeff = _functional(np.eye(m, dtype=np.complex128), herm)
    objective = np.zeros(n_vars)
    for i in range(k_users):
        objective[i * block : (i + 1) * block] = trace_coeff

    if phase_one:
        # Maximize the smallest normalized margin t under a power cap.
        for index in range(len(rows)):
            norm = max(float(np.max(np.abs(rows[index]))), abs(rhs[index]), np.finfo(float).tiny)
            rows[index] = rows[index] / norm
            rhs[index] = rhs[index] / norm
            rows[index][-1] = 1.0
        cap = objective.copy()
        cap[-1] = 0.0
        rows.append(cap)
        rhs.append(float(k_users * m))
        names.append("power_cap")
        objective = np.zeros(n_vars)
        objective[-1] = -1.0
    else:
        for index in range(len(rows)):
            norm = max(float(np.max(np.abs(rows[index]))), np.finfo(float).tiny)
            rows[index] = rows[index] / norm
            rhs[index] = rhs[index] / norm

    if not rows:
        rows.append(-objective.copy())
        rhs.append(0.0)
        names.append("power")

    g_psd: list[RMatrix] = []
    h_psd: list[RMatrix] = []
    embedded = [_real_embedding(e).ravel(order="F") for e in herm]
    for k in range(k_users):
        g_block = np.zeros(((2 * m) ** 2, n_vars))
        for index, column in enumerate(embedded):
            g_block[:, k * block + index] = -column
        g_psd.append(g_block)
        h_psd.append(np.zeros((2 * m, 2 * m)))

    return _SdpData(objective, np.vstack(rows), np.array(rhs), g_psd, h_psd, names), herm, block


def _decode(x: RVector, herm: Sequence[CMatrix], block: int, k_users: int, scale: float, /) -> list[CMatrix]:
    covariances: list[CMatrix] = []
    for k in range(k_users):
        z = sum((scale * x[k * block + i] * e for i, e in enumerate(herm)), np.zeros_like(herm[0]))
        z = 0.5 * (z + z.conj().T)
        values, vectors = hermitian_eig(z) if np.any(z) else (np.zeros(z.shape[0]), np.eye(z.shape[0]))
        covariances.append((vectors * np.clip(values, 0.0, None)) @ vectors.conj().T)

    return covariances


def _power_scale(problem: PowerMinProblem, /) -> float:
    qos = problem.qos
    candidates = [qos.target_power_floor / max(float(np.linalg.norm(problem.target_vector)) ** 2, 1e-300)]
    for k, gamma in enumerate(qos.sinr_thresholds):
        gain = float(np.linalg.norm(problem.channels[k])) ** 2
        candidates.append(gamma * qos.noise_power / max(gain, 1e-300))

    scale = max(candidates)
    return scale if scale > 0 else 1.0


def _rank(covariance: CMatrix, /) -> int:
    values = np.linalg.eigvalsh(covariance)[::-1]
    if values[0] <= 0:
        return 0

    return int(np.count_nonzero(values > _RANK_ONE_RATIO * values[0]))


def solve_sdp(
    problem: PowerMinProblem, /, tol: float = 1e-7, max_iter: int = 100, *, reduce: bool = True
) -> SdpSolution:
    """
    Solves the rank-relaxed problem with the cvxopt interior-point SDP
    solver, over the reduced subspace unless `reduce` is false.

    Each Hermitian block enters the solver through its real embedding
    `[[Re Z, -Im Z], [Im Z, Re Z]]`. When the solver reports
    infeasibility, a feasibility problem maximizing the smallest
    normalized margin names the constraint that fails.
    """

    if reduce:
        basis_vectors = reduce_subspace(problem.channels, problem.target_vector)
    else:
        basis_vectors = np.eye(problem.n_antennas, dtype=np.complex128)

    scale = _power_scale(problem)
    data, herm, block = _assemble(problem, basis_vectors, scale)
    result = _run_cvxopt(data, tol, max_iter)

    raw_status = result["status"]
    iterations = int(result.get("iterations", 0) or 0)
    raw_gap = result.get("relative gap")
    if raw_gap is None:
        raw_gap = result.get("gap")
    gap = math.nan if raw_gap is None else float(raw_gap)

    if raw_status == "primal infeasible" or result["x"] is None:
        violated = _most_violated(problem, basis_vectors, scale, tol, max_iter)
        zeros = tuple(np.zeros((problem.n_antennas,) * 2, dtype=np.complex128) for _ in range(problem.n_users))
        return SdpSolution(problem, zeros, math.nan, (0,) * problem.n_users, "infeasible", gap, iterations, violated)

    status: SdpStatus = "optimal" if raw_status == "optimal" else "max_iter"
    x = np.array(result["x"]).ravel()
    reduced = _decode(x, herm, block, problem.n_users, scale)
    covariances = tuple(basis_vectors @ z @ basis_vectors.conj().T for z in reduced)
    total = float(sum(np.real(np.trace(c)) for c in covariances))
    ranks = tuple(_rank(z) for z in reduced)
    return SdpSolution(problem, covariances, total, ranks, status, gap, iterations)


def _most_violated(problem: PowerMinProblem, basis_vectors: CMatrix, scale: float, tol: float, max_iter: int, /) -> str:
    data, herm, block = _assemble(problem, basis_vectors, scale, phase_one=True)
    result = _run_cvxopt(data, tol, max_iter)
    if result["x"] is None:
        return data.names[0]

    x = np.array(result["x"]).ravel()
    # Rows read `t - margin <= 0`, so adding `t` back to the slack gives the normalized margins.
    margins = {
        name: float(s) + float(x[-1])
        for name, s in zip(data.names, data.h_lin - data.g_lin @ x)
        if name != "power_cap"
    }
    if not margins:
        return data.names[0]

    return min(margins, key=lambda name: margins[name])


def restore_feasibility(problem: PowerMinProblem, directions: ArrayLike, /) -> Precoder | None:
    """
    Minimum-power precoder with the given beam directions (columns,
    one per user), found by a linear program over the per-user powers.

    Returns `None` when no powers make the directions feasible.
    """

    d = as_cmatrix(directions, name="directions")
    if d.shape != (problem.n_antennas, problem.n_users):
        raise ContractViolationError(f"directions must be {problem.n_antennas}x{problem.n_users}, got {d.shape}")

    norms = np.linalg.norm(d, axis=0)
    if np.any(norms == 0):
        return None
    units = d / norms

    qos = problem.qos
    gains = np.abs(problem.channels @ units) ** 2
    beam = np.abs(problem.target_vector.conj().T @ units).ravel() ** 2
    k_users = problem.n_users

    a_ub: list[RVector] = []
    b_ub: list[float] = []
    for k, gamma in enumerate(qos.sinr_thresholds):
        if gamma == 0:
            continue
        target = gamma * (1.0 + _TARGET_MARGIN)
        row = target * gains[k].copy()
        row[k] = -gains[k, k]
        norm = max(float(np.max(np.abs(row))), np.finfo(float).tiny)
        a_ub.append(row / norm)
        b_ub.append(-target * qos.noise_power / norm)
    if qos.target_power_floor > 0:
        norm = max(float(np.max(beam)), np.finfo(float).tiny)
        a_ub.append(-beam / norm)
        b_ub.append(-qos.target_power_floor * (1.0 + _TARGET_MARGIN) / norm)

    if not a_ub:
        return Precoder(np.zeros_like(units), 0.0)

    scale = max(max(abs(b) for b in b_ub), np.finfo(float).tiny)
    result = scipy.optimize.linprog(
        np.ones(k_users),
        A_ub=np.vstack(a_ub),
        b_ub=np.array(b_ub) / scale,
        bounds=[(0, None)] * k_users,
        method="highs",
    )
    if result.status != 0:
        return None

    powers = np.clip(result.x, 0.0, None) * scale
    entries = units * np.sqrt(powers)
    return Precoder(entries, float(np.sum(powers)))


def principal_directions(covariances: Sequence[CMatrix], /) -> CMatrix:
    """
    Unit principal eigenvector of each covariance, one column per user.

    An all-zero covariance contributes the first basis vector.
    """

    columns = []
    for c in covariances:
        vectors = hermitian_eig(c)[1] if np.any(c) else np.eye(c.shape[0], dtype=np.complex128)
        columns.append(vectors[:, :1])

    return np.hstack(columns)


def randomize_rank1(solution: SdpSolution, trials: int, rng: np.random.Generator, /) -> SdpSolution:
    """
    Recovers a rank-one precoder from a relaxed solution.

    Rank-one blocks give their principal components directly. Otherwise
    `trials` Gaussian candidates `F_k^(1/2) g` are drawn on top of the
    principal-component candidate; every candidate is made feasible by
    `restore_feasibility` and the cheapest one is kept. Candidate powers
    are always re-optimized, so the recovered power never undercuts the
    relaxed one.
    """

    if trials < 0:
        raise ContractViolationError(f"trial count must be non-negative, got {trials}")
    if solution.status == "infeasible":
        warn("cannot recover a precoder from an infeasible relaxation", RandomizationWarning, 2)
        return solution

    problem = solution.problem
    best = restore_feasibility(problem, principal_directions(solution.covariances))

    if any(r > 1 for r in solution.ranks):
        roots = [psd_sqrt(c) if np.any(c) else np.zeros_like(c) for c in solution.covariances]
        n = problem.n_antennas
        for _ in range(trials):
            draws = (rng.standard_normal((n, len(roots))) + 1j * rng.standard_normal((n, len(roots)))) / math.sqrt(2)
            directions = np.hstack([root @ draws[:, k : k + 1] for k, root in enumerate(roots)])
            candidate = restore_feasibility(problem, directions)
            if candidate is not None and (best is None or candidate.power_budget < best.power_budget):
                best = candidate

    if best is None:
        warn("no feasible rank-one candidate was found", RandomizationWarning, 2)
        return solution

    return replace(solution, recovered=best)
