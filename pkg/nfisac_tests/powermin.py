from __future__ import annotations

import math
from typing import Any

import numpy as np
import pytest

from nfisac import (
    ArrayConfig,
    ContractViolationError,
    PolarCoord,
    PowerMinProblem,
    QosSpec,
    RandomizationWarning,
    UserPlacement,
    build_problem,
    channel_matrix,
    far_steering,
    near_focusing,
    principal_directions,
    randomize_rank1,
    reduce_subspace,
    restore_feasibility,
    solve_sdp,
    tx_covariance,
    user_sinr_covariance,
    zf_precoder,
)
from nfisac._core import _powermin  # pyright: ignore[reportPrivateUsage]

_CFG = ArrayConfig.half_wavelength(8, 0.01)
_TARGET = PolarCoord(2.0, 0.5)
_USERS = [
    UserPlacement(PolarCoord(1.5, -0.4), (PolarCoord(3.0, 0.2),), 1.0, (0.3 + 0.1j,)),
    UserPlacement(PolarCoord(4.0, 0.1), (PolarCoord(2.5, -0.9),), 0.8j, (0.2 - 0.2j,)),
]


def _problem(gammas: tuple[float, ...] = (10.0, 10.0), floor: float = 2.0) -> PowerMinProblem:
    h = channel_matrix(_CFG, _USERS[: len(gammas)], "near")
    return build_problem(h, _TARGET, QosSpec(gammas, floor, 0.1), _CFG)


class Test__QosSpec:
    @staticmethod
    def test__rejects_bad_values() -> None:
        with pytest.raises(ContractViolationError):
            _ = QosSpec((-1.0,), 0.0, 0.1)
        with pytest.raises(ContractViolationError):
            _ = QosSpec((1.0,), -1.0, 0.1)
        with pytest.raises(ContractViolationError):
            _ = QosSpec((1.0,), 0.0, 0.0)

    @staticmethod
    def test__accepts_zero_thresholds() -> None:
        qos = QosSpec((0.0, 3.0), 0.0, 0.1)
        assert qos.sinr_thresholds == (0.0, 3.0)


class Test__build_problem:
    @staticmethod
    def test__target_vector_follows_the_model() -> None:
        h = channel_matrix(_CFG, _USERS, "near")
        qos = QosSpec((1.0, 1.0), 1.0, 0.1)

        assert np.allclose(build_problem(h, _TARGET, qos, _CFG).target_vector, near_focusing(_CFG, _TARGET))
        far = build_problem(h, _TARGET, qos, _CFG, "far")
        assert np.allclose(far.target_vector, far_steering(_CFG, _TARGET.angle))

    @staticmethod
    def test__rejects_mismatched_thresholds() -> None:
        h = channel_matrix(_CFG, _USERS, "near")
        with pytest.raises(ContractViolationError):
            _ = build_problem(h, _TARGET, QosSpec((1.0,), 1.0, 0.1), _CFG)

    @staticmethod
    def test__sinrs_match_the_channel_module() -> None:
        h = channel_matrix(_CFG, _USERS, "near")
        problem = build_problem(h, _TARGET, QosSpec((1.0, 1.0), 1.0, 0.1), _CFG)
        f = zf_precoder(h, 1.0).entries
        covariances = [np.outer(f[:, k], f[:, k].conj()) for k in range(2)]

        expected = [user_sinr_covariance(h, covariances, 0.1, k) for k in range(2)]
        assert np.allclose(problem.sinrs(covariances), expected)


class Test__reduce_subspace:
    @staticmethod
    def test__spans_the_channels_and_the_target() -> None:
        problem = _problem()
        basis = reduce_subspace(problem.channels, problem.target_vector)
        projector = basis @ basis.conj().T

        assert basis.shape == (8, 3)
        assert np.allclose(basis.conj().T @ basis, np.eye(3), atol=1e-12)
        assert np.allclose(projector @ problem.channels.conj().T, problem.channels.conj().T)
        assert np.allclose(projector @ problem.target_vector, problem.target_vector)

    @staticmethod
    def test__rejects_all_zero_input() -> None:
        with pytest.raises(ContractViolationError):
            _ = reduce_subspace(np.zeros((2, 8)), np.zeros(8))


class Test__solve_sdp:
    @staticmethod
    def test__single_user_without_sensing_is_a_matched_filter() -> None:
        """
        With one user and no target floor the optimum is
        `Gamma sigma^2 / ||h||^2`, reached by a rank-one covariance.
        """

        problem = _problem((10.0,), 0.0)
        solution = solve_sdp(problem)
        gain = float(np.linalg.norm(problem.channels) ** 2)

        assert solution.status == "optimal"
        assert solution.total_power == pytest.approx(10.0 * 0.1 / gain, rel=1e-4)
        assert solution.ranks == (1,)

    @staticmethod
    def test__sensing_only_needs_the_beampattern_floor() -> None:
        solution = solve_sdp(_problem((0.0, 0.0), 4.0))
        assert solution.status == "optimal"
        assert solution.total_power == pytest.approx(4.0 / 8, rel=1e-4)

    @staticmethod
    def test__meets_every_constraint() -> None:
        problem = _problem()
        solution = solve_sdp(problem)

        assert solution.status == "optimal"
        assert max(problem.violations(solution.covariances).values()) < 1e-4
        assert solution.total_power == pytest.approx(sum(float(np.real(np.trace(c))) for c in solution.covariances))

    @staticmethod
    def test__reduction_keeps_the_optimum() -> None:
        problem = _problem()
        reduced = solve_sdp(problem)
        full = solve_sdp(problem, reduce=False)
        assert reduced.total_power == pytest.approx(full.total_power, rel=1e-4)

    @staticmethod
    def test__names_the_failing_constraint() -> None:
        """
        Two users behind the same channel cannot both see an SINR above
        one.
        """

        h = channel_matrix(_CFG, [_USERS[0], _USERS[0]], "near")
        problem = build_problem(h, _TARGET, QosSpec((2.0, 2.0), 1.0, 0.1), _CFG)
        solution = solve_sdp(problem)

        assert solution.status == "infeasible"
        assert solution.violated in ("sinr[0]", "sinr[1]")
        assert math.isnan(solution.total_power)

    @staticmethod
    def test__keeps_a_zero_duality_gap(monkeypatch: pytest.MonkeyPatch) -> None:
        solve = _powermin._run_cvxopt  # pyright: ignore[reportPrivateUsage]

        def closed(*args: Any) -> dict[str, Any]:
            result = dict(solve(*args))
            result["relative gap"] = 0.0
            result["gap"] = 0.0
            return result

        monkeypatch.setattr(_powermin, "_run_cvxopt", closed)
        assert solve_sdp(_problem()).gap == 0.0


class Test__restore_feasibility:
    @staticmethod
    def test__scales_directions_onto_the_constraints() -> None:
        problem = _problem()
        h = channel_matrix(_CFG, _USERS, "near")
        restored = restore_feasibility(problem, zf_precoder(h, 1.0).entries)

        assert restored is not None
        f = restored.entries
        covariances = [np.outer(f[:, k], f[:, k].conj()) for k in range(2)]
        assert max(problem.violations(covariances).values()) <= 1e-6
        assert restored.power_budget == pytest.approx(restored.power)

    @staticmethod
    def test__gives_up_on_shared_channels() -> None:
        h = channel_matrix(_CFG, [_USERS[0], _USERS[0]], "near")
        problem = build_problem(h, _TARGET, QosSpec((2.0, 2.0), 0.0, 0.1), _CFG)
        assert restore_feasibility(problem, np.ones((8, 2))) is None

    @staticmethod
    def test__rejects_wrong_shapes() -> None:
        with pytest.raises(ContractViolationError):
            _ = restore_feasibility(_problem(), np.ones((8, 3)))


class Test__principal_directions:
    @staticmethod
    def test__takes_the_unit_principal_eigenvector() -> None:
        rng = np.random.default_rng(4)
        v = rng.standard_normal((8, 1)) + 1j * rng.standard_normal((8, 1))
        v /= np.linalg.norm(v)
        w = rng.standard_normal((8, 1)) + 1j * rng.standard_normal((8, 1))
        w -= v * (v.conj().T @ w)
        w /= np.linalg.norm(w)
        covariance = 3.0 * v @ v.conj().T + 0.5 * w @ w.conj().T

        directions = principal_directions([covariance, np.zeros((8, 8), dtype=np.complex128)])

        assert directions.shape == (8, 2)
        assert abs((v.conj().T @ directions[:, :1]).item()) == pytest.approx(1.0)
        assert np.array_equal(directions[:, 1], np.eye(8)[:, 0])


class Test__randomize_rank1:
    @staticmethod
    def test__recovered_precoder_is_feasible_and_near_the_relaxation() -> None:
        problem = _problem()
        relaxed = solve_sdp(problem)
        solution = randomize_rank1(relaxed, 50, np.random.default_rng(0))

        assert solution.recovered is not None
        f = solution.recovered.entries
        covariances = [np.outer(f[:, k], f[:, k].conj()) for k in range(2)]
        assert max(problem.violations(covariances).values()) <= 1e-6
        assert solution.recovered.power_budget >= relaxed.total_power * (1 - 1e-5)
        assert solution.recovered.power_budget <= relaxed.total_power * 1.05
        assert float(np.real(np.trace(tx_covariance(f)))) == pytest.approx(solution.recovered.power_budget)

    @staticmethod
    def test__infeasible_relaxation_is_passed_through() -> None:
        h = channel_matrix(_CFG, [_USERS[0], _USERS[0]], "near")
        relaxed = solve_sdp(build_problem(h, _TARGET, QosSpec((2.0, 2.0), 1.0, 0.1), _CFG))
        with pytest.warns(RandomizationWarning):
            solution = randomize_rank1(relaxed, 10, np.random.default_rng(0))
        assert solution is relaxed

    @staticmethod
    def test__rejects_negative_trial_counts() -> None:
        with pytest.raises(ContractViolationError):
            _ = randomize_rank1(solve_sdp(_problem((10.0,), 0.0)), -1, np.random.default_rng(0))
