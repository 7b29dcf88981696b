from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from nfisac import (
    PIPELINES,
    ContractViolationError,
    MusicGrid,
    MusicSettings,
    PolarCoord,
    QosSettings,
    Scenario,
    SweepGrids,
    SweepResult,
    complete_user,
    db_to_linear,
    design_pipeline,
    make_scenario,
    map_tasks,
    plot_sweep,
    read_complex_matrix,
    read_sweep_frame,
    run_beampattern_cut,
    run_detection_sweep,
    run_distance_sweep,
    run_estimation_sweep,
    run_gainloss_curve,
    run_power_sweep,
    run_rate_sweep,
    run_tradeoff_sweep,
    snr_r,
    write_complex_matrix,
    write_csv,
    write_spectrum,
)


def _small(**options: object) -> Scenario:
    return make_scenario("desk", n_tx=16, n_rx=16, trials=3, **options)  # pyright: ignore[reportArgumentType]


def _square(x: int, /) -> int:
    return x * x


class Test__make_scenario:
    @staticmethod
    def test__profiles_pick_array_size_and_trials() -> None:
        paper = make_scenario()
        desk = make_scenario("desk")

        assert (paper.cfg_tx.n_elements, paper.cfg_rx.n_elements, paper.trials) == (256, 256, 500)
        assert (desk.cfg_tx.n_elements, desk.trials) == (64, 100)
        assert paper.wavelength == pytest.approx(0.01)
        assert paper.target.offset == pytest.approx(256 * paper.cfg_tx.spacing)

    @staticmethod
    def test__users_are_drawn_from_the_master_seed() -> None:
        a = make_scenario("desk", master_seed=3)
        b = make_scenario("desk", master_seed=3)
        c = make_scenario("desk", master_seed=4)

        assert [u.los_gain for u in a.users] == [u.los_gain for u in b.users]
        assert [u.scatterers for u in a.users] == [u.scatterers for u in b.users]
        assert [u.los_gain for u in a.users] != [u.los_gain for u in c.users]
        assert all(u.n_paths == 2 for u in a.users)

    @staticmethod
    def test__pinned_values_are_kept() -> None:
        scatterers = (PolarCoord(7.0, 0.2),)
        user = complete_user(0, 0, PolarCoord(5.0, 0.0), 0.01, scatterers=scatterers, los_gain=2.0)

        assert user.los_gain == 2.0
        assert user.scatterers == scatterers
        assert user.n_paths == 1

    @staticmethod
    def test__rejects_invalid_fields() -> None:
        with pytest.raises(ContractViolationError):
            _ = make_scenario("desk", eta=1.5)
        with pytest.raises(ContractViolationError):
            _ = make_scenario("desk", transmit_power=0.0)
        with pytest.raises(ContractViolationError):
            _ = make_scenario("huge")  # pyright: ignore[reportArgumentType]

    @staticmethod
    def test__sensing_noise_gives_the_requested_snr() -> None:
        scenario = _small()
        noise = scenario.sensing_noise_power(12.0)
        snr = snr_r(scenario.target.beta, scenario.snapshots, scenario.transmit_power, noise)
        assert snr == pytest.approx(float(db_to_linear(12.0)))


class Test__design_pipeline:
    @staticmethod
    def test__fixed_weights_match_the_trade_off_endpoints() -> None:
        scenario = _small()
        comm = design_pipeline(scenario, "comm_only_nf")
        radar = design_pipeline(scenario, "radar_only")

        assert np.allclose(comm.precoder.entries, design_pipeline(scenario, "nfbf", 1.0).precoder.entries)
        assert np.allclose(radar.precoder.entries, design_pipeline(scenario, "nfbf", 0.0).precoder.entries)
        assert (comm.eta, radar.eta) == (1.0, 0.0)
        assert set(PIPELINES) == {"nfbf", "ffbf", "radar_only", "comm_only_nf", "comm_only_ff"}

    @staticmethod
    def test__meets_the_power_budget() -> None:
        scenario = _small(transmit_power=2.0)
        for name in PIPELINES:
            beam = design_pipeline(scenario, name)  # pyright: ignore[reportArgumentType]
            assert beam.precoder.power == pytest.approx(2.0)

    @staticmethod
    def test__rejects_unknown_pipelines() -> None:
        with pytest.raises(ContractViolationError):
            _ = design_pipeline(_small(), "mmse")  # pyright: ignore[reportArgumentType]


class Test__map_tasks:
    @staticmethod
    def test__keeps_task_order() -> None:
        assert map_tasks(_square, [3, 1, 2]) == [9, 1, 4]
        assert map_tasks(_square, [3, 1, 2], workers=2) == [9, 1, 4]


class Test__figures:
    @staticmethod
    def test__gain_loss_fades_towards_the_fraunhofer_distance() -> None:
        result = run_gainloss_curve(_small(), (0.0, 45.0), 20)

        assert result.axis.size == 20
        assert set(result.series) == {"exact.theta0", "approx.theta0", "exact.theta45", "approx.theta45"}
        assert result.series["exact.theta0"][-1] < result.series["exact.theta0"][0]
        assert result.series["exact.theta45"][-1] < result.series["exact.theta0"][-1]

    @staticmethod
    def test__radar_beam_peaks_at_the_target_angle() -> None:
        result = run_beampattern_cut(_small(), names=("radar_only",))
        pattern = result.series["radar_only"]

        assert result.axis[0] == -89.75
        assert result.axis[-1] == 89.75
        assert abs(result.axis[int(np.argmax(pattern))] - 60.0) <= 0.25


class Test__rate_sweep:
    @staticmethod
    def test__far_field_design_saturates() -> None:
        """
        At high SNR zero-forcing on the near-field model gains one bit
        per 3 dB per user, while the plane-wave design hits the residual
        interference it cannot see.
        """

        scenario = make_scenario("desk", grids=SweepGrids(rate_snr_db=(100.0, 140.0)))
        result = run_rate_sweep(scenario)
        near = result.series["comm_only_nf.sum_rate"]
        far = result.series["comm_only_ff.sum_rate"]

        assert near[1] - near[0] == pytest.approx(2 * math.log2(1e4), rel=0.01)
        assert far[1] - far[0] < 0.25 * (near[1] - near[0])
        assert "nfbf.sinr_db.user1" in result.series

    @staticmethod
    def test__is_reproducible_across_runs_and_workers() -> None:
        scenario = _small(grids=SweepGrids(rate_snr_db=(80.0, 100.0, 120.0)))
        first = run_rate_sweep(scenario)
        again = run_rate_sweep(scenario)
        pooled = run_rate_sweep(scenario, workers=2)

        assert first.series.keys() == pooled.series.keys()
        for key in first.series:
            assert np.array_equal(first.series[key], again.series[key])
            assert np.allclose(first.series[key], pooled.series[key], rtol=1e-12, atol=0.0)


class Test__tradeoff_sweep:
    @staticmethod
    def test__weight_trades_rate_for_accuracy() -> None:
        scenario = make_scenario("desk", grids=SweepGrids(eta=(0.0, 1.0), tradeoff_distances=(5.0,)))
        result = run_tradeoff_sweep(scenario)

        rate = result.series["nfbf.d5.rate"]
        bound = result.series["nfbf.d5.rcrb_theta"]
        assert rate[1] > rate[0]
        assert bound[0] <= bound[1]

    @staticmethod
    def test__near_field_design_dominates_the_frontier() -> None:
        """
        Every far-field design point is matched by a near-field one with
        at least its rate and at most its angle error bound, and moving
        the target away loosens the near-field bound.
        """

        weights = tuple(round(0.1 * i, 1) for i in range(1, 10))
        scenario = make_scenario("desk", grids=SweepGrids(eta=weights, tradeoff_distances=(5.0, 15.0)))
        result = run_tradeoff_sweep(scenario)

        near_rate, near_bound = result.series["nfbf.d5.rate"], result.series["nfbf.d5.rcrb_theta"]
        far_rate, far_bound = result.series["ffbf.d5.rate"], result.series["ffbf.d5.rcrb_theta"]
        for rate, bound in zip(far_rate, far_bound):
            assert np.any((near_rate >= rate) & (near_bound <= bound))
        assert np.all(near_bound < result.series["nfbf.d15.rcrb_theta"])


class Test__distance_sweep:
    @staticmethod
    def test__near_field_design_wins_up_close() -> None:
        scenario = make_scenario("paper", trials=1, grids=SweepGrids(distance=(4.0,)))
        result = run_distance_sweep(scenario)

        assert result.series["nfbf.crb_r"][0] < result.series["ffbf.crb_r"][0]
        assert result.series["nfbf.crb_theta"][0] < result.series["ffbf.crb_theta"][0]


class Test__power_sweep:
    @staticmethod
    def test__recovered_powers_bracket_the_relaxation() -> None:
        scenario = make_scenario(
            "desk",
            n_tx=8,
            n_rx=8,
            qos=QosSettings(10.0, 20.0, 10),
            grids=SweepGrids(gamma_db=(5.0, 10.0)),
        )
        result = run_power_sweep(scenario)
        relaxed = result.series["nfbf.relaxed"]
        near = result.series["nfbf.power"]
        far = result.series["ffbf.power"]

        assert np.all(np.isfinite(near))
        assert np.all(near >= relaxed * (1 - 1e-5))
        assert relaxed[1] >= relaxed[0] * (1 - 1e-6)
        finite = np.isfinite(far)
        assert np.all(far[finite] >= relaxed[finite] * (1 - 1e-4))
        assert np.all(result.series["nfbf.crb_theta"] > 0)

    @staticmethod
    def test__near_field_design_needs_less_power() -> None:
        scenario = make_scenario("desk")
        for vary in ("gamma", "ghat"):
            result = run_power_sweep(scenario, vary)  # pyright: ignore[reportArgumentType]
            near = result.series["nfbf.power"]
            far = result.series["ffbf.power"]
            finite = np.isfinite(far)

            assert np.all(np.isfinite(near))
            assert np.all(near[finite] <= far[finite])

    @staticmethod
    def test__rejects_unknown_axes() -> None:
        with pytest.raises(ContractViolationError):
            _ = run_power_sweep(_small(), "beta")  # pyright: ignore[reportArgumentType]


class Test__sensing_sweeps:
    @staticmethod
    def test__estimation_reports_errors_and_bounds() -> None:
        scenario = _small(
            music=MusicSettings(2.0, 10.0, 0.1, math.radians(80.0), math.radians(0.25)),
            grids=SweepGrids(snr_db=(10.0, 20.0)),
        )
        result = run_estimation_sweep(scenario)

        for name in ("nfbf", "ffbf", "radar_only"):
            assert np.all((result.series[f"{name}.miss_rate"] >= 0) & (result.series[f"{name}.miss_rate"] <= 1))
            bound = result.series[f"{name}.rcrb_r"]
            assert bound[0] / bound[1] == pytest.approx(math.sqrt(10.0))
        assert result.metadata["trials"] == "3"

    @staticmethod
    def test__near_field_errors_track_the_bound() -> None:
        """
        Desk arrays, 100 trials: the near-field design's RMSE stays within
        a small factor of the root CRB and falls with the radar SNR.
        """

        scenario = make_scenario("desk", grids=SweepGrids(snr_db=(15.0, 20.0, 25.0, 30.0)))
        result = run_estimation_sweep(scenario)

        assert np.all(result.series["nfbf.miss_rate"] == 0.0)
        for parameter in ("r", "theta"):
            error = result.series[f"nfbf.rmse_{parameter}"]
            ratio = error / result.series[f"nfbf.rcrb_{parameter}"]
            assert np.all((ratio >= 0.8) & (ratio <= 3.0)), (parameter, ratio)
            assert np.all(np.diff(error) <= 0), (parameter, error)

    @staticmethod
    def test__detection_goes_from_never_to_always() -> None:
        scenario = make_scenario(
            "desk", n_tx=16, n_rx=16, trials=20, grids=SweepGrids(detection_snr_db=(-40.0, 20.0))
        )
        pd_radar = run_detection_sweep(scenario).series["radar_only.pd"]
        assert pd_radar.tolist() == [0.0, 1.0]


class Test__output:
    @staticmethod
    def test__csv_is_byte_identical_on_rerun(tmp_path: Path) -> None:
        result = SweepResult("demo", "x", "m", [1.0, 2.0], {"a.b": [0.1, math.nan]}, {"master_seed": "7"})
        first = write_csv(result, tmp_path / "one.csv")
        second = write_csv(result, tmp_path / "two.csv")

        assert first.read_bytes() == second.read_bytes()
        assert first.read_text().splitlines()[:3] == ["# master_seed=7", "# axis_name=x", "# axis_unit=m"]
        frame = read_sweep_frame(first)
        assert list(frame.columns) == ["x", "a.b"]
        assert math.isnan(frame["a.b"][1])

    @staticmethod
    def test__complex_matrices_survive_a_round_trip(tmp_path: Path) -> None:
        matrix = np.array([[1 + 2j, -0.1], [1e-17j, 3.0]])
        _ = write_complex_matrix(matrix, tmp_path / "m")
        assert np.array_equal(read_complex_matrix(tmp_path / "m"), matrix)

    @staticmethod
    def test__spectrum_is_written_in_long_form(tmp_path: Path) -> None:
        grid = MusicGrid([1.0, 2.0], [-0.1, 0.0, 0.1])
        path = write_spectrum(np.arange(6.0).reshape(2, 3), grid, tmp_path / "s.csv", {"snr_db": "10"})
        frame = read_sweep_frame(path)

        assert len(frame) == 6
        assert frame["range_m"].tolist() == [1.0, 1.0, 1.0, 2.0, 2.0, 2.0]
        assert frame["value"].tolist() == [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]
        with pytest.raises(ContractViolationError):
            _ = write_spectrum(np.zeros((3, 2)), grid, tmp_path / "bad.csv")

    @staticmethod
    def test__plots_are_reproducible(tmp_path: Path) -> None:
        result = SweepResult("demo", "x", "m", [1.0, 2.0, 3.0], {"y": [1.0, 10.0, 100.0]}, {})
        first = plot_sweep(result, tmp_path / "one.svg", yscale="log")
        second = plot_sweep(result, tmp_path / "two.svg", yscale="log")

        assert "<svg" in first.read_text()
        assert first.read_bytes() == second.read_bytes()
