from __future__ import annotations

__all__ = [
    "SweepResult",
    "rmse",
    "run_detection_sweep",
    "run_distance_sweep",
    "run_estimation_sweep",
    "run_power_sweep",
    "run_rate_sweep",
    "run_tradeoff_sweep",
]

import logging
import math
import time
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Literal, final

import numpy as np
from numpy.typing import ArrayLike

from ._parallel import map_tasks
from ._pipelines import DesignedBeam, design_pipeline, power_pipeline
from ._scenario import Scenario
from .._core import (
    PolarCoord,
    crb_report,
    detect,
    music_search,
    sample_covariance,
    synthesize_echo,
    synthesize_symbols,
    threshold_from_pfa,
    tx_covariance,
    user_sinr,
)
from .._utils import ContractViolationError, RVector, Stream, db_to_linear, linear_to_db, stream_rng

_logger = logging.getLogger(__name__)


@final
@dataclass(frozen=True, eq=False)
class SweepResult:
    """
    One metric series per pipeline and metric over a shared axis.

    `metadata` is written into output headers; it holds everything
    needed to rerun the sweep and nothing that changes between reruns.
    """

    name: str
    axis_name: str
    axis_unit: str
    axis: RVector
    series: dict[str, RVector]
    metadata: dict[str, str]

    def __post_init__(self, /) -> None:
        axis = np.array(self.axis, dtype=np.float64, ndmin=1)
        series: dict[str, RVector] = {}
        for key, values in self.series.items():
            column = np.array(values, dtype=np.float64, ndmin=1)
            if column.shape != axis.shape:
                raise ContractViolationError(f"series {key!r} has {column.size} values for {axis.size} axis points")
            column.setflags(write=False)
            series[key] = column
        axis.setflags(write=False)
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "series", series)
        object.__setattr__(self, "metadata", dict(self.metadata))


def rmse(estimates: ArrayLike, truth: float, /) -> float:
    """
    Root mean squared error of the finite estimates; `nan` marks a
    missed estimate and is left out.

    Examples
    --------
    >>> rmse([1.0, 3.0, float("nan")], 2.0)
    1.0
    >>> rmse([2.5, 2.5], 2.0)
    0.5
    """

    values = np.asarray(estimates, dtype=np.float64)
    valid = values[np.isfinite(values)]
    if valid.size == 0:
        return math.nan

    return float(np.sqrt(np.mean((valid - truth) ** 2)))


def _metadata(scenario: Scenario, name: str, axis_definition: str, /, **extra: object) -> dict[str, str]:
    base: dict[str, object] = {
        "sweep": name,
        "axis": axis_definition,
        "master_seed": scenario.master_seed,
        "n_tx": scenario.cfg_tx.n_elements,
        "n_rx": scenario.cfg_rx.n_elements,
        "carrier_hz": f"{scenario.carrier:.17g}",
        "snapshots": scenario.snapshots,
        "algorithm": scenario.algorithm,
    }
    base.update(extra)
    return {key: str(value) for key, value in base.items()}


def _finish(
    name: str,
    axis_name: str,
    axis_unit: str,
    axis: ArrayLike,
    series: Mapping[str, ArrayLike],
    metadata: dict[str, str],
    started: float,
    /,
) -> SweepResult:
    columns = {key: np.asarray(values, dtype=np.float64) for key, values in series.items()}
    result = SweepResult(name, axis_name, axis_unit, np.asarray(axis, dtype=np.float64), columns, metadata)
    _logger.info("%s sweep finished in %.2f s", name, time.perf_counter() - started)
    return result


def _estimation_task(task: tuple[Scenario, DesignedBeam, float], /) -> tuple[float, float, float]:
    scenario, beam, snr_db = task
    noise_power = scenario.sensing_noise_power(snr_db)
    grid = scenario.music.grid()
    seed, truth = scenario.master_seed, scenario.target

    ranges = np.full(scenario.trials, np.nan)
    angles = np.full(scenario.trials, np.nan)
    for trial in range(scenario.trials):
        symbols = synthesize_symbols(
            stream_rng(seed, Stream.SYMBOLS, trial), beam.precoder.n_streams, scenario.snapshots
        )
        echo = synthesize_echo(
            beam.precoder,
            symbols,
            truth,
            scenario.cfg_tx,
            scenario.cfg_rx,
            noise_power,
            rng=stream_rng(seed, Stream.NOISE, trial),
        )
        estimate = music_search(
            sample_covariance(echo),
            grid,
            scenario.cfg_tx,
            scenario.cfg_rx,
            refinement=scenario.music.refinement,
            window=scenario.music.window,
            parabolic=scenario.music.parabolic,
            polish=scenario.music.polish,
        )
        if estimate is not None:
            ranges[trial] = estimate.tx.range
            angles[trial] = estimate.tx.angle

    _logger.debug("%s estimation at %g dB done", beam.name, snr_db)
    misses = float(np.mean(np.isnan(ranges)))
    return rmse(ranges, truth.tx.range), rmse(angles, truth.tx.angle), misses


def run_estimation_sweep(scenario: Scenario, /, workers: int = 1) -> SweepResult:
    """
    MUSIC range and angle RMSE against the root CRB over the radar SNR
    for the near-field and far-field trade-off designs and the radar-only
    beam.

    Trials reuse the same symbols and noise draws at every SNR point.
    """

    started = time.perf_counter()
    names = ("nfbf", "ffbf", "radar_only")
    axis = scenario.grids.snr_db
    _logger.info("estimation sweep: %d points, %d trials", len(axis), scenario.trials)

    beams = [design_pipeline(scenario, name) for name in names]
    tasks = [(scenario, beam, snr) for beam in beams for snr in axis]
    outcomes = map_tasks(_estimation_task, tasks, workers)

    series: dict[str, list[float]] = {}
    for index, beam in enumerate(beams):
        chunk = outcomes[index * len(axis) : (index + 1) * len(axis)]
        reports = [beam.crb(scenario, scenario.sensing_noise_power(snr)) for snr in axis]
        series[f"{beam.name}.rmse_r"] = [c[0] for c in chunk]
        series[f"{beam.name}.rmse_theta"] = [c[1] for c in chunk]
        series[f"{beam.name}.miss_rate"] = [c[2] for c in chunk]
        series[f"{beam.name}.rcrb_r"] = [r.rcrb_r for r in reports]
        series[f"{beam.name}.rcrb_theta"] = [r.rcrb_theta for r in reports]

    metadata = _metadata(
        scenario, "estimation", "radar SNR |beta|^2 L P_t / sigma^2", trials=scenario.trials, eta=scenario.eta
    )
    return _finish("estimation", "snr_r", "dB", axis, series, metadata, started)


def _detection_task(task: tuple[Scenario, DesignedBeam, float, float], /) -> float:
    scenario, beam, snr_db, threshold = task
    noise_power = scenario.sensing_noise_power(snr_db)
    seed, truth = scenario.master_seed, scenario.target

    hits = 0
    for trial in range(scenario.trials):
        symbols = synthesize_symbols(
            stream_rng(seed, Stream.SYMBOLS, trial), beam.precoder.n_streams, scenario.snapshots
        )
        echo = synthesize_echo(
            beam.precoder,
            symbols,
            truth,
            scenario.cfg_tx,
            scenario.cfg_rx,
            noise_power,
            rng=stream_rng(seed, Stream.NOISE, trial),
        )
        hits += int(detect(echo, scenario.cfg_rx, truth.rx, threshold))

    return hits / scenario.trials


def run_detection_sweep(scenario: Scenario, /, workers: int = 1) -> SweepResult:
    """
    Detection probability at the true target cell over the radar SNR,
    with the threshold set for the scenario false-alarm probability.
    """

    started = time.perf_counter()
    names = ("nfbf", "ffbf", "radar_only")
    axis = scenario.grids.detection_snr_db
    threshold = threshold_from_pfa(scenario.pfa, scenario.snapshots, method="analytic")
    _logger.info("detection sweep: %d points, threshold %.6g", len(axis), threshold)

    beams = [design_pipeline(scenario, name) for name in names]
    tasks = [(scenario, beam, snr, threshold) for beam in beams for snr in axis]
    outcomes = map_tasks(_detection_task, tasks, workers)

    series = {
        f"{beam.name}.pd": outcomes[index * len(axis) : (index + 1) * len(axis)] for index, beam in enumerate(beams)
    }
    metadata = _metadata(
        scenario,
        "detection",
        "radar SNR |beta|^2 L P_t / sigma^2",
        trials=scenario.trials,
        pfa=scenario.pfa,
        threshold=f"{threshold:.17g}",
        eta=scenario.eta,
    )
    return _finish("detection", "snr_r", "dB", axis, series, metadata, started)


def _rate_task(task: tuple[Scenario, float], /) -> dict[str, float]:
    base, snr_db = task
    scenario = base.with_transmit_power(base.comm_noise_power * float(db_to_linear(snr_db)))
    truth = scenario.channels("near")

    values: dict[str, float] = {}
    for name in ("nfbf", "ffbf", "comm_only_nf", "comm_only_ff"):
        beam = design_pipeline(scenario, name)
        values[f"{name}.sum_rate"] = beam.sum_rate(scenario)
        for k in range(truth.n_users):
            sinr = user_sinr(truth, beam.precoder, scenario.comm_noise_power, k)
            values[f"{name}.sinr_db.user{k}"] = float(linear_to_db(sinr))

    return values


def run_rate_sweep(scenario: Scenario, /, workers: int = 1) -> SweepResult:
    """
    Sum rate and per-user SINR on the near-field channel over the
    transmit SNR `P_t / sigma_n^2`, for both trade-off designs and both
    communication-only bounds.
    """

    started = time.perf_counter()
    axis = scenario.grids.rate_snr_db
    _logger.info("rate sweep: %d points", len(axis))

    outcomes = map_tasks(_rate_task, [(scenario, snr) for snr in axis], workers)
    series = {key: [o[key] for o in outcomes] for key in outcomes[0]}
    metadata = _metadata(scenario, "rate", "transmit SNR P_t / sigma_n^2", eta=scenario.eta)
    return _finish("rate", "transmit_snr", "dB", axis, series, metadata, started)


def _tradeoff_task(task: tuple[Scenario, float], /) -> dict[str, float]:
    scenario, eta = task
    noise_power = scenario.sensing_noise_power(scenario.sensing_snr_db)

    values: dict[str, float] = {}
    for distance in scenario.grids.tradeoff_distances:
        moved = scenario.with_target(PolarCoord(distance, scenario.target.tx.angle))
        for name in ("nfbf", "ffbf"):
            beam = design_pipeline(moved, name, eta)
            report = beam.crb(moved, noise_power)
            prefix = f"{name}.d{distance:g}"
            values[f"{prefix}.rate"] = beam.sum_rate(moved)
            values[f"{prefix}.rcrb_r"] = report.rcrb_r
            values[f"{prefix}.rcrb_theta"] = report.rcrb_theta

    return values


def run_tradeoff_sweep(scenario: Scenario, /, workers: int = 1) -> SweepResult:
    """
    Achievable rate and root CRB over the trade-off weight, for each
    target distance of the scenario grids at the scenario target angle.
    """

    started = time.perf_counter()
    axis = scenario.grids.eta
    _logger.info("trade-off sweep: %d weights", len(axis))

    outcomes = map_tasks(_tradeoff_task, [(scenario, eta) for eta in axis], workers)
    series = {key: [o[key] for o in outcomes] for key in outcomes[0]}
    metadata = _metadata(
        scenario,
        "tradeoff",
        "trade-off weight eta",
        sensing_snr_db=scenario.sensing_snr_db,
        distances=" ".join(f"{d:g}" for d in scenario.grids.tradeoff_distances),
    )
    return _finish("tradeoff", "eta", "1", axis, series, metadata, started)


def _distance_task(task: tuple[Scenario, float], /) -> dict[str, float]:
    scenario, distance = task
    moved = scenario.with_target(PolarCoord(distance, scenario.target.tx.angle))
    noise_power = moved.sensing_noise_power(moved.sensing_snr_db)

    values: dict[str, float] = {}
    for name in ("nfbf", "ffbf"):
        report = design_pipeline(moved, name).crb(moved, noise_power)
        values[f"{name}.crb_r"] = report.crb_r
        values[f"{name}.crb_theta"] = report.crb_theta

    return values


def run_distance_sweep(scenario: Scenario, /, workers: int = 1) -> SweepResult:
    """
    CRB of the near-field and far-field trade-off designs over the target
    distance at the scenario target angle.
    """

    started = time.perf_counter()
    axis = scenario.grids.distance
    _logger.info("distance sweep: %d distances", len(axis))

    outcomes = map_tasks(_distance_task, [(scenario, d) for d in axis], workers)
    series = {key: [o[key] for o in outcomes] for key in outcomes[0]}
    metadata = _metadata(
        scenario, "distance", "target range at the transmit array", sensing_snr_db=scenario.sensing_snr_db
    )
    return _finish("distance", "distance", "m", axis, series, metadata, started)


def _power_task(task: tuple[Scenario, int, float, float], /) -> dict[str, float]:
    scenario, point, gamma_db, target_power_floor = task
    qos = scenario.qos_spec(gamma_db, target_power_floor)
    noise = scenario.sensing_noise_power(scenario.sensing_snr_db)

    values: dict[str, float] = {}
    for name, model in (("nfbf", "near"), ("ffbf", "far")):
        outcome = power_pipeline(scenario, model, qos, point)
        values[f"{name}.relaxed"] = outcome.relaxed
        values[f"{name}.power"] = outcome.power
        if outcome.precoder is None:
            values[f"{name}.crb_theta"] = math.nan
        else:
            covariance = tx_covariance(outcome.precoder)
            report = crb_report(
                scenario.target, scenario.cfg_tx, scenario.cfg_rx, covariance, scenario.snapshots, noise
            )
            values[f"{name}.crb_theta"] = report.crb_theta

    return values


def run_power_sweep(
    scenario: Scenario, /, vary: Literal["gamma", "ghat"] = "gamma", workers: int = 1
) -> SweepResult:
    """
    Minimum transmit power of the near-field and far-field designs over
    the SINR threshold (at the scenario target power floor) or over the
    target power floor (at the scenario SINR threshold), with the angle
    CRB each recovered design induces at the scenario sensing SNR.

    Infeasible points are recorded as `nan`.
    """

    started = time.perf_counter()
    if vary == "gamma":
        axis = scenario.grids.gamma_db
        tasks = [(scenario, i, g, scenario.qos.target_power_floor) for i, g in enumerate(axis)]
        axis_name, unit = "gamma", "dB"
    elif vary == "ghat":
        axis = scenario.grids.target_power_floor
        tasks = [(scenario, i, scenario.qos.gamma_db, g) for i, g in enumerate(axis)]
        axis_name, unit = "target_power_floor", "W"
    else:
        raise ContractViolationError(f"unknown power sweep axis {vary!r}")

    _logger.info("power sweep over %s: %d points", axis_name, len(axis))
    outcomes = map_tasks(_power_task, tasks, workers)
    series = {key: [o[key] for o in outcomes] for key in outcomes[0]}
    metadata = _metadata(
        scenario,
        "power",
        f"{axis_name} ({unit})",
        gamma_db=scenario.qos.gamma_db,
        target_power_floor=scenario.qos.target_power_floor,
        randomization_trials=scenario.qos.randomization_trials,
        comm_noise_power=f"{scenario.comm_noise_power:.17g}",
    )
    return _finish("power", axis_name, unit, axis, series, metadata, started)
