from __future__ import annotations

__all__ = ["run_beampattern_cut", "run_gainloss_curve"]

import logging
import math
import time

import numpy as np

from ._pipelines import PipelineName, design_pipeline
from ._scenario import Scenario
from ._sweeps import SweepResult
from .._core import PolarCoord, beampattern_near, field_boundaries, gain_loss_approx, gain_loss_exact
from .._utils import RVector

_logger = logging.getLogger(__name__)


def run_gainloss_curve(
    scenario: Scenario, /, angles_deg: tuple[float, ...] = (0.0, 30.0, 60.0), points: int = 60
) -> SweepResult:
    """
    Exact and closed-form gain loss of far-field steering over the
    distance, from the lower Fresnel boundary to the Fraunhofer distance
    of the transmit array, for each angle.
    """

    started = time.perf_counter()
    cfg = scenario.cfg_tx
    lower, fraunhofer = field_boundaries(cfg)
    distances = np.geomspace(lower, fraunhofer, points)

    series: dict[str, RVector] = {}
    for angle in angles_deg:
        locations = [PolarCoord(float(r), math.radians(angle)) for r in distances]
        series[f"exact.theta{angle:g}"] = np.array([gain_loss_exact(cfg, p) for p in locations])
        series[f"approx.theta{angle:g}"] = np.array([gain_loss_approx(cfg, p) for p in locations])

    metadata = {
        "sweep": "gainloss",
        "axis": "distance from the transmit array center",
        "n_tx": str(cfg.n_elements),
        "carrier_hz": f"{scenario.carrier:.17g}",
        "lower_fresnel_m": f"{lower:.17g}",
        "fraunhofer_m": f"{fraunhofer:.17g}",
    }
    _logger.info("gain-loss curves computed in %.2f s", time.perf_counter() - started)
    return SweepResult("gainloss", "distance", "m", distances, series, metadata)


def run_beampattern_cut(
    scenario: Scenario,
    /,
    angle_step_deg: float = 0.25,
    names: tuple[PipelineName, ...] = ("nfbf", "ffbf", "radar_only"),
    eta: float | None = None,
) -> SweepResult:
    """
    Transmit beampattern over the angle at the target range, by default
    for the near-field and far-field trade-off designs and the
    radar-only beam.
    """

    started = time.perf_counter()
    limit = 90.0 - angle_step_deg
    count = int(round(2.0 * limit / angle_step_deg)) + 1
    angles_deg = np.linspace(-limit, limit, count)
    angles = np.radians(angles_deg)

    series: dict[str, RVector] = {}
    for name in names:
        beam = design_pipeline(scenario, name, eta)
        series[name] = beampattern_near(beam.covariance, scenario.cfg_tx, [scenario.target.tx.range], angles)[0]

    metadata = {
        "sweep": "beampattern",
        "axis": "angle from broadside at the target range",
        "target_range_m": f"{scenario.target.tx.range:.17g}",
        "n_tx": str(scenario.cfg_tx.n_elements),
        "eta": str(scenario.eta if eta is None else eta),
        "master_seed": str(scenario.master_seed),
    }
    _logger.info("beampattern cut computed in %.2f s", time.perf_counter() - started)
    return SweepResult("beampattern", "angle", "deg", angles_deg, series, metadata)
