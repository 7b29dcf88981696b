from __future__ import annotations

__all__ = ["DesignedBeam", "PIPELINES", "PipelineName", "PowerOutcome", "design_pipeline", "power_pipeline"]

import math
from dataclasses import dataclass
from typing import Final, Literal, TypeAlias, final

from ._scenario import Scenario
from .._core import (
    ChannelModel,
    CrbReport,
    Precoder,
    QosSpec,
    SdpSolution,
    build_problem,
    crb_report,
    design_precoder,
    principal_directions,
    randomize_rank1,
    restore_feasibility,
    solve_sdp,
    sum_rate,
    tx_covariance,
)
from .._utils import CMatrix, ContractViolationError, Stream, stream_rng

PipelineName: TypeAlias = Literal["nfbf", "ffbf", "radar_only", "comm_only_nf", "comm_only_ff"]

PIPELINES: Final[dict[str, tuple[ChannelModel, float | None]]] = {
    # design model, fixed trade-off weight (None: the scenario's)
    "nfbf": ("near", None),
    "ffbf": ("far", None),
    "radar_only": ("near", 0.0),
    "comm_only_nf": ("near", 1.0),
    "comm_only_ff": ("far", 1.0),
}


@final
@dataclass(frozen=True, eq=False)
class DesignedBeam:
    """
    A precoder designed under `model`; every evaluation uses the
    near-field truth regardless of the design model.
    """

    name: str
    model: ChannelModel
    eta: float
    precoder: Precoder

    @property
    def covariance(self, /) -> CMatrix:
        return tx_covariance(self.precoder)

    def sum_rate(self, scenario: Scenario, /) -> float:
        return sum_rate(scenario.channels("near"), self.precoder, scenario.comm_noise_power)

    def crb(self, scenario: Scenario, noise_power: float, /) -> CrbReport:
        return crb_report(
            scenario.target, scenario.cfg_tx, scenario.cfg_rx, self.covariance, scenario.snapshots, noise_power
        )


def design_pipeline(scenario: Scenario, name: PipelineName, /, eta: float | None = None) -> DesignedBeam:
    """
    Runs one design pipeline (ZF, radar beam, trade-off) of the scenario.

    `eta` overrides the scenario weight for the trade-off pipelines; the
    radar-only and comm-only pipelines pin it to 0 and 1.
    """

    if name not in PIPELINES:
        raise ContractViolationError(f"unknown pipeline {name!r}")

    model, fixed = PIPELINES[name]
    weight = fixed if fixed is not None else (scenario.eta if eta is None else eta)
    precoder = design_precoder(
        scenario.channels(model),
        scenario.cfg_tx,
        scenario.target.tx,
        scenario.transmit_power,
        weight,
        scenario.algorithm,
        epsilon=scenario.am_tolerance,
        k_max=scenario.am_max_iterations,
    )
    return DesignedBeam(name, model, weight, precoder)


@final
@dataclass(frozen=True)
class PowerOutcome:
    """
    Relaxed optimum of the design problem and the power the recovered
    rank-one precoder needs on the near-field truth (`nan` when the
    design or its evaluation is infeasible). `solution` is the relaxed
    solution of the design problem.
    """

    relaxed: float
    power: float
    precoder: Precoder | None
    solution: SdpSolution


def power_pipeline(scenario: Scenario, model: ChannelModel, qos: QosSpec, /, point: int = 0) -> PowerOutcome:
    """
    Minimum transmit power meeting `qos`, designed under `model`.

    A near-model design is solved directly on the truth. A far-model
    design keeps the beam directions of its own solution and re-optimizes
    only the per-user powers on the truth.
    """

    cfg = scenario.cfg_tx
    target = scenario.target.tx
    truth = build_problem(scenario.channels("near"), target, qos, cfg)
    design = truth if model == "near" else build_problem(scenario.channels("far"), target, qos, cfg)

    relaxed = solve_sdp(design)
    if relaxed.status == "infeasible":
        return PowerOutcome(math.nan, math.nan, None, relaxed)

    rng = stream_rng(scenario.master_seed, Stream.RANDOMIZATION, point)
    solution = randomize_rank1(relaxed, scenario.qos.randomization_trials, rng)

    if model == "near":
        recovered = solution.recovered
    else:
        directions = (
            solution.recovered.entries
            if solution.recovered is not None
            else principal_directions(solution.covariances)
        )
        recovered = restore_feasibility(truth, directions)

    power = math.nan if recovered is None else recovered.power_budget
    return PowerOutcome(relaxed.total_power, power, recovered, solution)
