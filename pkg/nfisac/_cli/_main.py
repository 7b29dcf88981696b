from __future__ import annotations

__all__ = ["COMMANDS", "SWEEPS", "RunConfig", "dispatch", "main"]

import argparse
import json
import logging
import math
import os
import sys
from collections.abc import Callable, Iterator, Sequence
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Final, Literal, NoReturn, TextIO, TypeAlias, final

from ._config import load_document, parse_document, serialize_scenario
from .._core import (
    ChannelModel,
    music_search,
    music_spectrum,
    noise_subspace,
    sample_covariance,
    synthesize_echo,
    synthesize_symbols,
)
from .._experiments import (
    PIPELINES,
    PipelineName,
    Profile,
    Scenario,
    SweepResult,
    design_pipeline,
    plot_sweep,
    power_pipeline,
    run_beampattern_cut,
    run_detection_sweep,
    run_distance_sweep,
    run_estimation_sweep,
    run_gainloss_curve,
    run_power_sweep,
    run_rate_sweep,
    run_tradeoff_sweep,
    write_complex_matrix,
    write_csv,
    write_spectrum,
)
from .._utils import ConfigError, NfisacError, Stream, UnsupportedConfigurationError, linear_to_db, stream_rng

_logger = logging.getLogger(__name__)

COMMANDS: Final = ("gainloss", "design", "beampattern", "music", "crb", "powermin", "sweep")
SWEEPS: Final = ("estimation", "detection", "rate", "tradeoff", "distance", "power")

_Scale: TypeAlias = Literal["linear", "log"]

_PLOT_SCALES: Final[dict[str, tuple[_Scale, _Scale]]] = {
    # x, y
    "gainloss": ("log", "linear"),
    "beampattern": ("linear", "log"),
    "design.beampattern": ("linear", "log"),
    "estimation": ("linear", "log"),
    "detection": ("linear", "linear"),
    "rate": ("linear", "linear"),
    "tradeoff": ("linear", "log"),
    "distance": ("log", "log"),
    "power": ("linear", "log"),
}

_LOG_FORMAT: Final = "%(asctime)s %(levelname)s %(name)s: %(message)s"


@final
@dataclass(frozen=True)
class RunConfig:
    """
    One command-line invocation: the command, where its scenario comes
    from and where its files go, the profile, and the flags that
    override the scenario or steer the command.
    """

    command: str
    config_path: Path | None
    output_dir: Path
    profile: Profile = "desk"
    seed: int | None = None
    trials: int | None = None
    workers: int = 1
    save_matrices: bool = False
    pipeline: PipelineName = "nfbf"
    eta: float | None = None
    sweep: str | None = None
    vary: Literal["gamma", "ghat"] = "gamma"

    def scenario(self, /) -> Scenario:
        """
        Parses the scenario file (or the empty document) with the seed
        and trial overrides applied on top.
        """

        doc = {} if self.config_path is None else load_document(self.config_path)
        if isinstance(doc, dict):
            doc = dict(doc)
            if self.seed is not None:
                doc["seed"] = self.seed
            if self.trials is not None:
                sweeps = doc.get("sweeps", {})
                if isinstance(sweeps, dict):
                    doc["sweeps"] = {**sweeps, "trials": self.trials}

        return parse_document(doc, self.profile)

    def prepare_output(self, /) -> Path:
        try:
            self.output_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ConfigError("--output", f"cannot create {self.output_dir}: {e.strerror}") from e
        if not os.access(self.output_dir, os.W_OK):
            raise ConfigError("--output", f"{self.output_dir} is not writable")

        return self.output_dir


_Handler: TypeAlias = Callable[[RunConfig, Scenario, Path, TextIO], None]


def _emit(result: SweepResult, output: Path, out: TextIO, /) -> None:
    xscale, yscale = _PLOT_SCALES.get(result.name, ("linear", "linear"))
    csv = write_csv(result, output / f"{result.name}.csv")
    svg = plot_sweep(result, output / f"{result.name}.svg", xscale=xscale, yscale=yscale)
    print(f"csv={csv}", file=out)
    print(f"svg={svg}", file=out)


def _gainloss(run: RunConfig, scenario: Scenario, output: Path, out: TextIO, /) -> None:
    _emit(run_gainloss_curve(scenario), output, out)


def _design(run: RunConfig, scenario: Scenario, output: Path, out: TextIO, /) -> None:
    beam = design_pipeline(scenario, run.pipeline, run.eta)
    real, imag = write_complex_matrix(beam.precoder.entries, output / "design.precoder")
    if run.save_matrices:
        _ = write_complex_matrix(beam.covariance, output / "design.covariance")

    print(
        f"pipeline={beam.name} model={beam.model} eta={beam.eta:.17g}"
        f" sum_rate={beam.sum_rate(scenario):.17g} power={beam.precoder.power_budget:.17g}",
        file=out,
    )
    print(f"precoder_real={real}", file=out)
    print(f"precoder_imag={imag}", file=out)

    cut = run_beampattern_cut(scenario, names=(run.pipeline,), eta=run.eta)
    _emit(replace(cut, name="design.beampattern"), output, out)


def _beampattern(run: RunConfig, scenario: Scenario, output: Path, out: TextIO, /) -> None:
    _emit(run_beampattern_cut(scenario), output, out)


def _music(run: RunConfig, scenario: Scenario, output: Path, out: TextIO, /) -> None:
    beam = design_pipeline(scenario, run.pipeline, run.eta)
    seed = scenario.master_seed
    symbols = synthesize_symbols(stream_rng(seed, Stream.SYMBOLS, 0), beam.precoder.n_streams, scenario.snapshots)
    echo = synthesize_echo(
        beam.precoder,
        symbols,
        scenario.target,
        scenario.cfg_tx,
        scenario.cfg_rx,
        scenario.sensing_noise_power(scenario.sensing_snr_db),
        rng=stream_rng(seed, Stream.NOISE, 0),
    )
    r_y = sample_covariance(echo)

    settings = scenario.music
    grid = settings.grid()
    coarse = grid.subgrid(slice(None, None, settings.refinement), slice(None, None, settings.refinement))
    spectrum = write_spectrum(
        music_spectrum(noise_subspace(r_y), coarse, scenario.cfg_rx),
        coarse,
        output / "music.spectrum.csv",
        {
            "pipeline": beam.name,
            "snr_r_db": f"{scenario.sensing_snr_db:.17g}",
            "master_seed": str(seed),
            "grid": "coarse receive-side search grid",
        },
    )

    estimate = music_search(
        r_y,
        grid,
        scenario.cfg_tx,
        scenario.cfg_rx,
        refinement=settings.refinement,
        window=settings.window,
        parabolic=settings.parabolic,
        polish=settings.polish,
    )
    if estimate is None:
        print("estimate=none", file=out)
    else:
        print(
            f"range_m={estimate.tx.range:.17g} angle_deg={math.degrees(estimate.tx.angle):.17g}"
            f" rx_range_m={estimate.rx.range:.17g} rx_angle_deg={math.degrees(estimate.rx.angle):.17g}"
            f" peak_ratio={estimate.peak_ratio:.17g}",
            file=out,
        )
    print(f"spectrum={spectrum}", file=out)


def _crb(run: RunConfig, scenario: Scenario, output: Path, out: TextIO, /) -> None:
    beam = design_pipeline(scenario, run.pipeline, run.eta)
    report = beam.crb(scenario, scenario.sensing_noise_power(scenario.sensing_snr_db))
    print(
        f"pipeline={beam.name} crb_r={report.crb_r:.17g} crb_theta={report.crb_theta:.17g}"
        f" snr_r={report.snr_r:.17g} snr_r_db={float(linear_to_db(report.snr_r)):.17g} status={report.status}",
        file=out,
    )


def _powermin(run: RunConfig, scenario: Scenario, output: Path, out: TextIO, /) -> None:
    qos = scenario.qos_spec()
    models: tuple[ChannelModel, ...] = ("near", "far")
    for model in models:
        outcome = power_pipeline(scenario, model, qos)
        solution = outcome.solution
        ranks = ",".join(str(r) for r in solution.ranks) or "-"
        print(
            f"model={model} status={solution.status} relaxed_w={outcome.relaxed:.17g}"
            f" power_w={outcome.power:.17g} ranks={ranks} gap={solution.gap:.17g}"
            f" iterations={solution.iterations} violated={solution.violated or '-'}",
            file=out,
        )
        if run.save_matrices and outcome.precoder is not None:
            _ = write_complex_matrix(outcome.precoder.entries, output / f"powermin.{model}.precoder")


def _sweep(run: RunConfig, scenario: Scenario, output: Path, out: TextIO, /) -> None:
    runners: dict[str, Callable[[Scenario], SweepResult]] = {
        "estimation": lambda s: run_estimation_sweep(s, run.workers),
        "detection": lambda s: run_detection_sweep(s, run.workers),
        "rate": lambda s: run_rate_sweep(s, run.workers),
        "tradeoff": lambda s: run_tradeoff_sweep(s, run.workers),
        "distance": lambda s: run_distance_sweep(s, run.workers),
        "power": lambda s: run_power_sweep(s, run.vary, run.workers),
    }
    runner = runners.get(run.sweep or "")
    if runner is None:
        raise UnsupportedConfigurationError(f"unknown sweep {run.sweep!r}, expected one of {list(SWEEPS)}")

    _emit(runner(scenario), output, out)


_HANDLERS: Final[dict[str, _Handler]] = {
    "gainloss": _gainloss,
    "design": _design,
    "beampattern": _beampattern,
    "music": _music,
    "crb": _crb,
    "powermin": _powermin,
    "sweep": _sweep,
}


def dispatch(run: RunConfig, scenario: Scenario, /, out: TextIO | None = None) -> int:
    """
    Runs one command on a scenario, writing its files under the output
    directory together with the normalized `scenario.json`, and its
    `key=value` report lines to `out` (standard output by default).
    """

    handler = _HANDLERS.get(run.command)
    if handler is None:
        raise UnsupportedConfigurationError(f"unknown command {run.command!r}, expected one of {list(COMMANDS)}")

    output = run.prepare_output()
    with (output / "scenario.json").open("w", encoding="utf-8", newline="\n") as handle:
        json.dump(serialize_scenario(scenario), handle, indent=2)
        _ = handle.write("\n")

    _logger.info("running %s into %s", run.command, output)
    handler(run, scenario, output, sys.stdout if out is None else out)
    return 0


def _positive_int(text: str, /) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")

    return value


def _weight(text: str, /) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"expected a weight in [0, 1], got {value}")

    return value


class _Parser(argparse.ArgumentParser):
    # Usage errors raise instead of exiting; subcommand parsers inherit this class.
    def error(self, message: str) -> NoReturn:
        raise argparse.ArgumentError(None, message)


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    _ = common.add_argument("--config", type=Path, default=None, help="JSON scenario file (default: built-in)")
    _ = common.add_argument("--output", type=Path, default=Path("nfisac-output"), help="output directory")
    _ = common.add_argument("--profile", choices=("desk", "paper"), default="desk", help="array size and trial count")
    _ = common.add_argument("--seed", type=int, default=None, help="master seed override")
    _ = common.add_argument("--trials", type=_positive_int, default=None, help="Monte-Carlo trial count override")
    _ = common.add_argument(
        "--workers", type=_positive_int, default=os.cpu_count() or 1, help="worker processes for sweeps"
    )
    _ = common.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG")
    _ = common.add_argument("--save-matrices", action="store_true", help="also write precoders and covariances")

    beam = argparse.ArgumentParser(add_help=False)
    _ = beam.add_argument("--pipeline", choices=tuple(PIPELINES), default="nfbf", help="design pipeline")
    _ = beam.add_argument("--eta", type=_weight, default=None, help="trade-off weight override")

    parser = _Parser(prog="nfisac", description="Near-field ISAC beamforming simulator.")
    commands = parser.add_subparsers(dest="command", required=True, metavar="command")
    _ = commands.add_parser("gainloss", parents=[common], help="gain loss of far-field steering over distance")
    _ = commands.add_parser("design", parents=[common, beam], help="design a precoder and its beampattern")
    _ = commands.add_parser("beampattern", parents=[common], help="beampattern cut at the target range")
    _ = commands.add_parser("music", parents=[common, beam], help="one MUSIC estimation run with spectrum dump")
    _ = commands.add_parser("crb", parents=[common, beam], help="Cramer-Rao bound of a design")
    _ = commands.add_parser("powermin", parents=[common], help="QoS-constrained power minimization")
    sweep = commands.add_parser("sweep", parents=[common], help="Monte-Carlo or analytic sweep")
    _ = sweep.add_argument("sweep", choices=SWEEPS, help="sweep name")
    _ = sweep.add_argument("--vary", choices=("gamma", "ghat"), default="gamma", help="power sweep axis")

    return parser


def _run_config(args: argparse.Namespace, /) -> RunConfig:
    return RunConfig(
        args.command,
        args.config,
        args.output,
        args.profile,
        seed=args.seed,
        trials=args.trials,
        workers=args.workers,
        save_matrices=args.save_matrices,
        pipeline=getattr(args, "pipeline", "nfbf"),
        eta=getattr(args, "eta", None),
        sweep=getattr(args, "sweep", None),
        vary=getattr(args, "vary", "gamma"),
    )


def _configure_logging(verbosity: int, /) -> None:
    level = logging.WARNING if verbosity == 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format=_LOG_FORMAT, stream=sys.stderr)
    logging.getLogger("nfisac").setLevel(level)
    logging.captureWarnings(True)


def _leaves(error: BaseException, /) -> Iterator[BaseException]:
    if isinstance(error, BaseExceptionGroup):
        for inner in error.exceptions:
            yield from _leaves(inner)
    else:
        yield error


def _error_line(error: BaseException, /) -> str:
    if isinstance(error, ConfigError):
        path, message = error.path, error.detail
    else:
        path, message = "-", str(error)

    message = " ".join(message.split())
    return f"error kind={type(error).__name__} path={path} message={message}"


def main(argv: Sequence[str] | None = None, /) -> int:
    """
    Command-line entry point; returns the process exit status.

    Failures are reported on standard error as one
    `error kind=<class> path=<dotted key or -> message=<text>` line per
    problem, with exit status 2.
    """

    try:
        args = _build_parser().parse_args(argv)
    except argparse.ArgumentError as e:
        print(_error_line(e), file=sys.stderr)
        return 2
    _configure_logging(args.verbose)

    try:
        run = _run_config(args)
        return dispatch(run, run.scenario())
    except (ExceptionGroup, NfisacError, OSError) as e:
        for leaf in _leaves(e):
            print(_error_line(leaf), file=sys.stderr)
        return 2
