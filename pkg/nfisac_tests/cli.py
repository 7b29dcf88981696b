from __future__ import annotations

import json
import math
from pathlib import Path

import pytest

from nfisac import (
    ConfigError,
    RunConfig,
    dispatch,
    load_document,
    main,
    parse_config,
    parse_document,
    serialize_scenario,
)

_SMALL = Path(__file__).parent / "samples" / "small.json"


def _report(line: str, /) -> dict[str, str]:
    pairs = (field.split("=", 1) for field in line.split() if "=" in field)
    return {key: value for key, value in pairs}


def _run(*argv: str | Path) -> int:
    return main([str(a) for a in argv])


class Test__parse_config:
    @staticmethod
    def test__empty_file_gives_the_defaults(tmp_path: Path) -> None:
        empty = tmp_path / "empty.json"
        _ = empty.write_text("")
        scenario = parse_config(empty)

        assert scenario.cfg_tx.n_elements == 256
        assert scenario.carrier == 30e9
        assert scenario.transmit_power == pytest.approx(1.0)
        assert [u.los.range for u in scenario.users] == [5.0, 15.0]
        assert math.degrees(scenario.target.tx.angle) == pytest.approx(60.0)

    @staticmethod
    def test__reads_the_sample_file() -> None:
        scenario = parse_config(_SMALL, "desk")

        assert (scenario.cfg_tx.n_elements, scenario.cfg_rx.n_elements) == (16, 16)
        assert scenario.master_seed == 7
        assert scenario.trials == 2
        assert scenario.grids.rate_snr_db == (80.0, 120.0)
        assert scenario.qos.randomization_trials == 10

    @staticmethod
    def test__collects_every_problem() -> None:
        doc = {
            "arrays": {"tx_elements": 1, "colour": "red"},
            "users": [{"range_m": 5.0, "angle_deg": 95.0}],
            "target": {"angle_deg": -90.0},
        }
        with pytest.raises(ExceptionGroup) as info:
            _ = parse_document(doc)

        errors = info.value.exceptions
        assert all(isinstance(e, ConfigError) for e in errors)
        paths = {e.path for e in errors if isinstance(e, ConfigError)}
        assert paths == {"arrays.tx_elements", "arrays.colour", "users[0].angle_deg", "target.angle_deg"}

    @staticmethod
    def test__rejects_values_of_the_wrong_type() -> None:
        with pytest.raises(ExceptionGroup) as info:
            _ = parse_document({"seed": 1.5, "music": {"parabolic": "yes"}, "target": {"beta": [1.0]}})

        paths = sorted(e.path for e in info.value.exceptions if isinstance(e, ConfigError))
        assert paths == ["music.parabolic", "seed", "target.beta"]

    @staticmethod
    def test__peak_polishing_is_on_unless_disabled() -> None:
        assert parse_document({}, "desk").music.polish
        scenario = parse_document({"music": {"polish": False}}, "desk")

        assert not scenario.music.polish
        assert serialize_scenario(scenario)["music"]["polish"] is False

    @staticmethod
    def test__rejects_malformed_json(tmp_path: Path) -> None:
        broken = tmp_path / "broken.json"
        _ = broken.write_text("{\"seed\": ")
        with pytest.raises(ExceptionGroup) as info:
            _ = load_document(broken)
        assert "not valid JSON" in str(info.value.exceptions[0])

    @staticmethod
    def test__serialized_document_is_a_fixed_point() -> None:
        first = serialize_scenario(parse_config(_SMALL, "desk"))
        second = serialize_scenario(parse_document(first, "desk"))

        assert second == first
        assert json.loads(json.dumps(first)) == first
        assert first["sweeps"]["trials"] == 2
        assert len(first["users"][0]["scatter_gains"]) == first["users"][0]["paths"]


class Test__dispatch:
    @staticmethod
    def test__writes_the_normalized_scenario(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        scenario = parse_config(_SMALL, "desk")
        run = RunConfig("crb", _SMALL, tmp_path / "out")

        assert dispatch(run, scenario) == 0
        written = json.loads((tmp_path / "out" / "scenario.json").read_text())
        assert written == serialize_scenario(scenario)

        report = _report(capsys.readouterr().out.strip())
        assert report["pipeline"] == "nfbf"
        assert report["status"] == "finite"
        assert 0 < float(report["crb_r"]) < math.inf

    @staticmethod
    def test__seed_and_trial_flags_override_the_file(tmp_path: Path) -> None:
        run = RunConfig("crb", _SMALL, tmp_path, seed=11, trials=5)
        scenario = run.scenario()
        assert (scenario.master_seed, scenario.trials) == (11, 5)


class Test__main:
    @staticmethod
    def test__design_weight_one_is_the_communication_design(tmp_path: Path) -> None:
        assert _run("design", "--config", _SMALL, "--output", tmp_path / "a", "--eta", "1") == 0
        assert _run("design", "--config", _SMALL, "--output", tmp_path / "b", "--pipeline", "comm_only_nf") == 0

        for part in ("real", "imag"):
            name = f"design.precoder.{part}.csv"
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        assert (tmp_path / "a" / "design.beampattern.svg").exists()

    @staticmethod
    def test__sweeps_are_byte_identical_on_rerun(tmp_path: Path) -> None:
        for name in ("one", "two"):
            argv = ("sweep", "rate", "--config", _SMALL, "--seed", "7", "--workers", "1", "--output", tmp_path / name)
            assert _run(*argv) == 0

        first = (tmp_path / "one" / "rate.csv").read_bytes()
        assert first == (tmp_path / "two" / "rate.csv").read_bytes()
        assert first.startswith(b"# ")
        assert (tmp_path / "one" / "rate.svg").exists()

    @staticmethod
    def test__crb_prints_finite_bounds(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        assert _run("crb", "--config", _SMALL, "--output", tmp_path, "--pipeline", "radar_only") == 0

        report = _report(capsys.readouterr().out.strip())
        assert report["pipeline"] == "radar_only"
        assert math.isfinite(float(report["crb_theta"]))
        assert float(report["snr_r_db"]) == pytest.approx(20.0)

    @staticmethod
    def test__powermin_reports_both_models(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        assert _run("powermin", "--config", _SMALL, "--output", tmp_path) == 0

        lines = capsys.readouterr().out.strip().splitlines()
        assert [_report(line)["model"] for line in lines] == ["near", "far"]

    @staticmethod
    def test__music_dumps_the_spectrum(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        assert _run("music", "--config", _SMALL, "--output", tmp_path, "--pipeline", "radar_only") == 0

        out = capsys.readouterr().out
        assert (tmp_path / "music.spectrum.csv").exists()
        assert "spectrum=" in out

    @staticmethod
    def test__config_errors_exit_with_status_two(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        config = tmp_path / "bad.json"
        _ = config.write_text(json.dumps({"users": [{"angle_deg": 95}], "target": {"angle_deg": 95}}))

        assert _run("crb", "--config", config, "--output", tmp_path / "out") == 2

        lines = capsys.readouterr().err.strip().splitlines()
        errors = [line for line in lines if line.startswith("error ")]
        assert len(errors) == 2
        assert {_report(line)["path"] for line in errors} == {"users[0].angle_deg", "target.angle_deg"}
        assert all(_report(line)["kind"] == "ConfigError" for line in errors)
        assert not (tmp_path / "out").exists()

    @staticmethod
    def test__usage_errors_exit_with_status_two(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        assert _run("frobnicate") == 2
        assert _run("design", "--output", tmp_path / "out", "--eta", "2") == 2

        lines = capsys.readouterr().err.strip().splitlines()
        assert len(lines) == 2
        reports = [_report(line) for line in lines]
        assert all(line.startswith("error ") for line in lines)
        assert [r["kind"] for r in reports] == ["ArgumentError", "ArgumentError"]
        assert [r["path"] for r in reports] == ["-", "-"]
        assert "frobnicate" in lines[0]
        assert "--eta" in lines[1]
        assert not (tmp_path / "out").exists()
