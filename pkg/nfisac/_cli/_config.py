from __future__ import annotations

__all__ = ["load_document", "parse_config", "parse_document", "serialize_scenario"]

import json
import math
from collections.abc import Callable, Mapping, Sequence
from pathlib import Path
from typing import Any, Final, TypeVar

from .._core import SPEED_OF_LIGHT, PolarCoord, UserPlacement
from .._experiments import MusicSettings, Profile, QosSettings, Scenario, SweepGrids, complete_user, make_scenario
from .._utils import ConfigError, NfisacError, dbm_to_watts, watts_to_dbm

_T = TypeVar("_T")

_GROUP_MESSAGE: Final = "invalid scenario config"

_SECTIONS: Final[dict[str, frozenset[str]]] = {
    "": frozenset(["seed", "arrays", "power", "users", "target", "sensing", "design", "music", "qos", "sweeps"]),
    "arrays": frozenset(["tx_elements", "rx_elements", "carrier_ghz", "spacing_wavelengths"]),
    "power": frozenset(["transmit_dbm", "comm_noise_dbm"]),
    "user": frozenset(["range_m", "angle_deg", "paths", "scatterers", "los_gain", "scatter_gains"]),
    "scatterer": frozenset(["range_m", "angle_deg"]),
    "target": frozenset(["range_m", "angle_deg", "beta"]),
    "sensing": frozenset(["snapshots", "pfa", "snr_db"]),
    "design": frozenset(["eta", "algorithm", "tolerance", "max_iterations"]),
    "music": frozenset([
        "range_min_m",
        "range_max_m",
        "range_step_m",
        "angle_limit_deg",
        "angle_step_deg",
        "refinement",
        "window",
        "parabolic",
        "polish",
    ]),
    "qos": frozenset(["gamma_db", "ghat", "randomization_trials"]),
    "sweeps": frozenset([
        "trials",
        "snr_db",
        "detection_snr_db",
        "rate_snr_db",
        "eta",
        "tradeoff_distances_m",
        "distances_m",
        "gamma_db",
        "ghat",
    ]),
}

_DEFAULT_USERS: Final = ({"range_m": 5.0, "angle_deg": 0.0}, {"range_m": 15.0, "angle_deg": 0.0})

# Digits kept when converting back to boundary units, so that
# parse -> serialize -> parse is a fixed point.
_BOUNDARY_DIGITS: Final = 12


def _describe(value: object, /) -> str:
    return json.dumps(value) if isinstance(value, (str, int, float, bool)) or value is None else type(value).__name__


class _Reader:
    """
    Typed access to a JSON document that records every problem instead
    of stopping at the first one.
    """

    def __init__(self, /) -> None:
        self.errors: list[ConfigError] = []

    def fail(self, path: str, message: str, /) -> None:
        self.errors.append(ConfigError(path or "-", message))

    def section(self, doc: Mapping[str, Any], key: str, path: str, kind: str, /) -> dict[str, Any]:
        value = doc.get(key, {})
        return self.mapping(value, path, kind)

    def mapping(self, value: object, path: str, kind: str, /) -> dict[str, Any]:
        if not isinstance(value, dict):
            self.fail(path, f"expected an object, got {_describe(value)}")
            return {}

        allowed = _SECTIONS[kind]
        for key in value:
            if key not in allowed:
                self.fail(_join(path, str(key)), "unknown key")
        return {str(k): v for k, v in value.items() if k in allowed}

    def number(
        self,
        doc: Mapping[str, Any],
        key: str,
        path: str,
        default: float,
        /,
        *,
        check: Callable[[float], bool] | None = None,
        expected: str = "",
    ) -> float:
        if key not in doc:
            return default

        value = doc[key]
        here = _join(path, key)
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            self.fail(here, f"expected a finite number, got {_describe(value)}")
            return default
        if check is not None and not check(float(value)):
            self.fail(here, f"value {value} is out of range, expected {expected}")
            return default

        return float(value)

    def integer(
        self, doc: Mapping[str, Any], key: str, path: str, default: _T, /, *, minimum: int = 0
    ) -> int | _T:
        if key not in doc:
            return default

        value = doc[key]
        here = _join(path, key)
        if isinstance(value, bool) or not isinstance(value, int):
            self.fail(here, f"expected an integer, got {_describe(value)}")
            return default
        if value < minimum:
            self.fail(here, f"value {value} is out of range, expected an integer >= {minimum}")
            return default

        return value

    def choice(self, doc: Mapping[str, Any], key: str, path: str, default: str, choices: Sequence[str], /) -> str:
        if key not in doc:
            return default

        value = doc[key]
        if value not in choices:
            self.fail(_join(path, key), f"expected one of {list(choices)}, got {_describe(value)}")
            return default

        return value

    def boolean(self, doc: Mapping[str, Any], key: str, path: str, default: bool, /) -> bool:
        value = doc.get(key, default)
        if not isinstance(value, bool):
            self.fail(_join(path, key), f"expected true or false, got {_describe(value)}")
            return default

        return value

    def complex_pair(self, value: object, path: str, /) -> complex | None:
        if (
            isinstance(value, list)
            and len(value) == 2
            and all(_is_number(v) for v in value)
        ):
            return complex(float(value[0]), float(value[1]))

        self.fail(path, f"expected a [real, imaginary] pair, got {_describe(value)}")
        return None

    def numbers(
        self,
        doc: Mapping[str, Any],
        key: str,
        path: str,
        default: tuple[float, ...],
        /,
        *,
        check: Callable[[float], bool] | None = None,
        expected: str = "",
    ) -> tuple[float, ...]:
        if key not in doc:
            return default

        value = doc[key]
        here = _join(path, key)
        if not isinstance(value, list) or len(value) == 0:
            self.fail(here, f"expected a non-empty list of numbers, got {_describe(value)}")
            return default

        result: list[float] = []
        for index, item in enumerate(value):
            if not _is_number(item):
                self.fail(f"{here}[{index}]", f"expected a finite number, got {_describe(item)}")
            elif check is not None and not check(float(item)):
                self.fail(f"{here}[{index}]", f"value {item} is out of range, expected {expected}")
            else:
                result.append(float(item))

        return tuple(result) if len(result) == len(value) else default


def _is_number(value: object, /) -> bool:
    return not isinstance(value, bool) and isinstance(value, (int, float)) and math.isfinite(value)


def _join(path: str, key: str, /) -> str:
    return key if path == "" else f"{path}.{key}"


def _positive(value: float, /) -> bool:
    return value > 0


def _non_negative(value: float, /) -> bool:
    return value >= 0


def _open_angle(value: float, /) -> bool:
    return -90.0 < value < 90.0


def _unit_interval(value: float, /) -> bool:
    return 0.0 <= value <= 1.0


def _probability(value: float, /) -> bool:
    return 0.0 < value < 1.0


def _location(reader: _Reader, doc: Mapping[str, Any], path: str, default: tuple[float, float], /) -> PolarCoord:
    r = reader.number(doc, "range_m", path, default[0], check=_positive, expected="a positive distance")
    angle = reader.number(doc, "angle_deg", path, default[1], check=_open_angle, expected="an angle in (-90, 90)")
    return PolarCoord.from_degrees(r, angle)


def _parse_users(reader: _Reader, doc: Mapping[str, Any], seed: int, wavelength: float, /) -> list[UserPlacement]:
    raw = doc.get("users", list(_DEFAULT_USERS))
    if not isinstance(raw, list) or len(raw) == 0:
        reader.fail("users", f"expected a non-empty list of users, got {_describe(raw)}")
        return []

    users: list[UserPlacement] = []
    for index, item in enumerate(raw):
        path = f"users[{index}]"
        entry = reader.mapping(item, path, "user")
        los = _location(reader, entry, path, (5.0, 0.0))

        scatterers: list[PolarCoord] | None = None
        if "scatterers" in entry:
            listed = entry["scatterers"]
            if not isinstance(listed, list):
                reader.fail(f"{path}.scatterers", f"expected a list, got {_describe(listed)}")
            else:
                scatterers = []
                for j, s in enumerate(listed):
                    here = f"{path}.scatterers[{j}]"
                    scatterers.append(_location(reader, reader.mapping(s, here, "scatterer"), here, (1.0, 0.0)))

        default_paths = 2 if scatterers is None else len(scatterers)
        paths = reader.integer(entry, "paths", path, default_paths)
        if scatterers is not None and paths != len(scatterers):
            reader.fail(f"{path}.paths", f"{paths} paths but {len(scatterers)} scatterers are listed")

        los_gain = reader.complex_pair(entry["los_gain"], f"{path}.los_gain") if "los_gain" in entry else None

        scatter_gains: list[complex] | None = None
        if "scatter_gains" in entry:
            listed = entry["scatter_gains"]
            here = f"{path}.scatter_gains"
            if not isinstance(listed, list) or len(listed) != paths:
                reader.fail(here, f"expected a list of {paths} [real, imaginary] pairs")
            else:
                pairs = [reader.complex_pair(g, f"{here}[{j}]") for j, g in enumerate(listed)]
                scatter_gains = [g for g in pairs if g is not None]

        if reader.errors:
            continue
        users.append(
            complete_user(
                seed,
                index,
                los,
                wavelength,
                paths,
                scatterers=scatterers,
                los_gain=los_gain,
                scatter_gains=scatter_gains,
            )
        )

    return users


def _read_scenario(reader: _Reader, doc: object, profile: Profile, /) -> Scenario:
    root = reader.mapping(doc, "", "")

    seed = reader.integer(root, "seed", "", 0)

    arrays = reader.section(root, "arrays", "arrays", "arrays")
    n_tx = reader.integer(arrays, "tx_elements", "arrays", None, minimum=2)
    n_rx = reader.integer(arrays, "rx_elements", "arrays", None, minimum=2)
    carrier_ghz = reader.number(arrays, "carrier_ghz", "arrays", 30.0, check=_positive, expected="a positive frequency")
    spacing = reader.number(
        arrays, "spacing_wavelengths", "arrays", 0.5, check=_positive, expected="a positive spacing"
    )

    power = reader.section(root, "power", "power", "power")
    transmit_dbm = reader.number(power, "transmit_dbm", "power", 30.0)
    noise_dbm = reader.number(power, "comm_noise_dbm", "power", -60.0)

    target = reader.section(root, "target", "target", "target")
    target_location = _location(reader, target, "target", (5.0, 60.0))
    beta = reader.complex_pair(target["beta"], "target.beta") if "beta" in target else complex(1.0)

    sensing = reader.section(root, "sensing", "sensing", "sensing")
    snapshots = reader.integer(sensing, "snapshots", "sensing", 64, minimum=1)
    pfa = reader.number(sensing, "pfa", "sensing", 1e-7, check=_probability, expected="a probability in (0, 1)")
    sensing_snr_db = reader.number(sensing, "snr_db", "sensing", 10.0)

    design = reader.section(root, "design", "design", "design")
    eta = reader.number(design, "eta", "design", 0.5, check=_unit_interval, expected="a weight in [0, 1]")
    algorithm = reader.choice(design, "algorithm", "design", "ls", ("ls", "am"))
    tolerance = reader.number(design, "tolerance", "design", 1e-6, check=_positive, expected="a positive tolerance")
    max_iterations = reader.integer(design, "max_iterations", "design", 100, minimum=1)

    music_doc = reader.section(root, "music", "music", "music")
    defaults = MusicSettings()
    range_min = reader.number(music_doc, "range_min_m", "music", defaults.range_min, check=_positive, expected="> 0")
    range_max = reader.number(music_doc, "range_max_m", "music", defaults.range_max, check=_positive, expected="> 0")
    range_step = reader.number(music_doc, "range_step_m", "music", defaults.range_step, check=_positive, expected="> 0")
    angle_limit_deg = reader.number(
        music_doc,
        "angle_limit_deg",
        "music",
        math.degrees(defaults.angle_limit),
        check=lambda v: 0.0 < v < 90.0,
        expected="an angle in (0, 90)",
    )
    angle_step_deg = reader.number(
        music_doc, "angle_step_deg", "music", math.degrees(defaults.angle_step), check=_positive, expected="> 0"
    )
    if range_max <= range_min:
        reader.fail("music.range_max_m", f"value {range_max} must exceed range_min_m {range_min}")
    refinement = reader.integer(music_doc, "refinement", "music", defaults.refinement, minimum=1)
    window = reader.integer(music_doc, "window", "music", defaults.window, minimum=1)
    parabolic = reader.boolean(music_doc, "parabolic", "music", defaults.parabolic)
    polish = reader.boolean(music_doc, "polish", "music", defaults.polish)

    qos_doc = reader.section(root, "qos", "qos", "qos")
    gamma_db = reader.number(qos_doc, "gamma_db", "qos", 15.0)
    ghat = reader.number(qos_doc, "ghat", "qos", 100.0, check=_non_negative, expected="a non-negative power")
    randomization_trials = reader.integer(qos_doc, "randomization_trials", "qos", 200)

    sweeps = reader.section(root, "sweeps", "sweeps", "sweeps")
    trials = reader.integer(sweeps, "trials", "sweeps", None, minimum=1)
    grid_defaults = SweepGrids()
    grids = SweepGrids(
        snr_db=reader.numbers(sweeps, "snr_db", "sweeps", grid_defaults.snr_db),
        detection_snr_db=reader.numbers(sweeps, "detection_snr_db", "sweeps", grid_defaults.detection_snr_db),
        rate_snr_db=reader.numbers(sweeps, "rate_snr_db", "sweeps", grid_defaults.rate_snr_db),
        eta=reader.numbers(sweeps, "eta", "sweeps", grid_defaults.eta, check=_unit_interval, expected="[0, 1]"),
        tradeoff_distances=reader.numbers(
            sweeps, "tradeoff_distances_m", "sweeps", grid_defaults.tradeoff_distances, check=_positive, expected="> 0"
        ),
        distance=reader.numbers(
            sweeps, "distances_m", "sweeps", grid_defaults.distance, check=_positive, expected="> 0"
        ),
        gamma_db=reader.numbers(sweeps, "gamma_db", "sweeps", grid_defaults.gamma_db),
        target_power_floor=reader.numbers(
            sweeps, "ghat", "sweeps", grid_defaults.target_power_floor, check=_non_negative, expected=">= 0"
        ),
    )

    users = _parse_users(reader, root, seed, SPEED_OF_LIGHT / (carrier_ghz * 1e9))

    if reader.errors:
        raise ExceptionGroup(_GROUP_MESSAGE, reader.errors)

    return make_scenario(
        profile,
        n_tx=n_tx,
        n_rx=n_rx,
        carrier=carrier_ghz * 1e9,
        spacing_wavelengths=spacing,
        users=users,
        target=target_location,
        beta=complex(1.0) if beta is None else beta,
        transmit_power=float(dbm_to_watts(transmit_dbm)),
        trials=trials,
        master_seed=seed,
        comm_noise_power=float(dbm_to_watts(noise_dbm)),
        snapshots=snapshots,
        eta=eta,
        algorithm=algorithm,
        am_tolerance=tolerance,
        am_max_iterations=max_iterations,
        pfa=pfa,
        sensing_snr_db=sensing_snr_db,
        music=MusicSettings(
            range_min,
            range_max,
            range_step,
            math.radians(angle_limit_deg),
            math.radians(angle_step_deg),
            refinement,
            window,
            parabolic,
            polish,
        ),
        qos=QosSettings(gamma_db, ghat, randomization_trials),
        grids=grids,
    )


def parse_document(doc: object, /, profile: Profile = "paper") -> Scenario:
    """
    Builds a scenario from a parsed JSON document in boundary units
    (GHz, dBm, degrees, meters).

    Every key is optional; missing keys take the simulation defaults and
    `profile` decides the array sizes and trial count. All problems are
    raised together as an `ExceptionGroup` of `ConfigError`s.
    """

    reader = _Reader()
    try:
        return _read_scenario(reader, doc, profile)
    except NfisacError as e:
        # a value each key accepts alone, rejected in combination
        raise ExceptionGroup(_GROUP_MESSAGE, [*reader.errors, ConfigError("-", str(e))]) from e


def load_document(path: str | Path, /) -> object:
    """
    Reads a JSON scenario file as a plain document; an empty file is the
    empty document.
    """

    source = Path(path)
    try:
        text = source.read_text(encoding="utf-8")
    except OSError as e:
        raise ExceptionGroup(_GROUP_MESSAGE, [ConfigError("-", f"cannot read {source}: {e.strerror}")]) from e

    if text.strip() == "":
        return {}

    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ExceptionGroup(
            _GROUP_MESSAGE, [ConfigError("-", f"not valid JSON (line {e.lineno}, column {e.colno}): {e.msg}")]
        ) from e


def parse_config(path: str | Path, /, profile: Profile = "paper") -> Scenario:
    """
    Reads a JSON scenario file; an empty file gives the default
    scenario of `profile`.
    """

    return parse_document(load_document(path), profile)


def _boundary(value: float, /) -> float:
    return round(value, _BOUNDARY_DIGITS)


def _pair(value: complex, /) -> list[float]:
    return [value.real, value.imag]


def serialize_scenario(scenario: Scenario, /) -> dict[str, Any]:
    """
    The fully normalized JSON document of a scenario, in boundary units
    and with every default spelled out.
    """

    music = scenario.music
    target = scenario.target
    return {
        "seed": scenario.master_seed,
        "arrays": {
            "tx_elements": scenario.cfg_tx.n_elements,
            "rx_elements": scenario.cfg_rx.n_elements,
            "carrier_ghz": _boundary(scenario.carrier / 1e9),
            "spacing_wavelengths": _boundary(scenario.cfg_tx.spacing / scenario.wavelength),
        },
        "power": {
            "transmit_dbm": _boundary(float(watts_to_dbm(scenario.transmit_power))),
            "comm_noise_dbm": _boundary(float(watts_to_dbm(scenario.comm_noise_power))),
        },
        "users": [
            {
                "range_m": u.los.range,
                "angle_deg": _boundary(math.degrees(u.los.angle)),
                "paths": u.n_paths,
                "scatterers": [
                    {"range_m": s.range, "angle_deg": _boundary(math.degrees(s.angle))} for s in u.scatterers
                ],
                "los_gain": _pair(u.los_gain),
                "scatter_gains": [_pair(g) for g in u.scatter_gains],
            }
            for u in scenario.users
        ],
        "target": {
            "range_m": target.tx.range,
            "angle_deg": _boundary(math.degrees(target.tx.angle)),
            "beta": _pair(target.beta),
        },
        "sensing": {"snapshots": scenario.snapshots, "pfa": scenario.pfa, "snr_db": scenario.sensing_snr_db},
        "design": {
            "eta": scenario.eta,
            "algorithm": scenario.algorithm,
            "tolerance": scenario.am_tolerance,
            "max_iterations": scenario.am_max_iterations,
        },
        "music": {
            "range_min_m": music.range_min,
            "range_max_m": music.range_max,
            "range_step_m": music.range_step,
            "angle_limit_deg": _boundary(math.degrees(music.angle_limit)),
            "angle_step_deg": _boundary(math.degrees(music.angle_step)),
            "refinement": music.refinement,
            "window": music.window,
            "parabolic": music.parabolic,
            "polish": music.polish,
        },
        "qos": {
            "gamma_db": scenario.qos.gamma_db,
            "ghat": scenario.qos.target_power_floor,
            "randomization_trials": scenario.qos.randomization_trials,
        },
        "sweeps": {
            "trials": scenario.trials,
            "snr_db": list(scenario.grids.snr_db),
            "detection_snr_db": list(scenario.grids.detection_snr_db),
            "rate_snr_db": list(scenario.grids.rate_snr_db),
            "eta": list(scenario.grids.eta),
            "tradeoff_distances_m": list(scenario.grids.tradeoff_distances),
            "distances_m": list(scenario.grids.distance),
            "gamma_db": list(scenario.grids.gamma_db),
            "ghat": list(scenario.grids.target_power_floor),
        },
    }
