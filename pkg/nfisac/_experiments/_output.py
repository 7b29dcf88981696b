from __future__ import annotations

__all__ = [
    "plot_sweep",
    "read_complex_matrix",
    "read_sweep_frame",
    "write_complex_matrix",
    "write_csv",
    "write_spectrum",
]

from collections.abc import Mapping
from pathlib import Path
from typing import Literal, TextIO

import matplotlib
import numpy as np
import pandas as pd
from matplotlib.figure import Figure
from numpy.typing import ArrayLike

from ._sweeps import SweepResult
from .._core import MusicGrid
from .._utils import CMatrix, ContractViolationError, as_cmatrix

_FLOAT_FORMAT = "%.17g"


def _write_header(handle: TextIO, lines: Mapping[str, str], /) -> None:
    for key, value in lines.items():
        if "\n" in value:
            raise ContractViolationError(f"header value of {key!r} spans several lines")
        _ = handle.write(f"# {key}={value}\n")


def write_csv(result: SweepResult, path: str | Path, /) -> Path:
    """
    Writes a sweep as CSV: `# key=value` header lines (metadata, axis
    and unit), a column header, then one row per axis value.

    Floats keep 17 significant digits and gaps are written as `nan`, so
    equal results give byte-identical files.
    """

    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)

    frame = pd.DataFrame({result.axis_name: result.axis, **result.series})
    header = {**result.metadata, "axis_name": result.axis_name, "axis_unit": result.axis_unit}
    with target.open("w", encoding="utf-8", newline="") as handle:
        _write_header(handle, header)
        frame.to_csv(handle, index=False, float_format=_FLOAT_FORMAT, na_rep="nan", lineterminator="\n")

    return target


def read_sweep_frame(path: str | Path, /) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


def write_complex_matrix(matrix: ArrayLike, stem: str | Path, /) -> tuple[Path, Path]:
    """
    Persists a complex matrix as `<stem>.real.csv` and `<stem>.imag.csv`,
    each starting with a `# shape=R,C` line.
    """

    values = as_cmatrix(matrix)
    base = Path(stem)
    base.parent.mkdir(parents=True, exist_ok=True)

    paths: list[Path] = []
    for part, data in (("real", values.real), ("imag", values.imag)):
        target = base.with_name(f"{base.name}.{part}.csv")
        with target.open("w", encoding="utf-8", newline="") as handle:
            _write_header(handle, {"shape": f"{values.shape[0]},{values.shape[1]}"})
            pd.DataFrame(data).to_csv(
                handle, index=False, header=False, float_format=_FLOAT_FORMAT, lineterminator="\n"
            )
        paths.append(target)

    return paths[0], paths[1]


def read_complex_matrix(stem: str | Path, /) -> CMatrix:
    base = Path(stem)
    parts: list[np.ndarray] = []
    for part in ("real", "imag"):
        source = base.with_name(f"{base.name}.{part}.csv")
        with source.open(encoding="utf-8") as handle:
            first = handle.readline().strip()
        if not first.startswith("# shape="):
            raise ContractViolationError(f"{source} has no shape header")
        rows, columns = (int(v) for v in first.removeprefix("# shape=").split(","))
        data = pd.read_csv(source, comment="#", header=None).to_numpy(dtype=np.float64)
        if data.shape != (rows, columns):
            raise ContractViolationError(f"{source} holds {data.shape}, header says {(rows, columns)}")
        parts.append(data)

    return parts[0] + 1j * parts[1]


def write_spectrum(
    values: ArrayLike, grid: MusicGrid, path: str | Path, /, metadata: Mapping[str, str] | None = None
) -> Path:
    """
    Writes a range-angle spectrum in long form: one `range_m, angle_deg,
    value` row per grid cell, ranges outermost.
    """

    spectrum = np.asarray(values, dtype=np.float64)
    if spectrum.shape != grid.shape:
        raise ContractViolationError(f"spectrum shape {spectrum.shape} does not match grid {grid.shape}")

    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)

    ranges, angles = np.meshgrid(grid.ranges, np.degrees(grid.angles), indexing="ij")
    frame = pd.DataFrame({"range_m": ranges.ravel(), "angle_deg": angles.ravel(), "value": spectrum.ravel()})
    with target.open("w", encoding="utf-8", newline="") as handle:
        _write_header(handle, {} if metadata is None else metadata)
        frame.to_csv(handle, index=False, float_format=_FLOAT_FORMAT, na_rep="nan", lineterminator="\n")

    return target


def plot_sweep(
    result: SweepResult,
    path: str | Path,
    /,
    *,
    xscale: Literal["linear", "log"] = "linear",
    yscale: Literal["linear", "log"] = "linear",
    title: str | None = None,
) -> Path:
    """
    Draws every series of a sweep against its axis into an SVG file.

    Series with no finite value are skipped; non-positive values are
    dropped on a log scale.
    """

    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)

    figure = Figure(figsize=(7.0, 4.5))
    axes = figure.subplots()
    for key, values in result.series.items():
        mask = np.isfinite(values)
        if yscale == "log":
            mask &= values > 0
        if not np.any(mask):
            continue
        _ = axes.plot(result.axis[mask], values[mask], marker="o", markersize=3, label=key)

    axes.set_xscale(xscale)
    axes.set_yscale(yscale)
    _ = axes.set_xlabel(f"{result.axis_name} [{result.axis_unit}]")
    _ = axes.set_title(result.name if title is None else title)
    axes.grid(True, which="both", alpha=0.3)
    if axes.get_legend_handles_labels()[0]:
        _ = axes.legend(fontsize="small")

    with matplotlib.rc_context({"svg.hashsalt": "nfisac", "svg.fonttype": "path"}):
        figure.savefig(target, format="svg", metadata={"Date": None})

    return target
