"""Figure construction: one PlotSpec in, one PNG image out.

Series are drawn in input order (grouped series in first-appearance order
of the group column) with no sorting or resampling, so the plotted arrays
equal the source columns exactly.  Rows where either coordinate cell is
empty are skipped.  When the y column is named `<stat>_mean` and the table
also carries `<stat>_std`, the std column becomes symmetric error bars.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from matplotlib.figure import Figure

from .data import Table, numeric_column, read_table, text_column
from .errors import EmptyInputError
from .spec import PlotSpec

FIGURE_SIZE = (7.0, 4.5)
FIGURE_DPI = 120

_MEAN_SUFFIX = "_mean"
_STD_SUFFIX = "_std"


@dataclass(frozen=True)
class Series:
    label: str
    x: list[float]
    y: list[float]
    err: list[float] | None


def _stem(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


def _std_sibling(table: Table, y: str) -> str | None:
    if not y.endswith(_MEAN_SUFFIX):
        return None
    sibling = y[: -len(_MEAN_SUFFIX)] + _STD_SUFFIX
    return sibling if sibling in table else None


def _assemble(
    label: str,
    xs: list[float | None],
    ys: list[float | None],
    errs: list[float | None] | None,
    origin: str,
) -> Series:
    x_kept: list[float] = []
    y_kept: list[float] = []
    e_kept: list[float] = []
    for index, (x_value, y_value) in enumerate(zip(xs, ys)):
        if x_value is None or y_value is None:
            continue
        x_kept.append(x_value)
        y_kept.append(y_value)
        if errs is not None:
            e_value = errs[index]
            e_kept.append(0.0 if e_value is None else e_value)
    if not x_kept:
        raise EmptyInputError(f"{origin}: no plottable points")
    return Series(label, x_kept, y_kept, e_kept if errs is not None else None)


def collect_series(spec: PlotSpec) -> list[Series]:
    """All series the figure will draw, in drawing order."""
    series: list[Series] = []
    for index, path in enumerate(spec.inputs):
        table = read_table(path)
        xs = numeric_column(table, spec.x, path)
        ys = numeric_column(table, spec.y, path)
        sibling = _std_sibling(table, spec.y)
        errs = numeric_column(table, sibling, path) if sibling else None
        if spec.group_by:
            groups = text_column(table, spec.group_by, path)
            for value in dict.fromkeys(groups):
                rows = [i for i, cell in enumerate(groups) if cell == value]
                series.append(
                    _assemble(
                        value,
                        [xs[i] for i in rows],
                        [ys[i] for i in rows],
                        [errs[i] for i in rows] if errs is not None else None,
                        f"{path}: group '{value}'",
                    )
                )
        else:
            label = spec.labels[index] if spec.labels else _stem(path)
            series.append(_assemble(label, xs, ys, errs, path))
    return series


def build_figure(spec: PlotSpec) -> Figure:
    """Draw the figure in memory; render() saves it to spec.out."""
    figure = Figure(figsize=FIGURE_SIZE)
    axes = figure.add_subplot()
    for entry in collect_series(spec):
        if entry.err is None:
            axes.plot(entry.x, entry.y, marker="o", label=entry.label)
        else:
            axes.errorbar(
                entry.x,
                entry.y,
                yerr=entry.err,
                marker="o",
                capsize=3,
                label=entry.label,
            )
    if spec.hline is not None:
        axes.axhline(
            spec.hline,
            color="black",
            linestyle="--",
            linewidth=1.0,
            label=f"reference {spec.hline:g}",
        )
    axes.set_xlabel(spec.x)
    axes.set_ylabel(spec.y)
    axes.grid(True, alpha=0.3)
    axes.legend()
    return figure


def render(spec: PlotSpec) -> str:
    """Save the figure as a PNG at spec.out; returns the output path."""
    figure = build_figure(spec)
    figure.savefig(spec.out, format="png", dpi=FIGURE_DPI)
    return spec.out
