"""Plot-spec files: a flat 'key = value' description of one figure."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .errors import PlotSpecError


@dataclass(frozen=True)
class PlotSpec:
    """Everything needed to draw one figure from CSV inputs.

    inputs   -- run or summary CSV paths; one series per file unless grouped
    x, y     -- column names plotted on the two axes
    out      -- output PNG path
    group_by -- optional text column (e.g. optimizer); one series per
                distinct value, legend labels taken from the cells verbatim
    labels   -- optional legend labels, one per input file; defaults to the
                file name stem
    hline    -- optional horizontal reference value drawn across the axis
    """

    inputs: tuple[str, ...]
    x: str
    y: str
    out: str
    group_by: str = ""
    labels: tuple[str, ...] = ()
    hline: float | None = None


_KEYS = ("inputs", "x", "y", "out", "group_by", "labels", "hline")
_REQUIRED = ("inputs", "x", "y", "out")


def _split_list(value: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in value.split(",") if part.strip())


def parse_plot_spec(lines: Iterable[str], source: str = "<spec>") -> PlotSpec:
    """Parse 'key = value' lines; '#' starts a comment, blank lines skipped."""
    seen: dict[str, str] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, equals, value = (part.strip() for part in line.partition("="))
        if not equals or not key:
            raise PlotSpecError(
                f"{source}: line {lineno}: expected 'key = value', got {raw.strip()!r}"
            )
        if key not in _KEYS:
            raise PlotSpecError(f"{source}: line {lineno}: unknown key '{key}'")
        if key in seen:
            raise PlotSpecError(f"{source}: line {lineno}: duplicate key '{key}'")
        seen[key] = value

    for required in _REQUIRED:
        if required not in seen:
            raise PlotSpecError(f"{source}: missing required key '{required}'")
    inputs = _split_list(seen["inputs"])
    if not inputs:
        raise PlotSpecError(f"{source}: 'inputs' names no files")
    for key in ("x", "y", "out"):
        if not seen[key]:
            raise PlotSpecError(f"{source}: bad value for '{key}': empty")

    hline: float | None = None
    if "hline" in seen:
        try:
            hline = float(seen["hline"])
        except ValueError as exc:
            raise PlotSpecError(f"{source}: bad value for 'hline': {exc}") from None

    labels = _split_list(seen.get("labels", ""))
    group_by = seen.get("group_by", "")
    if labels and group_by:
        raise PlotSpecError(f"{source}: 'labels' and 'group_by' cannot be combined")
    if labels and len(labels) != len(inputs):
        raise PlotSpecError(f"{source}: {len(labels)} labels for {len(inputs)} inputs")
    if group_by and len(inputs) != 1:
        raise PlotSpecError(f"{source}: 'group_by' requires a single input CSV")

    return PlotSpec(
        inputs=inputs,
        x=seen["x"],
        y=seen["y"],
        out=seen["out"],
        group_by=group_by,
        labels=labels,
        hline=hline,
    )


def load_plot_spec(path: str) -> PlotSpec:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_plot_spec(handle, source=path)
