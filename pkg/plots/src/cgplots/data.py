"""CSV loading for the plot tool.

Tables keep every cell as the raw string from the file; numeric
interpretation happens per axis, so text columns (optimizer names) stay
verbatim for grouping and legend labels.
"""

from __future__ import annotations

import csv

from .errors import EmptyInputError, MissingColumnError, PlotSpecError

Table = dict[str, list[str]]


def read_table(path: str) -> Table:
    """Load a CSV into a header -> column-of-raw-strings mapping.

    Rows shorter than the header (a truncated final row) are padded with
    empty cells; cells beyond the header are dropped.
    """
    with open(path, "r", encoding="utf-8", newline="") as handle:
        rows = [row for row in csv.reader(handle) if row]
    if not rows:
        raise EmptyInputError(f"{path}: empty CSV")
    header, body = rows[0], rows[1:]
    if not body:
        raise EmptyInputError(f"{path}: no data rows")
    return {
        name: [row[i] if i < len(row) else "" for row in body]
        for i, name in enumerate(header)
    }


def text_column(table: Table, name: str, path: str) -> list[str]:
    if name not in table:
        raise MissingColumnError(f"{path}: no column named '{name}'")
    return table[name]


def numeric_column(table: Table, name: str, path: str) -> list[float | None]:
    """One column as floats, with empty cells mapped to None."""
    values: list[float | None] = []
    for cell in text_column(table, name, path):
        if cell == "":
            values.append(None)
            continue
        try:
            values.append(float(cell))
        except ValueError:
            raise PlotSpecError(
                f"{path}: column '{name}' has non-numeric value {cell!r}"
            ) from None
    return values
