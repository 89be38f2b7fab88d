"""Plot companion for the benchmark harness: run and sweep CSV logs in, PNG figures out."""

from .data import Table, numeric_column, read_table, text_column
from .errors import EmptyInputError, MissingColumnError, PlotError, PlotSpecError
from .render import Series, build_figure, collect_series, render
from .spec import PlotSpec, load_plot_spec, parse_plot_spec

__version__ = "0.1.0"
