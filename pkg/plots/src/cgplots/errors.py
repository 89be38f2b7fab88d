"""Errors raised by the plot tool."""


class PlotError(Exception):
    """Base class for every failure this package raises on purpose."""


class PlotSpecError(PlotError):
    """A plot-spec file is malformed or asks for an impossible figure."""


class MissingColumnError(PlotError):
    """A referenced column is absent from an input CSV."""


class EmptyInputError(PlotError):
    """An input CSV, or one selected series, has no data to draw."""
