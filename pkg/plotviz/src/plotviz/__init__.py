"""Figures from the delimited diagnostics schema run_id,t,metric,params,value."""

from .data import (
    CSV_HEADER,
    EmptyDataError,
    MissingMetricError,
    PlotDataError,
    SchemaError,
    load_rows,
)
from .figures import (
    KINDS,
    STYLE_VERSION,
    PlotRequest,
    figure_for,
    fit_slope,
    render,
)

__version__ = "0.1.0"

__all__ = [
    "CSV_HEADER",
    "EmptyDataError",
    "KINDS",
    "MissingMetricError",
    "PlotDataError",
    "PlotRequest",
    "STYLE_VERSION",
    "SchemaError",
    "figure_for",
    "fit_slope",
    "load_rows",
    "render",
    "__version__",
]
