"""Figures from two-class scheduler sweep CSVs."""
from .figures import (
    ANALYTIC_NAME,
    FIGURES,
    FigureError,
    FigureSpec,
    Series,
    extract_series,
    read_rows,
    render,
)

__all__ = [
    "ANALYTIC_NAME",
    "FIGURES",
    "FigureError",
    "FigureSpec",
    "Series",
    "extract_series",
    "read_rows",
    "render",
]

__version__ = "0.1.0"
