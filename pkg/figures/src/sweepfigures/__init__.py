"""Comparative-statics figures from softprice sweep CSVs."""

from .render import FigureSpec, SchemaError, load_sweep_rows, render_sweep

__version__ = "0.1.0"

__all__ = ["FigureSpec", "SchemaError", "load_sweep_rows", "render_sweep", "__version__"]
