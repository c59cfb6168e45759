"""Read experiment CSV artifacts and emit static publication figures."""

__version__ = "0.1.0"

from .render import FIGURES, FigureSpec, SchemaError, render

__all__ = ["FIGURES", "FigureSpec", "SchemaError", "render"]
