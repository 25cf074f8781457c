"""Figure rendering for jumpcos experiment outputs."""

from .render import FigureSpec, SchemaError, render

__all__ = ["FigureSpec", "SchemaError", "render"]
