"""Oscilloscope-style figures for reflectwave trace CSVs."""

from .figures import FigureSpec, PlotError, fig_adaptation, fig_terminals, \
    fig_zoom, render
from .trace import TraceData, load_trace

__all__ = ["FigureSpec", "PlotError", "fig_terminals", "fig_zoom",
           "fig_adaptation", "render", "TraceData", "load_trace"]
