"""Paper-style figures from emubench result CSVs and GED datasets.

This package is deliberately decoupled from the main toolkit: it reads only
the documented CSV layouts and the GED v1 on-disk format, so the benchmark
suite runs without it and vice versa.
"""

__version__ = "0.1.0"

from .render import FigureReport, FigureSpec, render

__all__ = ["FigureReport", "FigureSpec", "render"]
