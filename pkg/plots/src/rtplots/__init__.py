"""Figures from rtupwind output directories.

This package never recomputes physics: everything it draws comes from
the CSV tables and the JSON manifest a solver run left behind, and each
image records SHA-256 checksums of the exact files it was rendered
from.
"""

from .inputs import PlotError
from .figures import PlotSpec, fit_decay_ratio, plot_contour, plot_decay, plot_polar

__version__ = "0.1.0"

__all__ = [
    "PlotError",
    "PlotSpec",
    "fit_decay_ratio",
    "plot_contour",
    "plot_decay",
    "plot_polar",
    "__version__",
]
