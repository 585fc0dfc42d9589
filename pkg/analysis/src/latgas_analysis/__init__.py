"""Post-processing figures for latgas experiment output.

Pure readers: every function takes CSV paths written by the latgas harness
and emits a PNG/SVG; nothing here mutates the experiment outputs.  All
plotting is headless (Agg backend) and deterministic.
"""
import matplotlib

matplotlib.use("Agg")

from .figures import (         # noqa: E402
    FigureSpec,
    plot_convergence,
    plot_profiles,
    plot_ensembles_scaling,
    plot_diagnostic_trend,
)

__version__ = "0.1.0"
