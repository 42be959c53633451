"""Figure rendering for pathkernel sweep and trace CSV files."""

from .figures import (
    build_orbit_figure,
    build_sweep_figure,
    count_orbit_curves,
    count_ticks,
    plot_orbit,
    plot_sweep,
)
from .tables import SweepTable, TableError, TraceTable, load_sweep_table, load_trace_table

__version__ = "0.1.0"

__all__ = [
    "SweepTable",
    "TableError",
    "TraceTable",
    "build_orbit_figure",
    "build_sweep_figure",
    "count_orbit_curves",
    "count_ticks",
    "load_sweep_table",
    "load_trace_table",
    "plot_orbit",
    "plot_sweep",
]
