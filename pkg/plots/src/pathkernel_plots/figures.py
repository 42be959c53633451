"""Figure construction: sweep curves with derivative tick marks, orbit traces.

Figures are styled deterministically (fixed size, no timestamps), so the same
input renders to byte-identical PNG files.  Every derivative tick carries the
gid ``dphi-tick`` and every orbit curve the gid ``orbit-<name>``, which the
tests (and curious users) can count.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .tables import SweepTable, TableError, TraceTable, load_sweep_table, load_trace_table

TICK_HALF_WIDTH_FRACTION = 0.2  # of the local gamma grid spacing


def _local_spacing(gamma: np.ndarray) -> np.ndarray:
    n = len(gamma)
    if n == 1:
        return np.array([max(abs(gamma[0]), 1.0) * 0.1])
    spacing = np.empty(n)
    spacing[1:-1] = (gamma[2:] - gamma[:-2]) / 2.0
    spacing[0] = gamma[1] - gamma[0]
    spacing[-1] = gamma[-1] - gamma[-2]
    return spacing


def build_sweep_figure(table: SweepTable, title: str = ""):
    """Observable dots with error bars plus a tangent segment per row."""
    gamma = table.col("gamma")
    phi = table.col("phi_avg")
    se_phi = table.col("se_phi")
    dphi = table.col("dphi")

    fig, ax = plt.subplots(figsize=(6.4, 4.8), dpi=100)
    ax.errorbar(
        gamma, phi, yerr=se_phi, fmt="o", color="tab:blue", markersize=4,
        capsize=2, elinewidth=0.8, label="observable average",
    )
    half = TICK_HALF_WIDTH_FRACTION * _local_spacing(gamma)
    for g, p, d, h in zip(gamma, phi, dphi, half):
        (tick,) = ax.plot(
            [g - h, g + h], [p - d * h, p + d * h], color="tab:red", linewidth=1.6,
        )
        tick.set_gid("dphi-tick")
    if table.has_deterministic:
        ax.plot(
            gamma, table.col("phi_avg_det"), "^", color="tab:red", markersize=5,
            fillstyle="none", label="noiseless average", gid="phi-det",
        )
    ax.set_xlabel("gamma")
    ax.set_ylabel("observable average")
    if title:
        ax.set_title(title)
    handles, labels = ax.get_legend_handles_labels()
    if labels:
        ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    return fig


def build_orbit_figure(table: TraceTable, coords=None, title: str = ""):
    """Time series of selected coordinates; a lone sample still shows a marker."""
    names = list(coords) if coords else list(table.coordinate_names)
    fig, ax = plt.subplots(figsize=(6.4, 4.0), dpi=100)
    style = "o-" if len(table) == 1 else "-"
    for name in names:
        y = table.coordinate(name)  # raises TableError naming a missing column
        (line,) = ax.plot(table.time, y, style, linewidth=1.0, markersize=3, label=name)
        line.set_gid(f"orbit-{name}")
    ax.set_xlabel("t")
    ax.set_ylabel("coordinate value")
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    return fig


def count_ticks(fig) -> int:
    return sum(1 for ax in fig.axes for artist in ax.lines if artist.get_gid() == "dphi-tick")


def count_orbit_curves(fig) -> int:
    return sum(
        1
        for ax in fig.axes
        for artist in ax.lines
        if (artist.get_gid() or "").startswith("orbit-")
    )


def _save(fig, out_path: str) -> str:
    try:
        fig.savefig(out_path)
    finally:
        plt.close(fig)
    return out_path


def plot_sweep(csv_path: str, out_path: str, title: str = "") -> str:
    """Render a sweep CSV to an image file; no file is written on bad input."""
    table = load_sweep_table(csv_path)
    return _save(build_sweep_figure(table, title=title), out_path)


def plot_orbit(csv_path: str, out_path: str, coords=None, title: str = "") -> str:
    """Render a trace CSV to an image file; no file is written on bad input."""
    table = load_trace_table(csv_path)
    return _save(build_orbit_figure(table, coords=coords, title=title), out_path)
