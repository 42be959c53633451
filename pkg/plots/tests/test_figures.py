import os

import numpy as np
import pytest

from pathkernel_plots import (
    TableError,
    build_orbit_figure,
    build_sweep_figure,
    count_orbit_curves,
    count_ticks,
    load_sweep_table,
    load_trace_table,
    plot_orbit,
    plot_sweep,
)
from pathkernel_plots.cli import main

HEADER = "gamma,phi_avg,se_phi,dphi,se_dphi,n_samples,overflow_count\n"
THREE_ROWS = (
    HEADER
    + "-0.1,0.81,0.01,1.8,0.02,100,0\n"
    + "0.0,1.0,0.01,2.0,0.02,100,0\n"
    + "0.1,1.21,0.01,2.2,0.02,100,0\n"
)


def write(tmp_path, text, name="in.csv"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestSweepFigure:
    def test_one_tick_and_marker_per_row(self, tmp_path):
        out = str(tmp_path / "sweep.png")
        plot_sweep(write(tmp_path, THREE_ROWS), out)
        assert os.path.exists(out)
        fig = build_sweep_figure(load_sweep_table(write(tmp_path, THREE_ROWS, "b.csv")))
        assert count_ticks(fig) == 3

    def test_tick_slopes_match_dphi(self, tmp_path):
        table = load_sweep_table(write(tmp_path, THREE_ROWS))
        fig = build_sweep_figure(table)
        ticks = [a for ax in fig.axes for a in ax.lines if a.get_gid() == "dphi-tick"]
        for tick, dphi in zip(ticks, table.col("dphi")):
            x, y = tick.get_xdata(), tick.get_ydata()
            slope = (y[1] - y[0]) / (x[1] - x[0])
            assert slope == pytest.approx(dphi)

    def test_tick_half_width_is_fifth_of_spacing(self, tmp_path):
        table = load_sweep_table(write(tmp_path, THREE_ROWS))
        fig = build_sweep_figure(table)
        tick = next(a for ax in fig.axes for a in ax.lines if a.get_gid() == "dphi-tick")
        x = tick.get_xdata()
        assert (x[1] - x[0]) == pytest.approx(2 * 0.2 * 0.1)

    def test_deterministic_column_plotted(self, tmp_path):
        text = HEADER.strip() + ",phi_avg_det\n" + "0.0,1.0,0.01,2.0,0.02,100,0,0.9\n"
        fig = build_sweep_figure(load_sweep_table(write(tmp_path, text)))
        gids = [a.get_gid() for ax in fig.axes for a in ax.lines]
        assert "phi-det" in gids

    def test_empty_table_writes_nothing(self, tmp_path):
        out = str(tmp_path / "nope.png")
        with pytest.raises(TableError):
            plot_sweep(write(tmp_path, HEADER), out)
        assert not os.path.exists(out)

    def test_rerender_is_byte_identical(self, tmp_path):
        src = write(tmp_path, THREE_ROWS)
        a = str(tmp_path / "a.png")
        b = str(tmp_path / "b.png")
        plot_sweep(src, a)
        plot_sweep(src, b)
        with open(a, "rb") as fa, open(b, "rb") as fb:
            assert fa.read() == fb.read()


class TestOrbitFigure:
    def test_two_curves(self, tmp_path):
        src = write(tmp_path, "t,x0,x1\n0.0,1.0,2.0\n0.1,1.1,2.1\n0.2,1.0,2.3\n")
        out = str(tmp_path / "orbit.png")
        plot_orbit(src, out)
        assert os.path.exists(out)
        fig = build_orbit_figure(load_trace_table(src))
        assert count_orbit_curves(fig) == 2

    def test_single_row_trace_is_valid(self, tmp_path):
        src = write(tmp_path, "t,x0\n0.0,1.5\n")
        out = str(tmp_path / "point.png")
        plot_orbit(src, out)
        assert os.path.exists(out)

    def test_coordinate_selection(self, tmp_path):
        src = write(tmp_path, "t,x0,x1,x2\n0.0,1.0,2.0,3.0\n0.1,1.1,2.1,3.1\n")
        fig = build_orbit_figure(load_trace_table(src), coords=["x2"])
        assert count_orbit_curves(fig) == 1

    def test_missing_coordinate_errors_before_writing(self, tmp_path):
        src = write(tmp_path, "t,x0\n0.0,1.0\n")
        out = str(tmp_path / "nope.png")
        with pytest.raises(TableError, match="x7"):
            plot_orbit(src, out, coords=["x7"])
        assert not os.path.exists(out)


class TestCli:
    def test_sweep_command(self, tmp_path):
        src = write(tmp_path, THREE_ROWS)
        out = str(tmp_path / "s.png")
        assert main(["sweep", src, out]) == 0
        assert os.path.exists(out)

    def test_orbit_command_with_coords(self, tmp_path):
        src = write(tmp_path, "t,x0,x1\n0.0,1.0,2.0\n0.1,1.1,2.1\n")
        out = str(tmp_path / "o.png")
        assert main(["orbit", src, out, "--coords", "x0,x1"]) == 0
        assert os.path.exists(out)

    def test_malformed_csv_nonzero_exit(self, tmp_path, capsys):
        src = write(tmp_path, HEADER + "0.0,bad,0.01,2.0,0.02,100,0\n")
        assert main(["sweep", src, str(tmp_path / "x.png")]) == 2
        assert "row 2" in capsys.readouterr().err

    def test_missing_file_nonzero_exit(self, tmp_path):
        assert main(["sweep", str(tmp_path / "absent.csv"), str(tmp_path / "x.png")]) == 2
