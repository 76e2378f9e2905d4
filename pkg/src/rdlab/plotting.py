"""Plot emission for the CLI report path.

For every CSV that gets a figure we write two text files next to it: a
gnuplot script reading the CSV, and a matplotlib SVG. The SVG is rendered
with a fixed hash salt and no date stamp so repeated runs are byte-identical.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "font.family": "DejaVu Sans",
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.2,
    "figure.figsize": (5.0, 3.2),
    "svg.hashsalt": "rdlab",
    "svg.fonttype": "none",
}


def gnuplot_script(csv_name: str, columns: list[tuple[int, str]], xlabel: str, ylabel: str,
                   title: str, logy: bool = False) -> str:
    """Script plotting 1-based ``columns`` of ``csv_name`` against column 1."""
    lines = [
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"set title '{title}'",
        f"set xlabel '{xlabel}'",
        f"set ylabel '{ylabel}'",
    ]
    if logy:
        lines.append("set logscale y")
    plots = ", ".join(f"'{csv_name}' using 1:{col} with lines title '{label}'" for col, label in columns)
    lines.append(f"plot {plots}")
    return "\n".join(lines) + "\n"


def render_svg(path, x, series: dict, xlabel: str, ylabel: str, title: str, logy: bool = False) -> Path:
    path = Path(path)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for label, y in series.items():
            y = np.asarray(y, dtype=float)
            if logy:
                y = np.where(y > 0, y, np.nan)
            ax.plot(x, y, label=label)
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        if len(series) > 1:
            ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path


def emit(out_dir, stem: str, csv_name: str, x, series: dict, columns, xlabel: str, ylabel: str,
         title: str, logy: bool = False) -> list[Path]:
    """Write ``stem.gp`` and ``stem.svg`` into ``out_dir``."""
    out_dir = Path(out_dir)
    gp = out_dir / f"{stem}.gp"
    gp.write_text(gnuplot_script(csv_name, columns, xlabel, ylabel, title, logy))
    svg = render_svg(out_dir / f"{stem}.svg", x, series, xlabel, ylabel, title, logy)
    return [gp, svg]
