"""PNG figures rendered next to the CSV outputs of the command-line runs.

Figures are drawn with the Agg canvas directly, without touching pyplot's
global state, so they can be produced from worker threads and headless
machines alike.
"""

from __future__ import annotations

import os

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

_STYLE = {"figsize": (6.4, 4.0), "dpi": 110}


def line_plot(path: str | os.PathLike, x, series: dict, xlabel: str, ylabel: str,
              title: str = "", logy: bool = False, markers: bool = False) -> str:
    """Draw one or more curves sharing the abscissa ``x`` and save them as PNG."""
    fig = Figure(figsize=_STYLE["figsize"])
    FigureCanvasAgg(fig)
    ax = fig.add_subplot(1, 1, 1)
    x = np.asarray(x, dtype=float)
    for label, y in series.items():
        y = np.asarray(y, dtype=float)
        if logy:
            y = np.where(y > 0, y, np.nan)
        ax.plot(x, y, "o-" if markers else "-", lw=1.2, ms=3, label=label)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(series) > 1:
        ax.legend(frameon=False)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_STYLE["dpi"], metadata={"Software": None})
    return str(path)


def field_map(path: str | os.PathLike, t, x, values, xlabel: str = "x", ylabel: str = "t",
              label: str = "", title: str = "") -> str:
    """Space-time colour map of ``values[t, x]``."""
    fig = Figure(figsize=_STYLE["figsize"])
    FigureCanvasAgg(fig)
    ax = fig.add_subplot(1, 1, 1)
    mesh = ax.pcolormesh(np.asarray(x), np.asarray(t), np.asarray(values, dtype=float),
                         shading="auto", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=_STYLE["dpi"], metadata={"Software": None})
    return str(path)
