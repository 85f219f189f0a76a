"""SVG figures for command-line reports.

Figures are drawn on bare :class:`matplotlib.figure.Figure` objects (no
pyplot state) and saved with a fixed hash salt and without a date stamp, so
re-running a command reproduces the SVG byte for byte.  All figures share an
800×600 viewBox.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Mapping, Optional, Sequence

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from fiberband import __version__

FIGSIZE = (800 / 72, 600 / 72)  # inches; SVG uses 72 units per inch

_RC = {
    "svg.hashsalt": "fiberband",
    "svg.fonttype": "path",
    "font.size": 11,
    "axes.grid": True,
    "grid.alpha": 0.3,
}


def _figure() -> Figure:
    return Figure(figsize=FIGSIZE)


def save_svg(fig: Figure, path: Path | str) -> Path:
    """Write ``fig`` as a deterministic SVG carrying only a version tag."""
    path = Path(path)
    with matplotlib.rc_context(_RC):
        fig.savefig(
            path,
            format="svg",
            metadata={"Date": None, "Creator": f"fiberband {__version__}"},
        )
    return path


def plot_bands(
    k: np.ndarray,
    curves: Sequence[tuple[str, np.ndarray]],
    path: Path | str,
    title: str = "",
    ylabel: str = r"$\lambda_j(k)$",
    log: bool = False,
    overlays: Sequence[tuple[str, np.ndarray]] = (),
    hlines: Sequence[float] = (),
) -> Path:
    """Line plot of band curves against ``k`` with optional dashed overlays."""
    with matplotlib.rc_context(_RC):
        fig = _figure()
        ax = fig.add_subplot()
        if len(curves) > 10:
            ax.set_prop_cycle(color=matplotlib.colormaps["tab20"].colors)
        for label, y in curves:
            ax.plot(k, y, lw=1.4, label=label)
        for label, y in overlays:
            ax.plot(k, y, ls="--", lw=1.0, color="black", label=label)
        for level in hlines:
            ax.axhline(level, ls=":", lw=0.8, color="grey")
        if log:
            ax.set_yscale("log")
        ax.set_xlabel("$k$")
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if len(curves) + len(overlays) <= 16:
            ax.legend(fontsize=8, ncol=2 if len(curves) > 6 else 1)
        fig.tight_layout()
    return save_svg(fig, path)


def plot_table(table, path: Path | str, title: str = "") -> Path:
    """All bands of a :class:`~fiberband.bands.BandTable`."""
    curves = [(f"j={j}", table.values[j - 1]) for j in range(1, table.j_max + 1)]
    return plot_bands(table.k_nodes, curves, path, title=title or table.model.label)


def _wire_curves(tables: Mapping[int, "object"]):
    curves = []
    for m in sorted(tables):
        tab = tables[m]
        for j in range(1, tab.j_max + 1):
            curves.append((f"m={m}, j={j}", tab.values[j - 1]))
    return curves


def plot_wire_bands(tables: Mapping[int, "object"], path: Path | str) -> Path:
    """Every wire band curve ``λ_{m,j}(k)`` on one set of axes."""
    k = tables[min(tables)].k_nodes
    return plot_bands(
        k,
        _wire_curves(tables),
        path,
        title=r"wire band functions $\lambda_{m,j}(k)$",
        ylabel=r"$\lambda_{m,j}(k)$",
    )


def plot_wire_zoom(
    tables: Mapping[int, "object"],
    path: Path | str,
    levels: Sequence[int] = (1, 2, 3, 4),
    zoom_from: float = 2.0,
) -> Path:
    """Lowest wire energies for ``k ≥ zoom_from`` on a log scale, against the
    first-order law ``(2n-1)e^{-k}`` for each ``n`` in ``levels``."""
    k = tables[min(tables)].k_nodes
    sel = k >= zoom_from
    curves = [(label, y[sel]) for label, y in _wire_curves(tables)]
    overlays = [(rf"$({2 * n - 1})e^{{-k}}$", (2 * n - 1) * np.exp(-k[sel])) for n in levels]
    return plot_bands(
        k[sel],
        curves,
        path,
        title=r"lowest wire energies vs $(2n-1)e^{-k}$",
        ylabel=r"$\lambda_{m,j}(k)$",
        log=True,
        overlays=overlays,
    )


def plot_profile(profile, path: Path | str, title: str = "") -> Path:
    """Packet density across the invariant direction with the cut marked."""
    with matplotlib.rc_context(_RC):
        fig = _figure()
        ax = fig.add_subplot()
        ax.plot(profile.x, profile.density, lw=1.4)
        if math.isfinite(profile.x_cut):
            ax.axvline(profile.x_cut, ls="--", color="black", lw=1.0, label=f"cut, mass below = {profile.mass_below:.3g}")
            ax.legend()
        ax.set_xlabel("$x$")
        ax.set_ylabel("density")
        if title:
            ax.set_title(title)
        fig.tight_layout()
    return save_svg(fig, path)


def plot_ratio(k: np.ndarray, ratio: np.ndarray, path: Path | str, title: str = "", band: Optional[float] = None) -> Path:
    """Computed/predicted ratio against ``k`` with an optional tolerance band."""
    with matplotlib.rc_context(_RC):
        fig = _figure()
        ax = fig.add_subplot()
        ax.plot(k, ratio, marker="o", ms=3, lw=1.2)
        ax.axhline(1.0, color="black", lw=0.8)
        if band is not None:
            ax.axhspan(1 - band, 1 + band, color="tab:green", alpha=0.15)
        ax.set_xlabel("$k$")
        ax.set_ylabel("computed / predicted")
        if title:
            ax.set_title(title)
        fig.tight_layout()
    return save_svg(fig, path)


def plot_convergence(rows: Sequence[tuple[str, float, float]], path: Path | str, title: str = "") -> Path:
    """Bar-free convergence plot: one point per ``(param, value, estimate)`` row."""
    with matplotlib.rc_context(_RC):
        fig = _figure()
        ax = fig.add_subplot()
        labels = [r[0] for r in rows]
        x = np.arange(len(rows))
        ax.plot(x, [r[1] for r in rows], marker="o", label="value")
        ax.plot(x, [r[2] for r in rows], ls="--", color="black", label="reference")
        ax.set_xticks(x, labels, rotation=30, ha="right", fontsize=8)
        ax.legend()
        if title:
            ax.set_title(title)
        fig.tight_layout()
    return save_svg(fig, path)
