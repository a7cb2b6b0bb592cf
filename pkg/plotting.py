"""
plotting.py
-----------
Vector figures for the toolkit: verdict maps with threshold curves,
phase-plane trajectories and sampled profiles.

All figures are rendered with the Agg backend into standalone SVG text with a
fixed hash salt and no date stamp, so identical inputs give identical bytes.
The caller decides where the document goes (ct.py writes it atomically).
"""

import io
from typing import Dict, Iterable, Mapping, Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
from matplotlib.colors import ListedColormap
from matplotlib.patches import Patch

from core import INDETERMINATE, SUBCRITICAL, SUPERCRITICAL

matplotlib.rcParams["svg.hashsalt"] = "critical-thresholds"

VERDICT_ORDER = [SUBCRITICAL, INDETERMINATE, SUPERCRITICAL]

CURVE_STYLES = {
    "P-": ("#b91c1c", "-"),
    "N+": ("#b91c1c", "--"),
    "P+": ("#1d4ed8", "-"),
    "N-": ("#1d4ed8", "--"),
}


def get_verdict_color(verdict: str) -> str:
    """
    Fill color per verdict, light tones so curves stay readable on top:
    - subcritical: Light Emerald (#6ee7b7)
    - indeterminate: Light Amber (#fcd34d)
    - supercritical: Light Rose (#fda4af)
    """
    color_mapping = {
        SUBCRITICAL: '#6ee7b7',
        INDETERMINATE: '#fcd34d',
        SUPERCRITICAL: '#fda4af',
    }
    return color_mapping.get(str(verdict).strip().lower(), '#e2e8f0')


def _new_axes(title: str, xlabel: str, ylabel: str):
    plt.style.use('default')
    fig, ax = plt.subplots(figsize=(8.0, 6.0), constrained_layout=True)
    fig.patch.set_facecolor('#f8fafc')
    ax.set_facecolor('#ffffff')
    ax.set_title(title, fontsize=14, fontweight='600', color='#0f172a')
    ax.set_xlabel(xlabel, fontsize=12, color='#1e293b')
    ax.set_ylabel(ylabel, fontsize=12, color='#1e293b')
    ax.grid(linestyle="-", linewidth=0.8, alpha=0.15, color='#94a3b8')
    ax.set_axisbelow(True)
    for spine in ax.spines.values():
        spine.set_edgecolor('#cbd5e1')
    ax.spines['top'].set_visible(False)
    ax.spines['right'].set_visible(False)
    return fig, ax


def _render(fig, title: str, description: str) -> str:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", facecolor='#f8fafc', edgecolor='none',
                metadata={"Title": title, "Description": description, "Date": None,
                          "Creator": "critical-thresholds"})
    plt.close(fig)
    return buf.getvalue()


def _cell_edges(centres: np.ndarray) -> np.ndarray:
    if centres.size == 1:
        return np.array([centres[0] - 0.5, centres[0] + 0.5])
    mid = 0.5 * (centres[1:] + centres[:-1])
    return np.concatenate(([2 * centres[0] - mid[0]], mid, [2 * centres[-1] - mid[-1]]))


def _draw_curves(ax, curves: Mapping, s_range: Optional[tuple]):
    for name, curve in curves.items():
        s = np.asarray(curve.s if hasattr(curve, "s") else curve["s"], dtype=float)
        g = np.asarray(curve.g if hasattr(curve, "g") else curve["g"], dtype=float)
        if s_range is not None:
            keep = (s >= s_range[0]) & (s <= s_range[1])
            s, g = s[keep], g[keep]
        color, style = CURVE_STYLES.get(name, ('#334155', '-'))
        w = -g if name.startswith("P") else g
        ax.plot(w, s, color=color, linestyle=style, linewidth=1.6, label=name)


def emit_svg(frame: pd.DataFrame, curves: Optional[Mapping] = None,
             title: str = "Critical thresholds", description: str = "") -> str:
    """Verdict map of a sweep with the threshold curves on top.

    `frame` has the sweep columns (w0, s0, verdict); `curves` maps names
    like "P-" or "N+" to objects with s and g samples. P curves bound the
    band from below (w = -g), N curves from above (w = g).
    """
    curves = curves or {}
    fig, ax = _new_axes(title, "w", "s")
    s_range = None
    if len(frame):
        w_c = np.unique(frame["w0"].to_numpy(dtype=float))
        s_c = np.unique(frame["s0"].to_numpy(dtype=float))
        codes = np.full((s_c.size, w_c.size), np.nan)
        rows = np.searchsorted(s_c, frame["s0"].to_numpy(dtype=float))
        cols = np.searchsorted(w_c, frame["w0"].to_numpy(dtype=float))
        codes[rows, cols] = [VERDICT_ORDER.index(v) for v in frame["verdict"]]
        cmap = ListedColormap([get_verdict_color(v) for v in VERDICT_ORDER])
        w_e, s_e = _cell_edges(w_c), _cell_edges(s_c)
        ax.pcolormesh(w_e, s_e, codes, cmap=cmap, vmin=-0.5, vmax=len(VERDICT_ORDER) - 0.5,
                      shading="flat")
        ax.set_xlim(w_e[0], w_e[-1])
        ax.set_ylim(s_e[0], s_e[-1])
        s_range = (s_e[0], s_e[-1])
        present = [v for v in VERDICT_ORDER if v in set(frame["verdict"])]
        handles = [Patch(facecolor=get_verdict_color(v), edgecolor='white', label=v) for v in present]
    else:
        handles = []

    _draw_curves(ax, curves, s_range)
    if handles or curves:
        line_handles, _ = ax.get_legend_handles_labels()
        ax.legend(handles=handles + line_handles, loc='upper right', frameon=True,
                  framealpha=0.95, facecolor='#f8fafc', edgecolor='#e2e8f0', fontsize=9)
    return _render(fig, title, description)


def emit_phase_svg(trajectories: Dict[str, pd.DataFrame], curves: Optional[Mapping] = None,
                   title: str = "Phase plane", description: str = "") -> str:
    """Trajectories (columns w, s) in the phase plane, optionally with threshold curves."""
    fig, ax = _new_axes(title, "w", "s")
    s_max = 0.0
    for name, traj in trajectories.items():
        ax.plot(traj["w"], traj["s"], linewidth=1.2, label=name)
        ax.plot(traj["w"].iloc[0], traj["s"].iloc[0], marker="o", color='#0f172a', markersize=4)
        s_max = max(s_max, float(traj["s"].max()))
    if curves:
        _draw_curves(ax, curves, (0.0, 1.2 * s_max) if s_max > 0 else None)
    ax.axhline(0.0, color='#ef4444', linewidth=1.0, alpha=0.6)
    if trajectories or curves:
        ax.legend(loc='upper right', fontsize=9, facecolor='#f8fafc', edgecolor='#e2e8f0')
    return _render(fig, title, description)


def emit_profile_svg(frame: pd.DataFrame, x: str, columns: Iterable[str],
                     title: str = "Profiles", description: str = "",
                     group: Optional[str] = None) -> str:
    """Line plot of `columns` against `x`; one line per value of `group` if given."""
    columns = list(columns)
    fig, axes = plt.subplots(len(columns), 1, figsize=(8.0, 2.6 * len(columns)),
                             constrained_layout=True, squeeze=False)
    fig.patch.set_facecolor('#f8fafc')
    fig.suptitle(title, fontsize=14, fontweight='600', color='#0f172a')
    groups = [(None, frame)] if group is None else list(frame.groupby(group, sort=True))
    for ax, col in zip(axes[:, 0], columns):
        for key, part in groups:
            ax.plot(part[x], part[col], linewidth=1.1,
                    label=None if key is None else f"{group}={key:.3g}")
        ax.set_ylabel(col, fontsize=11, color='#1e293b')
        ax.grid(linestyle="-", linewidth=0.8, alpha=0.15, color='#94a3b8')
        ax.spines['top'].set_visible(False)
        ax.spines['right'].set_visible(False)
    axes[-1, 0].set_xlabel(x, fontsize=11, color='#1e293b')
    if group is not None and len(groups) <= 12:
        axes[0, 0].legend(fontsize=8, ncol=2, facecolor='#f8fafc', edgecolor='#e2e8f0')
    return _render(fig, title, description)
