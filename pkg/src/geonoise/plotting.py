"""Static figures for sweeps, threshold checks and noise traces.

Figures are drawn on an Agg canvas without touching pyplot state and saved
with metadata stripped, so identical data gives identical PNG bytes.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

DPI = 110


def _new(figsize=(5.0, 3.6)):
    fig = Figure(figsize=figsize, dpi=DPI)
    FigureCanvasAgg(fig)
    return fig, fig.add_subplot(1, 1, 1)


def save_figure(fig: Figure, path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=DPI, format="png", metadata={"Software": None})


def plot_accuracy_curves(rows: Sequence, path) -> None:
    """Mean accuracy against sigma for every method, with standard-error bars."""
    fig, ax = _new()
    methods = list(dict.fromkeys(r.method for r in rows))
    for m in methods:
        pts = sorted((r.sigma, r.mean_accuracy, r.std_error) for r in rows if r.method == m)
        s, acc, se = (np.array(v) for v in zip(*pts))
        ax.errorbar(s, acc, yerr=se, marker="o", ms=4, capsize=3, label=m)
    ax.set_xlabel(r"kernel bandwidth $\sigma$")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0.45, 1.02)
    ax.invert_xaxis()
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8, frameon=False)
    save_figure(fig, path)


def plot_threshold_dots(dots: Sequence[dict], path) -> None:
    """Effective rates ``(c a, c b)``; green where the threshold prediction held, red otherwise."""
    fig, ax = _new((4.4, 4.0))
    if dots:
        ca = np.array([d["ca"] for d in dots])
        cb = np.array([d["cb"] for d in dots])
        ok = np.array([d["match"] for d in dots], dtype=bool)
        ax.scatter(cb[ok], ca[ok], s=14, c="tab:green", label="match")
        ax.scatter(cb[~ok], ca[~ok], s=14, c="tab:red", label="mismatch")
        top = float(max(ca.max(), cb.max())) * 1.05
    else:
        top = 1.0
    # boundary (sqrt(ca) - sqrt(cb))^2 = 2
    y = np.linspace(0.0, top, 200)
    ax.plot(y, (np.sqrt(y) + np.sqrt(2.0)) ** 2, "k--", lw=1, label="T = 2")
    ax.set_xlim(0, top)
    ax.set_ylim(0, top)
    ax.set_xlabel("c b")
    ax.set_ylabel("c a")
    ax.legend(fontsize=8, frameon=False)
    save_figure(fig, path)


def plot_noise_trace(series: Sequence[tuple[int, float]], path, slope: float | None = None,
                     p_value: float | None = None) -> None:
    fig, ax = _new()
    if len(series):
        t, v = (np.array(x, dtype=float) for x in zip(*series))
        ax.plot(t, v, marker=".", lw=1)
        if slope is not None and t.size > 1:
            ax.plot(t, v.mean() + slope * (t - t.mean()), "k--", lw=1)
    if slope is not None:
        title = f"slope {slope:.3g}"
        if p_value is not None:
            title += f", p = {p_value:.3g}"
        ax.set_title(title, fontsize=9)
    ax.set_xlabel("iteration")
    ax.set_ylabel("noise metric")
    ax.grid(alpha=0.3)
    save_figure(fig, path)
