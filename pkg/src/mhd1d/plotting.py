"""File-only figures (Agg backend) and a plain-text plot-data dump."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .records import RunRecord, fmt  # noqa: E402

__all__ = ["write_plot_data", "record_figure", "distance_figure"]

_STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "lines.linewidth": 1.2,
    "figure.figsize": (5.0, 3.2),
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
}


def write_plot_data(rec: RunRecord, path: Path) -> None:
    """One two-column block (t, value) per monitored quantity.

    Blocks are separated by two blank lines and headed by ``# name``, which
    is the multi-dataset layout gnuplot's ``index`` understands.
    """
    t = rec.column("t")
    blocks = []
    for name in rec.columns:
        if name == "t":
            continue
        y = rec.column(name)
        lines = [f"# {name}"] + [f"{fmt(a)} {fmt(b)}" for a, b in zip(t, y)]
        blocks.append("\n".join(lines))
    Path(path).write_text("\n\n\n".join(blocks) + "\n")


def _positive(y):
    y = np.abs(y)
    return np.where(y > 0, y, np.nan)


def record_figure(rec: RunRecord, path: Path, kind: str) -> None:
    t = rec.column("t")
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        if kind == "energy":
            for name, label in (("E_H0", "E (H0)"), ("etaP_H0", "eta+ (H0)"), ("etaM_H0", "eta- (H0)"), ("etaM_c0", "|eta-_c0|")):
                if name in rec.columns:
                    ax.semilogy(t, _positive(rec.column(name)), label=label)
            ax.set_ylabel("seminorm")
        elif kind == "h":
            ax.plot(t, rec.column("h"), label="h(t)")
            ax.set_ylabel("h")
        elif kind == "conserved":
            for name in ("etaP_mean", "etaP_at0", "etaM_at0", "etaP_s0"):
                if name in rec.columns:
                    col = rec.column(name)
                    ax.semilogy(t, _positive(col - col[0]), label=f"{name} drift")
            ax.set_ylabel("|drift|")
        else:
            plt.close(fig)
            raise ValueError(f"unknown figure kind {kind!r}")
        ax.set_xlabel("t")
        ax.legend(loc="best")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def distance_figure(widths, distances, path: Path) -> None:
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        w = np.asarray(widths, dtype=float)
        d = np.asarray(distances, dtype=float)
        keep = w > 0
        ax.loglog(w[keep], d[keep], "o-")
        ax.set_xlabel("mollifier width")
        ax.set_ylabel("terminal L2 distance")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
