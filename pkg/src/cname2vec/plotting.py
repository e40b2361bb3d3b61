"""Figures written next to the delimited report files."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.ticker import MaxNLocator  # noqa: E402

# fixed metadata keeps PNG bytes stable across runs
_PNG_META = {"Software": None}


def _style():
    plt.rcParams.update({
        "font.size": 10,
        "axes.spines.top": False,
        "axes.spines.right": False,
        "figure.dpi": 100,
    })


def plot_avg_success(report, path: str | Path, title: str = "AvgSuccess@k by method") -> Path:
    """Grouped bar chart: one group per method, one bar per k."""
    _style()
    methods = list(report.methods)
    ks = report.ks
    width = 0.8 / len(ks)
    fig, ax = plt.subplots(figsize=(1.2 * len(methods) + 2, 3.5))
    for j, k in enumerate(ks):
        xs = [i + (j - (len(ks) - 1) / 2) * width for i in range(len(methods))]
        ax.bar(xs, [report.methods[m].avg_success[k] for m in methods], width, label=f"k={k}")
    ax.set_xticks(range(len(methods)))
    ax.set_xticklabels(methods)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("AvgSuccess@k")
    ax.set_title(title)
    ax.legend(frameon=False, loc="upper left", bbox_to_anchor=(1.0, 1.0))
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, metadata=_PNG_META)
    plt.close(fig)
    return path


def plot_loss_curve(trace: Sequence[float], path: str | Path) -> Path:
    _style()
    fig, ax = plt.subplots(figsize=(4.5, 3))
    ax.plot(range(1, len(trace) + 1), trace, marker="o", ms=3)
    ax.xaxis.set_major_locator(MaxNLocator(integer=True))
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean hinge loss")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, metadata=_PNG_META)
    plt.close(fig)
    return path
