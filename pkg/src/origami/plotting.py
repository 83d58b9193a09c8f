"""PNG figures for benchmark and run reports.

Figures are rendered with the Agg backend and saved without the software
and date metadata chunks, so identical inputs give identical files.
"""

from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

PNG_METADATA = {"Software": None}


def save_figure(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, format="png", dpi=100, metadata=PNG_METADATA)
    plt.close(fig)
    return path


def bar_summary(summary: Dict[str, Dict[str, dict]], metric: str, path, title: str = "",
                order: Optional[Sequence[str]] = None) -> Path:
    """Mean of ``metric`` per strategy with standard-error whiskers."""
    names = [s for s in (order or sorted(summary)) if metric in summary.get(s, {})]
    means = [summary[s][metric]["mean"] for s in names]
    errs = [summary[s][metric]["standard_error"] or 0.0 for s in names]
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    ax.bar(range(len(names)), means, yerr=errs, color="0.55", capsize=3)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=20, ha="right")
    ax.set_ylabel(metric.replace("_", " "))
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return save_figure(fig, path)


def loss_curves(history: Dict[str, List[float]], path) -> Path:
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    for name, values in sorted(history.items()):
        if values:
            ax.plot(np.arange(1, len(values) + 1), values, label=name.replace("_", " "))
    ax.set_yscale("log")
    ax.set_xlabel("epoch")
    ax.set_ylabel("relative MSE")
    ax.legend()
    fig.tight_layout()
    return save_figure(fig, path)


def latency_plot(rows: List[dict], path) -> Path:
    """Median per-fold latency against outcome count, one line per method."""
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    for method in sorted({r["method"] for r in rows}):
        pts = sorted((r["outcome_count"], r["median_seconds"]) for r in rows if r["method"] == method)
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=method)
    ax.set_yscale("log")
    ax.set_xlabel("outcome count C")
    ax.set_ylabel("median seconds per fold")
    ax.legend()
    fig.tight_layout()
    return save_figure(fig, path)


def partition_map(cell_index: np.ndarray, grid_size: int, path, title: str = "") -> Path:
    """Cells of a partition over a square grid of outcomes."""
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.imshow(np.asarray(cell_index).reshape(grid_size, grid_size), cmap="tab10", interpolation="nearest")
    ax.set_xticks([])
    ax.set_yticks([])
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return save_figure(fig, path)
