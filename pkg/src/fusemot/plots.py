"""Figure rendering for evaluation and ablation reports.

Every function writes a PNG next to the delimited text outputs; nothing
is shown interactively.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .ablate import AblationTable
from .metrics import MetricsReport


def save_metrics_figure(report: MetricsReport, path) -> None:
    """Grouped bars of the headline scores per category."""
    categories = sorted(report.per_category)
    keys = ("hota", "mota", "samota")
    width = 0.8 / len(keys)
    x = np.arange(len(categories))
    fig, ax = plt.subplots(figsize=(max(4.0, 1.8 * len(categories)), 3.2))
    for k, key in enumerate(keys):
        values = [getattr(report.per_category[c], key) for c in categories]
        ax.bar(x + (k - (len(keys) - 1) / 2) * width, values, width, label=key.upper())
    ax.set_xticks(x)
    ax.set_xticklabels(categories)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("score")
    ax.legend(fontsize=8)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_recall_figure(report: MetricsReport, path) -> None:
    """MOTA and scaled MOTA across the recall sweep, one line pair per
    category."""
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    for cat in sorted(report.per_category):
        points = report.per_category[cat].recall_points
        if not points:
            continue
        recalls = [p.recall for p in points]
        ax.plot(recalls, [p.smota for p in points], label=f"{cat} sMOTA")
        ax.plot(recalls, [p.mota for p in points], linestyle="--",
                label=f"{cat} MOTA")
    ax.set_xlabel("recall")
    ax.set_ylabel("score")
    ax.set_ylim(-0.05, 1.05)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_ablation_figure(table: AblationTable, path) -> None:
    """Median HOTA bars with median identity switches on a twin axis."""
    labels = [row.label for row in table.rows]
    x = np.arange(len(labels))
    fig, ax = plt.subplots(figsize=(max(5.0, 1.1 * len(labels)), 3.6))
    ax.bar(x - 0.2, [row.hota for row in table.rows], 0.4,
           label="HOTA (median)", color="tab:blue")
    ax.set_ylabel("HOTA")
    ax.set_ylim(0, 1.05)
    ax2 = ax.twinx()
    ax2.bar(x + 0.2, [row.ids for row in table.rows], 0.4,
            label="IDS (median)", color="tab:red")
    ax2.set_ylabel("IDS")
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    handles1, labels1 = ax.get_legend_handles_labels()
    handles2, labels2 = ax2.get_legend_handles_labels()
    ax.legend(handles1 + handles2, labels1 + labels2, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
