"""Human-readable and machine-readable evaluation outputs."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from ..core import MetricsReport
from .metrics import EvaluationResult

HEADLINE_FIELDS = ("iou", "f1", "precision", "recall", "accuracy")
_ROW_LABELS = {
    "iou": "Intersection over Union (IoU)",
    "f1": "F1-Score",
    "precision": "Precision",
    "recall": "Recall",
    "accuracy": "Accuracy",
}


def metrics_table_text(report: MetricsReport, title: str = "Performance metrics") -> str:
    """Two-column text table (parameter, percentage) of the headline metrics."""
    width = max(len(v) for v in _ROW_LABELS.values())
    lines = [title, "-" * (width + 13)]
    lines.append(f"{'Parameters':<{width}}  Percentage")
    for field in HEADLINE_FIELDS:
        value = getattr(report, field) * 100.0
        lines.append(f"{_ROW_LABELS[field]:<{width}}  {value:6.1f}%")
    return "\n".join(lines) + "\n"


def save_metrics_chart(report: MetricsReport, path) -> None:
    """Bar chart of the headline metrics as percentages, written as PNG."""
    labels = ["IoU", "F1-Score", "Precision", "Recall", "Accuracy"]
    values = [getattr(report, field) * 100.0 for field in HEADLINE_FIELDS]
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    bars = ax.bar(labels, values, color="#4878cf")
    ax.set_ylim(0, 100)
    ax.set_ylabel("Percentage")
    ax.bar_label(bars, fmt="%.1f%%", fontsize=9)
    ax.set_title("Performance metrics")
    fig.tight_layout()
    # Strip the mutable Software tag so chart bytes depend only on the data.
    fig.savefig(str(path), format="png", metadata={"Software": None})
    plt.close(fig)


def evaluation_report_dict(result: EvaluationResult) -> dict:
    """JSON-ready report: micro counts + metrics, macro means, per-image rows."""
    return {
        "split": result.split,
        "n_images": result.n_images,
        "micro": result.micro.to_dict(),
        "macro": dict(result.macro),
        "per_image": [
            {"image": os.path.basename(path), **report.to_dict()}
            for path, report in result.per_image
        ],
    }
