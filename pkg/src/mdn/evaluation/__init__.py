"""Pixel-level metrics and particle-level analysis of predicted masks."""

from .metrics import EvaluationResult, confusion_counts, evaluate, metrics
from .particles import SizeReport, connected_components, feret_diameter, size_report
from .reporting import evaluation_report_dict, metrics_table_text, save_metrics_chart

__all__ = [
    "EvaluationResult", "confusion_counts", "evaluate", "metrics",
    "SizeReport", "connected_components", "feret_diameter", "size_report",
    "evaluation_report_dict", "metrics_table_text", "save_metrics_chart",
]
