"""
Geo-localization metrics, histograms and reports
"""

from .evaluate import EvalReport, check_fingerprint, evaluate, evaluate_queries
from .metrics import (
    Histogram,
    Outcomes,
    classify_outcomes,
    error_histogram,
    l2_error_prior,
    recall_at_n,
    recall_prior,
    search_all,
    search_prior,
    top1_errors,
)
from .report import (
    plot_histogram,
    render_report,
    report_table,
    write_histogram_csv,
    write_report,
)

__all__ = [
    "EvalReport",
    "Histogram",
    "Outcomes",
    "check_fingerprint",
    "classify_outcomes",
    "error_histogram",
    "evaluate",
    "evaluate_queries",
    "l2_error_prior",
    "plot_histogram",
    "recall_at_n",
    "recall_prior",
    "render_report",
    "report_table",
    "search_all",
    "search_prior",
    "top1_errors",
    "write_histogram_csv",
    "write_report",
]
