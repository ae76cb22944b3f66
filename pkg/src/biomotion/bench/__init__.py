"""Dataset loading, synthetic scenes and change-detection scoring."""

from .datasets import (
    CdnetSequence,
    LabelledSequence,
    SyntheticSceneSpec,
    direction_sequence,
    direction_suite,
    export_cdnet,
    load_cdnet,
    synth_generate,
)
from .scoring import (
    METRICS,
    BenchError,
    ConfusionCounts,
    GtLabel,
    MetricsReport,
    RankTable,
    compute_metrics,
    emit_report,
    exact_metrics,
    rank_methods,
    read_report_csv,
    score_frame,
)

__all__ = [
    "METRICS",
    "BenchError",
    "CdnetSequence",
    "ConfusionCounts",
    "GtLabel",
    "LabelledSequence",
    "MetricsReport",
    "RankTable",
    "SyntheticSceneSpec",
    "compute_metrics",
    "direction_sequence",
    "direction_suite",
    "emit_report",
    "exact_metrics",
    "export_cdnet",
    "load_cdnet",
    "rank_methods",
    "read_report_csv",
    "score_frame",
    "synth_generate",
]
