"""Five-label ground truth scoring, the eight segmentation metrics and rank aggregation."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, fields
from enum import IntEnum
from fractions import Fraction
from pathlib import Path

import numpy as np


class BenchError(ValueError):
    pass


class GtLabel(IntEnum):
    STATIC = 0
    SHADOW = 50
    NON_ROI = 85
    UNKNOWN = 170
    MOVING = 255

    @classmethod
    def decode(cls, value: int) -> "GtLabel":
        try:
            return cls(int(value))
        except ValueError:
            raise BenchError(f"{value} is not a ground-truth code") from None


GT_CODES = np.array([label.value for label in GtLabel], dtype=np.uint8)


def check_gt(gt) -> np.ndarray:
    gt = np.asarray(gt)
    bad = ~np.isin(gt, GT_CODES)
    if bad.any():
        raise BenchError(f"ground truth contains undefined code {int(gt[bad].flat[0])}")
    return gt.astype(np.uint8)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise BenchError(f"{f.name} must be >= 0")

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.tn + other.tn, self.fp + other.fp, self.fn + other.fn)

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def score_frame(mask, gt, roi=None) -> ConfusionCounts:
    """Confusion counts over evaluated pixels.

    Moving is the positive class, Static and Shadow negative; NonROI and
    Unknown pixels (and anything outside ``roi`` when given) are ignored.
    """
    mask = np.asarray(mask)
    gt = check_gt(gt)
    if mask.shape != gt.shape:
        raise BenchError(f"mask {mask.shape} and ground truth {gt.shape} differ in size")
    on = mask != 0
    pos = gt == GtLabel.MOVING
    neg = (gt == GtLabel.STATIC) | (gt == GtLabel.SHADOW)
    if roi is not None:
        roi = np.asarray(roi) != 0
        if roi.shape != gt.shape:
            raise BenchError("ROI mask size differs from ground truth")
        pos &= roi
        neg &= roi
    return ConfusionCounts(
        tp=int(np.count_nonzero(on & pos)),
        tn=int(np.count_nonzero(~on & neg)),
        fp=int(np.count_nonzero(on & neg)),
        fn=int(np.count_nonzero(~on & pos)),
    )


METRICS = ("re", "sp", "fpr", "fnr", "wcr", "ccr", "pr", "f1")
HIGHER_IS_BETTER = {"re": True, "sp": True, "fpr": False, "fnr": False, "wcr": False, "ccr": True, "pr": True, "f1": True}


@dataclass
class MetricsReport:
    re: float
    sp: float
    fpr: float
    fnr: float
    wcr: float
    ccr: float
    pr: float
    f1: float
    method: str = ""
    category: str = ""
    # metrics whose denominator was zero and were set to 0
    undefined: tuple[str, ...] = field(default=())

    def values(self) -> dict[str, float]:
        return {m: getattr(self, m) for m in METRICS}


def exact_metrics(c: ConfusionCounts) -> dict[str, Fraction]:
    """The eight metrics as exact fractions; undefined ones are omitted."""

    def ratio(num, den):
        return Fraction(num, den) if den else None

    out = {
        "re": ratio(c.tp, c.tp + c.fn),
        "sp": ratio(c.tn, c.tn + c.fp),
        "fpr": ratio(c.fp, c.fp + c.tn),
        "fnr": ratio(c.fn, c.tp + c.fn),
        "wcr": ratio(c.fp + c.fn, c.total),
        "ccr": ratio(c.tp + c.tn, c.total),
        "pr": ratio(c.tp, c.tp + c.fp),
    }
    pr, re = out["pr"], out["re"]
    out["f1"] = None if pr is None or re is None or pr + re == 0 else 2 * pr * re / (pr + re)
    return {k: v for k, v in out.items() if v is not None}


def compute_metrics(c: ConfusionCounts, method: str = "", category: str = "") -> MetricsReport:
    exact = exact_metrics(c)
    undefined = tuple(m for m in METRICS if m not in exact)
    vals = {m: float(exact[m]) if m in exact else 0.0 for m in METRICS}
    return MetricsReport(**vals, method=method, category=category, undefined=undefined)


@dataclass
class RankTable:
    methods: list[str]
    categories: list[str]
    # ranks[category][metric][method]
    ranks: dict[str, dict[str, dict[str, float]]]
    r: dict[str, dict[str, float]]  # r[category][method]
    arc: dict[str, float]


def _mean_ranks(values: dict[str, float], higher_better: bool) -> dict[str, float]:
    order = sorted(values, key=lambda m: -values[m] if higher_better else values[m])
    ranks: dict[str, float] = {}
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        shared = (i + j) / 2 + 1
        for m in order[i : j + 1]:
            ranks[m] = shared
        i = j + 1
    return ranks


def rank_methods(reports) -> RankTable:
    """Rank methods per category and metric; R averages all eight ranks, ARC averages R."""
    reports = list(reports)
    methods = sorted({rep.method for rep in reports})
    categories = sorted({rep.category for rep in reports})
    grid = {}
    for rep in reports:
        key = (rep.category, rep.method)
        if key in grid:
            raise BenchError(f"duplicate report for {key}")
        grid[key] = rep
    missing = [(c, m) for c in categories for m in methods if (c, m) not in grid]
    if missing:
        raise BenchError(f"ragged input: no report for category/method {missing[0]}")
    ranks, r = {}, {}
    for cat in categories:
        ranks[cat] = {}
        for metric in METRICS:
            vals = {m: getattr(grid[cat, m], metric) for m in methods}
            ranks[cat][metric] = _mean_ranks(vals, HIGHER_IS_BETTER[metric])
        r[cat] = {m: sum(ranks[cat][k][m] for k in METRICS) / len(METRICS) for m in methods}
    arc = {m: sum(r[c][m] for c in categories) / len(categories) for m in methods} if categories else {}
    return RankTable(methods, categories, ranks, r, arc)


CSV_COLUMNS = ("method", "category", *METRICS, "r")


def emit_report(table: RankTable, reports, timing: dict | None, csv_path, json_path) -> None:
    """CSV rows sorted by method then category, plus a JSON summary of ARC and fps."""
    rows = sorted(reports, key=lambda rep: (rep.method, rep.category))
    try:
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for rep in rows:
                r = table.r.get(rep.category, {}).get(rep.method, 0.0)
                writer.writerow([rep.method, rep.category, *(repr(getattr(rep, m)) for m in METRICS), repr(r)])
        summary = {"arc": dict(sorted(table.arc.items())), "fps": dict(sorted((timing or {}).items()))}
        Path(json_path).write_text(json.dumps(summary, indent=2, sort_keys=True))
    except OSError as exc:
        raise OSError(f"cannot write report: {exc}") from exc


def read_report_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        for k in (*METRICS, "r"):
            row[k] = float(row[k])
    return rows
