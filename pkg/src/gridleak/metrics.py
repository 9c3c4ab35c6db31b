"""Evaluation metrics and leakage report assembly.

All reported numbers are percentages on [0, 100] (report tables follow
the usual Baseline / Random / Adversary layout with a trailing Average
block). ``roc_auc`` and ``macro_prf1`` themselves return fractions.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

SOURCES = ("Baseline", "Random", "Adversary")
AVERAGE_LABEL = "Average"
CSV_HEADER = "property,source,auc,f1,precision,recall"


def _check_binary(labels: np.ndarray) -> None:
    classes = np.unique(labels)
    if not np.isin(classes, (0, 1)).all():
        raise ValueError(f"labels must be 0/1, got {classes}")
    if len(classes) < 2:
        raise ValueError("metric undefined with a single class present")


def roc_auc(scores, labels) -> float:
    """Area under the ROC curve by trapezoidal integration over thresholds.

    Tie groups move the ROC point diagonally, so the result equals the
    Mann-Whitney pair statistic with ties counted 1/2.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape or scores.ndim != 1 or len(scores) == 0:
        raise ValueError(f"bad shapes: scores {scores.shape}, labels {labels.shape}")
    _check_binary(labels)
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], labels[order]
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos

    area = 0.0
    tp = fp = 0
    i = 0
    while i < len(s):
        j = i
        while j < len(s) and s[j] == s[i]:
            j += 1
        d_tp = int(y[i:j].sum())
        d_fp = (j - i) - d_tp
        area += d_fp * (tp + tp + d_tp) / 2.0
        tp += d_tp
        fp += d_fp
        i = j
    return area / (n_pos * n_neg)


def macro_prf1(scores, labels, threshold: float = 0.5) -> tuple[float, float, float]:
    """Macro precision/recall/F1 at a fixed threshold.

    Each class is treated as positive in turn; zero-denominator terms
    count as 0; macro-F1 averages the per-class F1 values (it is not the
    harmonic mean of macro precision and macro recall).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(scores) == 0:
        raise ValueError("empty input")
    _check_binary(labels)
    preds = (scores >= threshold).astype(np.int64)
    precisions, recalls, f1s = [], [], []
    for positive in (0, 1):
        tp = int(np.sum((preds == positive) & (labels == positive)))
        fp = int(np.sum((preds == positive) & (labels != positive)))
        fn = int(np.sum((preds != positive) & (labels == positive)))
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        precisions.append(p)
        recalls.append(r)
        f1s.append(f)
    return float(np.mean(precisions)), float(np.mean(recalls)), float(np.mean(f1s))


@dataclass
class MetricRow:
    """One (property, source) result in percent."""

    property: str
    source: str
    auc: float | None
    f1: float | None
    precision: float | None
    recall: float | None

    def __post_init__(self):
        for name in ("auc", "f1", "precision", "recall"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 100.0:
                raise ValueError(f"{name} must be in [0, 100], got {v}")


def metric_row(prop: str, source: str, scores, labels) -> MetricRow:
    """Scores + labels -> a percent-scale row."""
    auc = roc_auc(scores, labels)
    precision, recall, f1 = macro_prf1(scores, labels)
    return MetricRow(prop, source, 100 * auc, 100 * f1, 100 * precision, 100 * recall)


def random_reference(prop: str, labels, seed: int, trials: int = 200) -> MetricRow:
    """Monte-Carlo random-guessing reference: mean metrics of uniform scores."""
    labels = np.asarray(labels, dtype=np.int64)
    _check_binary(labels)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 9]))
    aucs, f1s, precisions, recalls = [], [], [], []
    for _ in range(trials):
        scores = rng.uniform(0.0, 1.0, len(labels))
        aucs.append(roc_auc(scores, labels))
        p, r, f = macro_prf1(scores, labels)
        precisions.append(p)
        recalls.append(r)
        f1s.append(f)
    return MetricRow(prop, "Random", 100 * float(np.mean(aucs)),
                     100 * float(np.mean(f1s)), 100 * float(np.mean(precisions)),
                     100 * float(np.mean(recalls)))


@dataclass
class LeakageReport:
    """Ordered per-property rows plus the Average block."""

    rows: list[MetricRow]
    notes: list[str]

    def to_csv(self) -> str:
        lines = [CSV_HEADER]
        for r in self.rows:
            lines.append(",".join([r.property, r.source, _cell(r.auc), _cell(r.f1),
                                   _cell(r.precision), _cell(r.recall)]))
        return "\n".join(lines) + "\n"

    def render(self) -> str:
        widths = max(len(r.property) for r in self.rows)
        header = f"{'Property':<{widths}}  {'Model':<9} {'AUC':>7} {'F1':>7} {'Prec':>7} {'Rec':>7}"
        out = [header, "-" * len(header)]
        prev = None
        for r in self.rows:
            name = r.property if r.property != prev else ""
            prev = r.property
            out.append(f"{name:<{widths}}  {r.source:<9} {_cell(r.auc):>7} "
                       f"{_cell(r.f1):>7} {_cell(r.precision):>7} {_cell(r.recall):>7}")
        for note in self.notes:
            out.append(f"note: {note}")
        return "\n".join(out) + "\n"

    def average(self, source: str) -> MetricRow:
        for r in self.rows:
            if r.property == AVERAGE_LABEL and r.source == source:
                return r
        raise KeyError(f"no Average row for {source}")

    def cell(self, prop: str, source: str) -> MetricRow:
        for r in self.rows:
            if r.property == prop and r.source == source:
                return r
        raise KeyError(f"no row for ({prop}, {source})")


def _cell(v: float | None) -> str:
    return "" if v is None else f"{v:.2f}"


def build_report(rows: list[MetricRow], notes: list[str] | None = None) -> LeakageReport:
    """Order rows (properties alphabetical, sources Baseline/Random/Adversary),
    append unweighted per-source Average rows, attach footnotes."""
    if not rows:
        raise ValueError("no rows to report")
    props = sorted({r.property for r in rows})
    by_key = {(r.property, r.source): r for r in rows}
    ordered: list[MetricRow] = []
    for prop in props:
        for source in SOURCES:
            row = by_key.get((prop, source))
            if row is None:
                log.warning("missing %s row for property %r", source, prop)
                row = MetricRow(prop, source, None, None, None, None)
            ordered.append(row)
    for source in SOURCES:
        have = [r for r in ordered if r.source == source and r.auc is not None
                and r.property != AVERAGE_LABEL]
        if have:
            ordered.append(MetricRow(
                AVERAGE_LABEL, source,
                float(np.mean([r.auc for r in have])),
                float(np.mean([r.f1 for r in have])),
                float(np.mean([r.precision for r in have])),
                float(np.mean([r.recall for r in have]))))
        else:
            ordered.append(MetricRow(AVERAGE_LABEL, source, None, None, None, None))
    all_notes = ["analytic random-guess AUC is 50.00 by definition"]
    all_notes.extend(notes or [])
    return LeakageReport(ordered, all_notes)
