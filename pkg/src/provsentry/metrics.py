"""Detection quality accounting: confusion counts, derived rates, ROC AUC.

A node counts as predicted-positive when its verdict is Malicious or
Anomalous; ground truth is positive for Malicious labels only. AUC ranks
nodes by the malicious class probability with proper tie grouping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .detector import DetectionRecord, Verdict
from .ingest import Label

POSITIVE_VERDICTS = (Verdict.MALICIOUS, Verdict.ANOMALOUS)


@dataclass
class MetricsReport:
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    precision: float
    recall: float
    f1: float
    fpr: float
    auc: float | None = None

    @classmethod
    def from_counts(cls, tp: int, fp: int, tn: int, fn: int,
                    auc: float | None = None) -> "MetricsReport":
        total = tp + fp + tn + fn
        if total == 0:
            raise ValueError("empty confusion matrix")
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = (2 * precision * recall / (precision + recall)
              if precision + recall else 0.0)
        fpr = fp / (fp + tn) if fp + tn else 0.0
        return cls(tp=tp, fp=fp, tn=tn, fn=fn, accuracy=(tp + tn) / total,
                   precision=precision, recall=recall, f1=f1, fpr=fpr, auc=auc)

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn,
                "accuracy": self.accuracy, "precision": self.precision,
                "recall": self.recall, "f1": self.f1, "fpr": self.fpr,
                "auc": self.auc}


def roc_auc(scores: np.ndarray, positives: np.ndarray) -> float:
    """Trapezoidal area under the ROC curve; tied scores share one point."""
    scores = np.asarray(scores, dtype=np.float64)
    positives = np.asarray(positives, dtype=bool)
    n_pos = int(positives.sum())
    n_neg = len(positives) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both a positive and a negative example")
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    hits = positives[order]
    tps = np.cumsum(hits)
    fps = np.cumsum(~hits)
    boundary = np.append(np.nonzero(np.diff(sorted_scores))[0], len(sorted_scores) - 1)
    tpr = np.concatenate([[0.0], tps[boundary] / n_pos])
    fpr = np.concatenate([[0.0], fps[boundary] / n_neg])
    return float(np.trapezoid(tpr, fpr))


def evaluate(records: list[DetectionRecord], truth: dict[str, Label]) -> MetricsReport:
    """Score detections against ground truth; ids must match exactly."""
    seen = {r.node_id for r in records}
    missing = set(truth) - seen
    extra = seen - set(truth)
    if missing or extra:
        sample = sorted(missing or extra)[:3]
        raise ValueError(f"detection/truth id mismatch "
                         f"({len(missing)} missing, {len(extra)} extra, e.g. {sample})")
    tp = fp = tn = fn = 0
    scores = np.zeros(len(records))
    positives = np.zeros(len(records), dtype=bool)
    for i, rec in enumerate(records):
        actual = truth[rec.node_id] == Label.MALICIOUS
        flagged = rec.verdict in POSITIVE_VERDICTS
        scores[i] = rec.p_malicious
        positives[i] = actual
        if actual and flagged:
            tp += 1
        elif actual:
            fn += 1
        elif flagged:
            fp += 1
        else:
            tn += 1
    n_pos = int(positives.sum())
    auc = None
    if 0 < n_pos < len(records):
        auc = roc_auc(scores, positives)
    return MetricsReport.from_counts(tp, fp, tn, fn, auc=auc)


def batch_rollup(records_by_batch: dict[str, list[DetectionRecord]],
                 truth: dict[str, Label]) -> dict[str, dict]:
    """Per-batch verdict roll-up.

    A batch is predicted positive when more than half of its
    malicious-labeled nodes are flagged; batches with no malicious nodes
    fall back to "more than half of all nodes flagged". The actual batch
    label is positive when the batch contains any malicious node.
    """
    out = {}
    for batch_id, records in records_by_batch.items():
        flagged = np.array([r.verdict in POSITIVE_VERDICTS for r in records])
        actual_mal = np.array([truth.get(r.node_id) == Label.MALICIOUS
                               for r in records])
        if actual_mal.any():
            predicted = flagged[actual_mal].mean() > 0.5
        else:
            predicted = flagged.mean() > 0.5 if len(records) else False
        out[batch_id] = {"predicted": bool(predicted),
                         "actual": bool(actual_mal.any()),
                         "flagged_nodes": int(flagged.sum()),
                         "total_nodes": len(records)}
    return out


def batch_accuracy(rollup: dict[str, dict]) -> float:
    if not rollup:
        raise ValueError("no batches to score")
    hits = sum(1 for entry in rollup.values()
               if entry["predicted"] == entry["actual"])
    return hits / len(rollup)
