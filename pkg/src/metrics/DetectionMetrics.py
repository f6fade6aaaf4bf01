# *************************************************************************************************************************
#   DetectionMetrics.py
#       Failure-detection metrics over labelled failure scores: AUC-ROC, FPR at a target recall, ECE, subset recall and
#       the ROC curve.
# -------------------------------------------------------------------------------------------------------------------
#   Usage:
#       data = [LabeledScore("t1", 0.9, 1), LabeledScore("t2", 0.2, 0)]
#       auc_roc(data); fpr_at_recall(data, 0.9); ece(data, 10); roc_curve(data)
#
#   Design Notes:
#   -.  Label 1 (incorrect) is the positive class; an item is predicted positive iff its failure score >= threshold.
#   -.  AUC is the Mann-Whitney statistic with half credit for ties, computed from average ranks.
#   -.  A threshold at or below the minimum score flags the whole dataset and is not admissible for FPR@recall.
#       When no admissible threshold reaches the target, FPR is reported as 1 with the maximum admissible recall.
#   -.  ECE uses equal-width bins over [0, 1]; the last bin is closed on the right.
# *************************************************************************************************************************

import math
from dataclasses import dataclass, field
from typing import FrozenSet, Optional

import numpy as np
from scipy.stats import rankdata

from src.utils.errors import ConfigError, UndefinedMetric


@dataclass(frozen=True)
class LabeledScore:
    id: str
    score: float
    label: int
    subsets: FrozenSet[str] = field(default_factory=frozenset)

    def __post_init__(self):
        if not (math.isfinite(self.score) and 0.0 <= self.score <= 1.0):
            raise ValueError(f"score {self.score} of '{self.id}' outside [0, 1]")
        if self.label not in (0, 1):
            raise ValueError(f"label {self.label} of '{self.id}' is not 0 or 1")


@dataclass(frozen=True)
class RocPoint:
    fpr: float
    tpr: float
    threshold: float


@dataclass(frozen=True)
class FprAtRecall:
    target: float
    fpr: float
    achieved: bool
    max_recall: float
    threshold: Optional[float]
    recall: float

    def to_dict(self):
        return {"target": self.target, "fpr": self.fpr, "achieved": self.achieved, "max_recall": self.max_recall,
                "threshold": self.threshold, "recall": self.recall}


def _arrays(data):
    scores = np.asarray([d.score for d in data], dtype=np.float64)
    labels = np.asarray([d.label for d in data], dtype=np.int64)
    return scores, labels


def _class_counts(labels, metric):
    positives = int(labels.sum())
    negatives = int(labels.size - positives)
    if positives == 0 or negatives == 0:
        raise UndefinedMetric(f"{metric} needs both classes ({positives} positives, {negatives} negatives)")
    return positives, negatives


def auc_roc(data):
    scores, labels = _arrays(data)
    return auc_from_arrays(scores, labels)


def auc_from_arrays(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    positives, negatives = _class_counts(labels, "AUC-ROC")
    ranks = rankdata(scores, method="average")
    u_statistic = float(ranks[labels == 1].sum()) - positives * (positives + 1) / 2.0
    return u_statistic / (positives * negatives)


def roc_curve(data):
    """
    ROC points from (0, 0) at threshold +inf through every distinct score in decreasing order; the last point,
    at the minimum score, is (1, 1).
    """
    scores, labels = _arrays(data)
    positives, negatives = _class_counts(labels, "ROC curve")
    order = np.argsort(-scores, kind="mergesort")
    sorted_scores, sorted_labels = scores[order], labels[order]
    true_positives = np.cumsum(sorted_labels)
    false_positives = np.cumsum(1 - sorted_labels)
    last_of_value = np.r_[np.nonzero(np.diff(sorted_scores))[0], sorted_scores.size - 1]

    points = [RocPoint(0.0, 0.0, math.inf)]
    for index in last_of_value:
        points.append(RocPoint(float(false_positives[index]) / negatives, float(true_positives[index]) / positives,
                               float(sorted_scores[index])))
    return points


def roc_area(points):
    fpr = np.asarray([p.fpr for p in points])
    tpr = np.asarray([p.tpr for p in points])
    return float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) / 2.0))


def fpr_at_recall(data, target=0.9):
    if not 0.0 < target <= 1.0:
        raise ConfigError(f"recall target {target} outside (0, 1]", field_path="metrics.recall_target")
    scores, _ = _arrays(data)
    minimum = float(scores.min()) if scores.size else 0.0
    admissible = [p for p in roc_curve(data)[1:] if p.threshold > minimum]

    reaching = [p for p in admissible if p.tpr >= target]
    max_recall = max((p.tpr for p in admissible), default=0.0)
    if reaching:
        best = min(reaching, key=lambda p: (p.fpr, -p.tpr, -p.threshold))
        return FprAtRecall(target, best.fpr, True, max_recall, best.threshold, best.tpr)
    if admissible:
        best = min((p for p in admissible if p.tpr == max_recall), key=lambda p: (p.fpr, -p.threshold))
        return FprAtRecall(target, 1.0, False, max_recall, best.threshold, best.tpr)
    return FprAtRecall(target, 1.0, False, 0.0, None, 0.0)


def ece(data, bins=10):
    if int(bins) < 1:
        raise ConfigError(f"ECE needs at least one bin, got {bins}", field_path="metrics.ece_bins")
    scores, labels = _arrays(data)
    if scores.size == 0:
        raise UndefinedMetric("ECE of an empty dataset")
    bin_index = np.minimum(np.floor(scores * bins).astype(np.int64), bins - 1)
    total = 0.0
    for b in np.unique(bin_index):
        members = bin_index == b
        weight = members.sum() / scores.size
        total += weight * abs(scores[members].mean() - labels[members].mean())
    return float(min(total, 1.0))


def subset_recall(data, flags, subset):
    """
    Fraction of the members of a subset that are flagged; flags align with data.
    """
    if len(flags) != len(data):
        raise ValueError("flags must align with data")
    members = [bool(f) for d, f in zip(data, flags) if subset in d.subsets]
    if not members:
        raise UndefinedMetric(f"subset '{subset}' is empty")
    return sum(members) / len(members)


def flags_at(data, threshold):
    if threshold is None:
        return [False] * len(data)
    return [d.score >= threshold for d in data]
