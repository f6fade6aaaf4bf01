# *************************************************************************************************************************
#   EvaluationReport.py
#       Assemble the full evaluation of one labelled score set and write it as JSON, a CSV summary row and ROC points.
# -------------------------------------------------------------------------------------------------------------------
#   Usage:
#       report = evaluate_scores(data, recall_target=0.9, bins=10, subsets=["flawed_reasoning_correct_answer"])
#       report.to_dict(); write_roc_points(report.roc_points, "runs/roc_verbalized_step.csv")
#
#   Design Notes:
#   -.  Subset recall is measured at the fpr_at_recall operating threshold (the max-recall threshold when the target
#       is not reached). An empty subset is reported as null.
#   -.  The +inf threshold of the first ROC point is written as null in JSON and 'inf' in CSV.
# *************************************************************************************************************************

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import pandas as pd

from src.metrics.DetectionMetrics import (RocPoint, auc_roc, ece, flags_at,
                                          fpr_at_recall, roc_curve,
                                          subset_recall)
from src.utils.errors import UndefinedMetric


@dataclass
class EvaluationReport:
    auc_roc: float
    fpr_at_recall: Dict[str, object]
    ece: Dict[str, object]
    subset_recalls: Dict[str, Optional[float]]
    roc_points: List[RocPoint]
    counts: Dict[str, int]
    subset_sizes: Dict[str, int] = field(default_factory=dict)

    def to_dict(self):
        return {
            "auc_roc": self.auc_roc,
            "fpr_at_recall": self.fpr_at_recall,
            "ece": self.ece,
            "subset_recalls": self.subset_recalls,
            "subset_sizes": self.subset_sizes,
            "counts": self.counts,
            "roc_points": [{"fpr": p.fpr, "tpr": p.tpr,
                            "threshold": None if math.isinf(p.threshold) else p.threshold} for p in self.roc_points],
        }


def evaluate_scores(data, recall_target=0.9, bins=10, subsets=()):
    operating = fpr_at_recall(data, recall_target)
    flags = flags_at(data, operating.threshold)
    subset_recalls, subset_sizes = {}, {}
    for subset in subsets:
        subset_sizes[subset] = sum(1 for d in data if subset in d.subsets)
        try:
            subset_recalls[subset] = subset_recall(data, flags, subset)
        except UndefinedMetric:
            subset_recalls[subset] = None
    positives = sum(d.label for d in data)
    return EvaluationReport(
        auc_roc=auc_roc(data),
        fpr_at_recall=operating.to_dict(),
        ece={"bins": int(bins), "value": ece(data, bins)},
        subset_recalls=subset_recalls,
        roc_points=roc_curve(data),
        counts={"positives": positives, "negatives": len(data) - positives},
        subset_sizes=subset_sizes,
    )


def roc_points_frame(points):
    return pd.DataFrame({"threshold": [p.threshold for p in points],
                         "fpr": [p.fpr for p in points],
                         "tpr": [p.tpr for p in points]})


def write_roc_points(points, path):
    roc_points_frame(points).to_csv(path, index=False, float_format="%.17g")
    return path


def relative_delta(step_auc, response_auc):
    """
    Relative AUC change of step over response scoring, e.g. 0.15 for '+15%'.
    """
    if step_auc is None or response_auc is None or response_auc == 0:
        return None
    return (step_auc - response_auc) / response_auc
