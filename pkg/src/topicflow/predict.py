"""Cluster-year features and next-year event prediction.

One row per (cluster, year) that has a defined dynamic/stable group at the
next step: member counts, mean interdisciplinarity scores (language over
strong members by default; network split strong/weak), and the binary
target (1 = split/merge, 0 = continuation/death).  Clusters with no weak
members impute the weak network mean as 0 and raise an indicator flag.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, fields

import numpy as np

from ._util import fmt_float
from .errors import DataError
from .events import EventGroup
from .logit import LogitFit, MarginalEffects, fit_logit, marginal_effects
from .scoring import InterdisciplinarityScore, language_id

log = logging.getLogger(__name__)

ALPHA = 0.05
# Regression/forest covariates; the imputation indicator stays in the CSV
# for audit but is not a model input (the reported models use the six
# substantive covariates plus the constant).
FEATURE_COLUMNS = [
    "n_strong",
    "n_weak",
    "mean_id_text_strong",
    "mean_id_net_strong",
    "mean_id_net_weak",
    "year",
]


@dataclass(frozen=True)
class FeatureRow:
    cluster_id: int
    year: int
    n_strong: int
    n_weak: int
    mean_id_text_strong: float
    mean_id_net_strong: float
    mean_id_net_weak: float
    weak_imputed: int
    label: int  # 1 = split/merge next year, 0 = continuation/death


def build_features(
    year: int,
    model,
    scores: list[InterdisciplinarityScore],
    groups: dict[int, EventGroup],
    language_mean_includes_weak: bool = False,
) -> list[FeatureRow]:
    """Rows for every year cluster with a defined next-year group.

    ``language_mean_includes_weak`` switches the language mean to also
    average membership-derived spread scores of assigned weak members
    (the default follows the strong-members-only reading).
    """
    by_cluster_strong: dict[int, list[InterdisciplinarityScore]] = {}
    by_cluster_weak: dict[int, list[InterdisciplinarityScore]] = {}
    row_of = {}
    for idx, s in enumerate(scores):
        row_of[s.paper_id] = idx
        target = by_cluster_weak if s.is_weak else by_cluster_strong
        target.setdefault(s.cluster_id, []).append(s)

    rows = []
    for cluster_id in sorted(groups):
        group = groups[cluster_id]
        if group is EventGroup.EXCLUDED:
            continue
        strong = by_cluster_strong.get(cluster_id, [])
        weak = by_cluster_weak.get(cluster_id, [])
        if not strong:
            log.warning("cluster %d in year %d has no strong members; row dropped",
                        cluster_id, year)
            continue
        lang_values = [s.id_text for s in strong]
        if language_mean_includes_weak and model is not None and model.membership is not None:
            for s in weak:
                r = row_of[s.paper_id]
                lang_values.append(
                    language_id(model.membership[r], float(model.weak_mass[r]))
                )
        mean_net_weak = float(np.mean([s.id_network for s in weak])) if weak else 0.0
        rows.append(
            FeatureRow(
                cluster_id=cluster_id,
                year=year,
                n_strong=len(strong),
                n_weak=len(weak),
                mean_id_text_strong=float(np.mean(lang_values)),
                mean_id_net_strong=float(np.mean([s.id_network for s in strong])),
                mean_id_net_weak=mean_net_weak,
                weak_imputed=0 if weak else 1,
                label=1 if group is EventGroup.DYNAMIC else 0,
            )
        )
    return rows


def feature_matrix(
    rows: list[FeatureRow], columns: list[str] | None = None
) -> tuple[np.ndarray, np.ndarray, list[str]]:
    columns = list(columns) if columns else list(FEATURE_COLUMNS)
    valid = {f.name for f in fields(FeatureRow)}
    unknown = set(columns) - valid
    if unknown:
        raise DataError(f"unknown feature columns: {sorted(unknown)}")
    X = np.array([[getattr(r, c) for c in columns] for r in rows], dtype=np.float64)
    y = np.array([r.label for r in rows], dtype=np.float64)
    return X, y, columns


def decide_retention(
    names: list[str],
    coef_p: dict[str, float],
    ame_p: dict[str, float],
    alpha: float = ALPHA,
) -> list[str]:
    """Keep a feature when its coefficient OR its marginal effect is
    significant; a significant effect rescues an insignificant coefficient."""
    return [
        n for n in names
        if coef_p.get(n, 1.0) < alpha or ame_p.get(n, 1.0) < alpha
    ]


def purposeful_selection(
    X: np.ndarray,
    y: np.ndarray,
    feature_names: list[str],
    alpha: float = ALPHA,
) -> tuple[list[str], LogitFit, LogitFit, MarginalEffects, MarginalEffects]:
    """Initial all-feature unstandardized fit, retention by coefficient or
    marginal-effect significance, then a standardized refit of the keepers."""
    initial = fit_logit(X, y, feature_names, standardize=False)
    initial_ame = marginal_effects(initial, X)
    coef_p = {n: initial.p_values[i] for i, n in enumerate(initial.feature_names) if n != "const"}
    ame_p = {n: initial_ame.p_values[i] for i, n in enumerate(initial_ame.feature_names)}
    retained = decide_retention(feature_names, coef_p, ame_p, alpha)
    if not retained:
        raise DataError("purposeful selection retained no features")
    idx = [feature_names.index(n) for n in retained]
    final = fit_logit(X[:, idx], y, retained, standardize=True)
    final_ame = marginal_effects(final, X[:, idx])
    return retained, initial, final, initial_ame, final_ame


@dataclass
class Metrics:
    micro_f1: float
    f1_per_class: dict[int, float]
    confusion: np.ndarray  # [true][pred]


def evaluate(y_true: np.ndarray, y_pred: np.ndarray) -> Metrics:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise DataError("prediction and truth lengths differ")
    confusion = np.zeros((2, 2), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        confusion[t, p] += 1

    f1 = {}
    for c in (0, 1):
        tp = confusion[c, c]
        fp = confusion[1 - c, c]
        fn = confusion[c, 1 - c]
        denom = 2 * tp + fp + fn
        f1[c] = 2 * tp / denom if denom else 0.0
    # micro averaging pools per-class TP/FP/FN; for single-label binary
    # output this equals accuracy
    tp_total = confusion[0, 0] + confusion[1, 1]
    fp_total = confusion[1, 0] + confusion[0, 1]
    micro = 2 * tp_total / (2 * tp_total + fp_total + fp_total) if len(y_true) else 0.0
    return Metrics(micro_f1=float(micro), f1_per_class=f1, confusion=confusion)


def split_by_year(
    rows: list[FeatureRow], train_years: list[int], test_year: int
) -> tuple[list[FeatureRow], list[FeatureRow]]:
    train = [r for r in rows if r.year in set(train_years)]
    test = [r for r in rows if r.year == test_year]
    if not train:
        raise DataError(f"no rows in training years {sorted(train_years)}")
    if not test:
        raise DataError(f"no rows in test year {test_year}")
    return train, test


def write_features_csv(rows: list[FeatureRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(
            ["cluster_id", "year", "n_strong", "n_weak", "mean_id_text_strong",
             "mean_id_net_strong", "mean_id_net_weak", "weak_imputed", "label_next_year"]
        )
        for r in sorted(rows, key=lambda r: (r.year, r.cluster_id)):
            w.writerow(
                [r.cluster_id, r.year, r.n_strong, r.n_weak,
                 fmt_float(r.mean_id_text_strong), fmt_float(r.mean_id_net_strong),
                 fmt_float(r.mean_id_net_weak), r.weak_imputed, r.label]
            )


def write_predictions_csv(rows: list[FeatureRow], predicted: np.ndarray,
                          probabilities: np.ndarray, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cluster_id", "year", "predicted", "probability"])
        for r, p, q in zip(rows, predicted, probabilities):
            w.writerow([r.cluster_id, r.year, int(p), fmt_float(q)])
