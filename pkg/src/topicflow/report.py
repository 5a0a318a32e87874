"""Static SVG 1.1 scatter plots and JSON fit reports.

The plot per year shows a 2-D projection of the reduced matrix, one color
per cluster, point radius proportional to the paper's language score, weak
members as small gray dots.  The writer is deliberately hand-rolled: no
timestamps or library fingerprints, so reruns are byte-identical.
"""

from __future__ import annotations

import json

import numpy as np

from .reducer import pca_fit

PALETTE = [
    "#4269d0", "#efb118", "#ff725c", "#6cc5b0", "#3ca951", "#ff8ab7",
    "#a463f2", "#97bbf5", "#9c6b4e", "#9498a0", "#e03231", "#2c9cdb",
]
WEAK_COLOR = "#c4c4c4"
CANVAS = 640
PAD = 40
MIN_R = 1.6
MAX_R = 7.0


def project_2d(reduced: np.ndarray) -> np.ndarray:
    """Deterministic 2-D view of the reduced matrix for plotting."""
    if reduced.shape[1] == 2:
        return np.asarray(reduced, dtype=np.float64)
    scores, _, _ = pca_fit(reduced, 2)
    return scores


def render_year_svg(
    reduced: np.ndarray,
    labels: np.ndarray,
    id_text: list[float | None],
    path,
    title: str = "",
) -> None:
    pts = project_2d(reduced)
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    xy = (pts - lo) / span * (CANVAS - 2 * PAD) + PAD

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{CANVAS}" height="{CANVAS}" viewBox="0 0 {CANVAS} {CANVAS}">',
        f'<rect width="{CANVAS}" height="{CANVAS}" fill="white"/>',
    ]
    if title:
        parts.append(
            f'<text x="{PAD}" y="{PAD - 16}" font-family="sans-serif" '
            f'font-size="14">{title}</text>'
        )
    order = np.argsort(labels, kind="stable")  # weak (-1) drawn first, underneath
    for i in order:
        x, y = xy[i]
        label = int(labels[i])
        if label < 0:
            parts.append(
                f'<circle cx="{x:.2f}" cy="{CANVAS - y:.2f}" r="{MIN_R}" '
                f'fill="{WEAK_COLOR}" fill-opacity="0.7"/>'
            )
            continue
        score = id_text[i] if id_text[i] is not None else 0.0
        r = MIN_R + (MAX_R - MIN_R) * float(score)
        color = PALETTE[label % len(PALETTE)]
        parts.append(
            f'<circle cx="{x:.2f}" cy="{CANVAS - y:.2f}" r="{r:.2f}" '
            f'fill="{color}" fill-opacity="0.8"/>'
        )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")


def fit_report(initial, final, initial_ame, final_ame, retained, forest=None,
               metrics=None) -> dict:
    """Regression tables (coefficient, P, effect, P) plus forest importances."""

    def table(fit, ame):
        rows = {}
        for i, name in enumerate(fit.feature_names):
            rows[name] = {
                "coefficient": round(float(fit.beta[i]), 6),
                "p": round(float(fit.p_values[i]), 6),
            }
        for i, name in enumerate(ame.feature_names):
            rows[name]["effect"] = round(float(ame.ame[i]), 6)
            rows[name]["effect_p"] = round(float(ame.p_values[i]), 6)
        return {
            "rows": rows,
            "log_likelihood": round(fit.log_likelihood, 6),
            "pseudo_r2": round(fit.pseudo_r2, 6),
            "n_obs": fit.n_obs,
            "standardized": fit.standardized,
        }

    doc = {
        "initial_model": table(initial, initial_ame),
        "final_model": table(final, final_ame),
        "retained_features": list(retained),
    }
    if forest is not None:
        doc["forest"] = {
            "n_trees": len(forest.trees),
            "gini_importance": {
                name: round(float(v), 6)
                for name, v in zip(forest.feature_names, forest.importances)
            },
        }
    if metrics is not None:
        doc["test_metrics"] = {
            "micro_f1": round(metrics.micro_f1, 6),
            "f1_class_0": round(metrics.f1_per_class[0], 6),
            "f1_class_1": round(metrics.f1_per_class[1], 6),
            "confusion": metrics.confusion.tolist(),
        }
    return doc


def write_fit_report(doc: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
