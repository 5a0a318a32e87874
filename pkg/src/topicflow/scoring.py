"""Per-paper interdisciplinarity scores.

``language_id`` measures the spread of a paper's soft cluster-membership
distribution: N/(N-1) * (1 - P_wm - max(P)) * (1 - sigma_p), with sigma_p
the population standard deviation of the N cluster probabilities.  It is 0
for a paper fully owned by one cluster and approaches 1 for a uniform
spread with no weak mass.

``network_id`` rescales betweenness within a publication-year cohort:
each paper's centrality divided by the cohort maximum (all zeros when the
cohort maximum is zero).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ._util import fmt_float
from .errors import DataError

DISTRIBUTION_TOL = 1e-9


@dataclass(frozen=True)
class InterdisciplinarityScore:
    paper_id: str
    year: int
    cluster_id: int
    is_weak: bool
    id_text: float | None  # absent for weak members
    id_network: float
    sigma_p: float | None = None


def language_id(cluster_probs: np.ndarray, weak_mass: float, n_clusters: int | None = None) -> float:
    """Spread score of one membership row (strong members only)."""
    p = np.asarray(cluster_probs, dtype=np.float64)
    n = p.shape[0] if n_clusters is None else int(n_clusters)
    if n != p.shape[0]:
        raise DataError(f"expected {n} cluster probabilities, got {p.shape[0]}")
    if n < 2:
        raise DataError("language score needs at least 2 clusters")
    if np.any(p < -DISTRIBUTION_TOL) or weak_mass < -DISTRIBUTION_TOL:
        raise DataError("membership row has negative mass")
    total = float(p.sum() + weak_mass)
    if abs(total - 1.0) > 1e-6:
        raise DataError(f"membership row sums to {total}, expected 1")
    sigma_p = float(np.std(p))  # population std over the N cluster entries
    value = (n / (n - 1.0)) * (1.0 - weak_mass - float(p.max())) * (1.0 - sigma_p)
    return float(min(max(value, 0.0), 1.0))


def network_id(centrality: dict[str, float], cohort: set[str] | frozenset[str]) -> dict[str, float]:
    """Cohort-normalized betweenness for every paper published in year t."""
    if not cohort:
        raise DataError("empty cohort")
    missing = [pid for pid in cohort if pid not in centrality]
    if missing:
        raise DataError(f"papers missing from centrality map: {sorted(missing)[:5]}")
    values = {pid: centrality[pid] for pid in cohort}
    peak = max(values.values())
    if peak <= 0.0:
        return {pid: 0.0 for pid in values}
    return {pid: v / peak for pid, v in values.items()}


def score_year(
    year: int,
    paper_ids: list[str],
    model,
    centrality: dict[str, float],
    cohort: set[str],
) -> list[InterdisciplinarityScore]:
    """Join soft memberships and cohort-normalized centrality for one year.

    ``paper_ids`` aligns rows of the model with paper ids; papers outside the
    graph cohort are an error (scores are defined per Eq.-style contracts on
    the cohort).
    """
    if model.membership is None or model.weak_mass is None:
        raise DataError("model lacks soft memberships; run soft_membership first")
    net = network_id(centrality, set(cohort))
    out = []
    for row, pid in enumerate(paper_ids):
        weak = model.labels[row] < 0
        cluster_id = (
            int(model.weak_assignments[row])
            if weak and model.weak_assignments is not None
            else int(model.labels[row])
        )
        if weak:
            id_text = None
            sigma_p = None
        else:
            p = model.membership[row]
            id_text = language_id(p, float(model.weak_mass[row]))
            sigma_p = float(np.std(p))
        out.append(
            InterdisciplinarityScore(
                paper_id=pid,
                year=year,
                cluster_id=cluster_id,
                is_weak=bool(weak),
                id_text=id_text,
                id_network=net[pid],
                sigma_p=sigma_p,
            )
        )
    return out


def write_scores_csv(scores: list[InterdisciplinarityScore], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["paper_id", "year", "cluster_id", "is_weak", "id_text", "id_network"])
        for s in sorted(scores, key=lambda s: (s.year, s.paper_id)):
            w.writerow(
                [
                    s.paper_id,
                    s.year,
                    s.cluster_id,
                    int(s.is_weak),
                    "" if s.id_text is None else fmt_float(s.id_text),
                    fmt_float(s.id_network),
                ]
            )
