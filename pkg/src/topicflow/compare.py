"""Language clusters vs citation communities, by Jaccard similarity.

A language cluster "has a similar community" when at least one community
exceeds the Jaccard threshold (default 0.1).  Community member sets are
intersected with the year's core cohort first: language clusters contain
only core papers, raw communities also hold references.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

from ._util import fmt_float

JACCARD_THRESHOLD = 0.1


@dataclass(frozen=True)
class OverlapPair:
    cluster_id: int
    community_id: int
    jaccard: float


@dataclass
class OverlapReport:
    year: int
    n_clusters: int
    n_communities: int
    pairs: list[OverlapPair]  # computed with weak members included
    overlap_pct_with_weak: float | None
    overlap_pct_without_weak: float | None


def jaccard(set_a: set, set_b: set) -> float:
    union = len(set_a | set_b)
    if union == 0:
        return 0.0
    return len(set_a & set_b) / union


def overlap_fraction(
    cluster_sets: dict[int, set[str]],
    community_sets: dict[int, set[str]],
    threshold: float = JACCARD_THRESHOLD,
) -> tuple[list[OverlapPair], float | None]:
    """Pairs table and the percentage of clusters with a similar community."""
    pairs = [
        OverlapPair(c, m, jaccard(cs, ms))
        for c, cs in sorted(cluster_sets.items())
        for m, ms in sorted(community_sets.items())
    ]
    if not cluster_sets:
        return pairs, None
    similar = {p.cluster_id for p in pairs if p.jaccard > threshold}
    return pairs, 100.0 * len(similar) / len(cluster_sets)


def overlap(
    year: int,
    clusters_strong: dict[int, set[str]],
    clusters_with_weak: dict[int, set[str]],
    community_sets: dict[int, set[str]],
    cohort: set[str],
    threshold: float = JACCARD_THRESHOLD,
) -> OverlapReport:
    communities = {
        m: ms & cohort for m, ms in community_sets.items() if ms & cohort
    }
    pairs, pct_with = overlap_fraction(clusters_with_weak, communities, threshold)
    _, pct_without = overlap_fraction(clusters_strong, communities, threshold)
    return OverlapReport(
        year=year,
        n_clusters=len(clusters_with_weak),
        n_communities=len(communities),
        pairs=pairs,
        overlap_pct_with_weak=pct_with,
        overlap_pct_without_weak=pct_without,
    )


def write_overlap_csv(reports: list[OverlapReport], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(
            ["year", "n_clusters", "n_communities",
             "overlap_pct_with_weak", "overlap_pct_without_weak"]
        )
        for r in sorted(reports, key=lambda r: r.year):
            w.writerow(
                [
                    r.year,
                    r.n_clusters,
                    r.n_communities,
                    "" if r.overlap_pct_with_weak is None else fmt_float(r.overlap_pct_with_weak),
                    "" if r.overlap_pct_without_weak is None else fmt_float(r.overlap_pct_without_weak),
                ]
            )
