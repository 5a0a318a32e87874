"""Year-over-year cluster tracking.

Clusters are represented by the element-wise mean of their strong members'
full-dimensional embeddings; consecutive years are compared by pairwise
cosine similarity, links above the threshold (default 0.95, many-to-many)
drive the event taxonomy:

* birth: a cluster at t+1 with no inbound link,
* death: a cluster at t with no outbound link,
* merge: a cluster at t+1 with two or more inbound links,
* split: a cluster at t with two or more outbound links,
* continuation: an exactly one-to-one link.

Events combine freely; for prediction each year-t cluster collapses to one
group: dynamic (touches any split or merge) or stable (continuation or
death).  Births have no history and stay out of the target set.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ._util import fmt_float
from .errors import DataError

LINK_THRESHOLD = 0.95
ZERO_NORM_TOL = 1e-9


class EventKind(Enum):
    BIRTH = "birth"
    DEATH = "death"
    MERGE = "merge"
    SPLIT = "split"
    CONTINUATION = "continuation"


class EventGroup(Enum):
    DYNAMIC = "dynamic"
    STABLE = "stable"
    EXCLUDED = "excluded"


GROUP_OF_KIND = {
    EventKind.MERGE: EventGroup.DYNAMIC,
    EventKind.SPLIT: EventGroup.DYNAMIC,
    EventKind.CONTINUATION: EventGroup.STABLE,
    EventKind.DEATH: EventGroup.STABLE,
    EventKind.BIRTH: EventGroup.EXCLUDED,
}


@dataclass(frozen=True)
class EventLink:
    year_from: int
    year_to: int
    cluster_from: int
    cluster_to: int
    cosine: float  # recorded even below threshold, for diagnostics


@dataclass(frozen=True)
class ClusterEvent:
    year: int
    cluster_id: int
    kind: EventKind
    group: EventGroup


@dataclass
class YearTransition:
    year_from: int
    year_to: int
    links: list[EventLink]
    events: list[ClusterEvent]
    link_roles: dict[tuple[int, int], frozenset[EventKind]]
    groups_from: dict[int, EventGroup]  # one group per year_from cluster


def centroid(member_rows: np.ndarray, embeddings: np.ndarray) -> np.ndarray:
    """Element-wise mean of the members' embeddings."""
    member_rows = np.asarray(member_rows)
    if member_rows.size == 0:
        raise DataError("cannot take the centroid of an empty cluster")
    vec = np.asarray(embeddings, dtype=np.float64)[member_rows].mean(axis=0)
    if np.linalg.norm(vec) < ZERO_NORM_TOL:
        warnings.warn("cluster centroid has near-zero norm", stacklevel=2)
    return vec


def cluster_centroids(model, embeddings: np.ndarray) -> dict[int, np.ndarray]:
    return {
        k: centroid(model.strong_members(k), embeddings) for k in range(model.n_clusters)
    }


def link_years(
    centroids_t: dict[int, np.ndarray],
    centroids_t1: dict[int, np.ndarray],
    year_from: int,
    year_to: int,
) -> list[EventLink]:
    """All pairwise cosines between consecutive years' cluster centroids;
    zero-norm centroids make that pair's cosine undefined and are skipped."""
    links = []
    for a in sorted(centroids_t):
        va = centroids_t[a]
        na = np.linalg.norm(va)
        for b in sorted(centroids_t1):
            vb = centroids_t1[b]
            nb = np.linalg.norm(vb)
            if na < ZERO_NORM_TOL or nb < ZERO_NORM_TOL:
                warnings.warn(
                    f"skipping cosine for clusters ({a}->{b}): zero-norm centroid",
                    stacklevel=2,
                )
                continue
            links.append(
                EventLink(year_from, year_to, a, b, float(np.dot(va, vb) / (na * nb)))
            )
    return links


def active_links(links: list[EventLink], threshold: float = LINK_THRESHOLD) -> list[EventLink]:
    return [l for l in links if l.cosine > threshold]


def classify(
    links: list[EventLink],
    clusters_t: list[int],
    clusters_t1: list[int],
    threshold: float = LINK_THRESHOLD,
    year_from: int | None = None,
    year_to: int | None = None,
) -> YearTransition:
    """Event taxonomy over one year pair; only links with cosine above the
    threshold participate."""
    if links:
        year_from = links[0].year_from if year_from is None else year_from
        year_to = links[0].year_to if year_to is None else year_to
    year_from = 0 if year_from is None else year_from
    year_to = year_from + 1 if year_to is None else year_to

    act = active_links(links, threshold)
    out_of: dict[int, list[int]] = {c: [] for c in clusters_t}
    in_of: dict[int, list[int]] = {c: [] for c in clusters_t1}
    for l in act:
        out_of.setdefault(l.cluster_from, []).append(l.cluster_to)
        in_of.setdefault(l.cluster_to, []).append(l.cluster_from)

    link_roles: dict[tuple[int, int], frozenset[EventKind]] = {}
    for l in act:
        roles = set()
        if len(out_of[l.cluster_from]) >= 2:
            roles.add(EventKind.SPLIT)
        if len(in_of[l.cluster_to]) >= 2:
            roles.add(EventKind.MERGE)
        if not roles:
            roles.add(EventKind.CONTINUATION)
        link_roles[(l.cluster_from, l.cluster_to)] = frozenset(roles)

    events: list[ClusterEvent] = []
    groups_from: dict[int, EventGroup] = {}
    for c in sorted(clusters_t):
        children = out_of.get(c, [])
        split_involved = len(children) >= 2
        merge_involved = any(len(in_of[ch]) >= 2 for ch in children)
        if split_involved:
            events.append(ClusterEvent(year_from, c, EventKind.SPLIT, EventGroup.DYNAMIC))
        if merge_involved:
            events.append(ClusterEvent(year_from, c, EventKind.MERGE, EventGroup.DYNAMIC))
        if split_involved or merge_involved:
            groups_from[c] = EventGroup.DYNAMIC
        elif not children:
            events.append(ClusterEvent(year_from, c, EventKind.DEATH, EventGroup.STABLE))
            groups_from[c] = EventGroup.STABLE
        else:
            events.append(
                ClusterEvent(year_from, c, EventKind.CONTINUATION, EventGroup.STABLE)
            )
            groups_from[c] = EventGroup.STABLE

    for c in sorted(clusters_t1):
        if not in_of.get(c):
            events.append(ClusterEvent(year_to, c, EventKind.BIRTH, EventGroup.EXCLUDED))

    return YearTransition(
        year_from=year_from,
        year_to=year_to,
        links=list(links),
        events=events,
        link_roles=link_roles,
        groups_from=groups_from,
    )


def write_events_csv(transitions: list[YearTransition], path) -> None:
    """Link-level rows; death and birth rows leave the absent side empty."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["year_from", "year_to", "cluster_from", "cluster_to", "cosine", "event_type"])
        for tr in transitions:
            for l in sorted(tr.link_roles, key=lambda p: (p[0], p[1])):
                roles = "+".join(sorted(k.value for k in tr.link_roles[l]))
                link = next(
                    x for x in tr.links if (x.cluster_from, x.cluster_to) == l
                )
                w.writerow([tr.year_from, tr.year_to, l[0], l[1], fmt_float(link.cosine), roles])
            for ev in tr.events:
                if ev.kind is EventKind.DEATH:
                    w.writerow([tr.year_from, tr.year_to, ev.cluster_id, "", "", "death"])
                elif ev.kind is EventKind.BIRTH:
                    w.writerow([tr.year_from, tr.year_to, "", ev.cluster_id, "", "birth"])
