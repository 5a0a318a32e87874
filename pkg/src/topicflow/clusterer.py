"""Hierarchical density clustering with soft membership.

The pipeline: pairwise mutual-reachability distances (core distance = the
``min_samples``-th nearest neighbor), a minimum spanning tree, the
single-linkage hierarchy, a condensed tree at ``min_cluster_size``, and
excess-of-mass cluster extraction.  Points the hierarchy cannot place
confidently are *weak members* (label ``WEAK``); their outlier score feeds
the weak-member probability mass of every soft membership row.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DataError, DegenerateModelError

log = logging.getLogger(__name__)

WEAK = -1
EPSILON = 1e-12
MAX_WEAK_MASS = 0.99
DEMOTION_OUTLIER_SCORE = 0.9


@dataclass
class ClusterModel:
    """Per-year clustering artifact: hard labels, hierarchy summaries, and
    (once computed) soft memberships, weak assignments and validity."""

    labels: np.ndarray
    n_clusters: int
    persistence: np.ndarray
    exemplars: list[np.ndarray]
    outlier_scores: np.ndarray
    min_cluster_size: int
    min_samples: int
    membership: np.ndarray | None = None
    weak_mass: np.ndarray | None = None
    dbcv: float | None = None
    strong_centroids: np.ndarray | None = None
    weak_assignments: np.ndarray | None = field(default=None)

    @property
    def n_points(self) -> int:
        return self.labels.shape[0]

    @property
    def is_degenerate(self) -> bool:
        return self.n_clusters == 0

    def strong_members(self, cluster: int) -> np.ndarray:
        return np.flatnonzero(self.labels == cluster)

    def weak_members(self, cluster: int) -> np.ndarray:
        if self.weak_assignments is None:
            return np.empty(0, dtype=np.int64)
        return np.flatnonzero((self.labels == WEAK) & (self.weak_assignments == cluster))

    def check_membership_consistency(self) -> bool:
        """Strong members' soft argmax must agree with their hard label."""
        if self.membership is None or self.is_degenerate:
            return True
        strong = self.labels != WEAK
        return bool(
            np.all(np.argmax(self.membership[strong], axis=1) == self.labels[strong])
        )


def pairwise_distances(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    sq = np.sum(X * X, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.fill_diagonal(d2, 0.0)
    return np.sqrt(np.maximum(d2, 0.0))


def core_distances(dist: np.ndarray, min_samples: int) -> np.ndarray:
    """Distance to the min_samples-th nearest *other* point."""
    n = dist.shape[0]
    k = min(min_samples, n - 1)
    return np.partition(dist, k, axis=1)[:, k]


def mutual_reachability(dist: np.ndarray, core: np.ndarray) -> np.ndarray:
    m = np.maximum(np.maximum(core[:, None], core[None, :]), dist)
    np.fill_diagonal(m, 0.0)
    return m


def _prim_mst(weights: np.ndarray) -> np.ndarray:
    """Rows (a, b, w) of the MST of a dense symmetric weight matrix."""
    n = weights.shape[0]
    in_tree = np.zeros(n, dtype=bool)
    best = weights[0].copy()
    source = np.zeros(n, dtype=np.int64)
    in_tree[0] = True
    best[0] = np.inf
    edges = np.empty((n - 1, 3), dtype=np.float64)
    for i in range(n - 1):
        j = int(np.argmin(best))
        edges[i] = (source[j], j, best[j])
        in_tree[j] = True
        closer = weights[j] < best
        closer &= ~in_tree
        best = np.where(closer, weights[j], best)
        source = np.where(closer, j, source)
        best[j] = np.inf
    return edges


def _single_linkage(edges: np.ndarray, n: int) -> np.ndarray:
    """Union-find pass turning sorted MST edges into merge rows
    (left, right, dist, size) with new node ids n, n+1, ..."""
    order = np.argsort(edges[:, 2], kind="stable")
    parent = np.arange(2 * n - 1, dtype=np.int64)
    size = np.ones(2 * n - 1, dtype=np.int64)

    def find(x: int) -> int:
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    rows = np.empty((n - 1, 4), dtype=np.float64)
    nxt = n
    for i, e in enumerate(order):
        a, b, w = edges[e]
        ra, rb = find(int(a)), find(int(b))
        rows[i] = (ra, rb, w, size[ra] + size[rb])
        parent[ra] = parent[rb] = nxt
        size[nxt] = size[ra] + size[rb]
        nxt += 1
    return rows


def _leaves_under(hierarchy: np.ndarray, node: int, n: int) -> list[int]:
    out: list[int] = []
    stack = [node]
    while stack:
        cur = stack.pop()
        if cur < n:
            out.append(cur)
        else:
            row = hierarchy[cur - n]
            stack.extend((int(row[0]), int(row[1])))
    return out


def _condense_tree(hierarchy: np.ndarray, n: int, min_cluster_size: int) -> np.ndarray:
    """Rows (parent, child, lambda, size); condensed cluster ids start at n
    with the root cluster = n."""
    root = 2 * n - 2
    relabel = np.full(2 * n - 1, -1, dtype=np.int64)
    relabel[root] = n
    next_label = n + 1
    rows: list[tuple[int, int, float, int]] = []

    def count(c: int) -> int:
        return 1 if c < n else int(hierarchy[c - n][3])

    # Walk from the root; subtrees that dissolve into points are not queued.
    queue = [root]
    head = 0
    while head < len(queue):
        node = queue[head]
        head += 1
        if node < n:
            continue
        left, right, dist, _ = hierarchy[node - n]
        left, right = int(left), int(right)
        lam = 1.0 / dist if dist > 0.0 else np.inf
        lc, rc = count(left), count(right)

        if lc >= min_cluster_size and rc >= min_cluster_size:
            for child in (left, right):
                relabel[child] = next_label
                rows.append((relabel[node], next_label, lam, count(child)))
                next_label += 1
            queue.extend((left, right))
        elif lc < min_cluster_size and rc < min_cluster_size:
            for child in (left, right):
                for p in _leaves_under(hierarchy, child, n):
                    rows.append((relabel[node], p, lam, 1))
        else:
            small, big = (left, right) if lc < min_cluster_size else (right, left)
            relabel[big] = relabel[node]
            for p in _leaves_under(hierarchy, small, n):
                rows.append((relabel[node], p, lam, 1))
            queue.append(big)

    return np.array(rows, dtype=np.float64) if rows else np.empty((0, 4))


def _stability(condensed: np.ndarray, n: int) -> dict[int, float]:
    parents = condensed[:, 0].astype(np.int64)
    children = condensed[:, 1].astype(np.int64)
    lams = condensed[:, 2]
    sizes = condensed[:, 3]
    births: dict[int, float] = {int(c): float(l) for c, l in zip(children, lams) if c >= n}
    births.setdefault(n, 0.0)
    stab: dict[int, float] = {c: 0.0 for c in set(parents.tolist())}
    for p, l, s in zip(parents, lams, sizes):
        contrib = (l - births[int(p)]) * s
        if np.isnan(contrib):  # inf - inf when duplicates collapse a branch
            contrib = 0.0
        stab[int(p)] += float(contrib)
    return stab


def _eom_select(condensed: np.ndarray, stability: dict[int, float], n: int) -> list[int]:
    cluster_rows = condensed[condensed[:, 1] >= n]
    children_of: dict[int, list[int]] = {}
    for p, c in cluster_rows[:, :2].astype(np.int64):
        children_of.setdefault(int(p), []).append(int(c))

    is_cluster = {c: True for c in stability if c != n}
    score = dict(stability)
    for node in sorted(is_cluster, reverse=True):  # leaves before parents
        kids = children_of.get(node, [])
        subtree = sum(score.get(k, 0.0) for k in kids)
        if subtree > score[node]:
            is_cluster[node] = False
            score[node] = subtree
        else:
            stack = list(kids)
            while stack:
                k = stack.pop()
                if k in is_cluster:
                    is_cluster[k] = False
                stack.extend(children_of.get(k, []))
    return sorted(c for c, flag in is_cluster.items() if flag)


def _label_points(condensed: np.ndarray, selected: list[int], n: int) -> np.ndarray:
    selected_set = set(selected)
    max_id = int(condensed[:, 1].max(initial=n))
    max_id = max(max_id, int(condensed[:, 0].max(initial=n)))
    uf = np.arange(max_id + 1, dtype=np.int64)

    def find(x: int) -> int:
        root = x
        while uf[root] != root:
            root = uf[root]
        while uf[x] != root:
            uf[x], x = root, uf[x]
        return root

    for p, c in condensed[:, :2].astype(np.int64):
        if int(c) not in selected_set:
            uf[find(int(c))] = find(int(p))

    cluster_index = {c: i for i, c in enumerate(selected)}
    labels = np.full(n, WEAK, dtype=np.int64)
    for point in range(n):
        root = find(point)
        labels[point] = cluster_index.get(root, WEAK)
    return labels


def _subtree_deaths(condensed: np.ndarray, n: int) -> dict[int, float]:
    """Max point-departure lambda within each cluster's subtree."""
    parents = condensed[:, 0].astype(np.int64)
    children = condensed[:, 1].astype(np.int64)
    lams = condensed[:, 2]
    deaths: dict[int, float] = {}
    for p, c, l in zip(parents, children, lams):
        if c < n:
            deaths[int(p)] = max(deaths.get(int(p), 0.0), float(l))
    # propagate upward: child clusters feed their parents (children have
    # larger ids, so reverse id order visits leaves first)
    cluster_parent = {int(c): int(p) for p, c in zip(parents, children) if c >= n}
    for c in sorted(cluster_parent, reverse=True):
        p = cluster_parent[c]
        deaths[p] = max(deaths.get(p, 0.0), deaths.get(c, 0.0))
    return deaths


def _glosh(condensed: np.ndarray, deaths: dict[int, float], n: int) -> np.ndarray:
    scores = np.zeros(n, dtype=np.float64)
    for p, c, l in condensed[:, :3]:
        c = int(c)
        if c >= n:
            continue
        death = deaths.get(int(p), 0.0)
        if death <= 0.0:
            scores[c] = 0.0
        elif not np.isfinite(death):
            scores[c] = 0.0 if not np.isfinite(l) else 1.0
        else:
            scores[c] = max(0.0, (death - l) / death)
    return scores


def _exemplars(condensed: np.ndarray, selected: list[int], n: int) -> list[np.ndarray]:
    parents = condensed[:, 0].astype(np.int64)
    children = condensed[:, 1].astype(np.int64)
    lams = condensed[:, 2]
    children_of: dict[int, list[int]] = {}
    for p, c in zip(parents, children):
        if c >= n:
            children_of.setdefault(int(p), []).append(int(c))

    out = []
    for cluster in selected:
        # leaf clusters inside this cluster's subtree
        leaves = []
        stack = [cluster]
        while stack:
            cur = stack.pop()
            kids = children_of.get(cur, [])
            if kids:
                stack.extend(kids)
            else:
                leaves.append(cur)
        points: list[int] = []
        for leaf in leaves:
            mask = (parents == leaf) & (children < n)
            if not mask.any():
                continue
            lam_max = lams[mask].max()
            points.extend(children[mask & (lams == lam_max)].tolist())
        out.append(np.array(sorted(points), dtype=np.int64))
    return out


def _degenerate(n: int, min_cluster_size: int, min_samples: int) -> ClusterModel:
    return ClusterModel(
        labels=np.full(n, WEAK, dtype=np.int64),
        n_clusters=0,
        persistence=np.empty(0),
        exemplars=[],
        outlier_scores=np.ones(n),
        min_cluster_size=min_cluster_size,
        min_samples=min_samples,
    )


def cluster(
    reduced: np.ndarray,
    min_cluster_size: int = 15,
    min_samples: int = 15,
    seed: int = 0,
) -> ClusterModel:
    """Cluster a reduced matrix; points the hierarchy cannot commit to are
    labeled WEAK.  ``seed`` is recorded for provenance only: the procedure
    is deterministic."""
    X = np.asarray(reduced, dtype=np.float64)
    if X.ndim != 2:
        raise DataError(f"expected 2-D matrix, got shape {X.shape}")
    if min_cluster_size < 2 or min_samples < 1:
        raise DataError("min_cluster_size must be >= 2 and min_samples >= 1")
    n = X.shape[0]
    if n < min_cluster_size:
        return _degenerate(n, min_cluster_size, min_samples)

    dist = pairwise_distances(X)
    core = core_distances(dist, min_samples)
    mreach = mutual_reachability(dist, core)
    mst = _prim_mst(mreach)
    hierarchy = _single_linkage(mst, n)
    condensed = _condense_tree(hierarchy, n, min_cluster_size)
    if condensed.shape[0] == 0:
        return _degenerate(n, min_cluster_size, min_samples)
    stability = _stability(condensed, n)
    selected = _eom_select(condensed, stability, n)
    if not selected:
        return _degenerate(n, min_cluster_size, min_samples)

    labels = _label_points(condensed, selected, n)
    deaths = _subtree_deaths(condensed, n)
    births: dict[int, float] = {
        int(c): float(l)
        for c, l in zip(condensed[:, 1].astype(np.int64), condensed[:, 2])
        if c >= n
    }
    births.setdefault(n, 0.0)
    persistence = np.empty(len(selected))
    for i, c in enumerate(selected):
        death = deaths.get(c, 0.0)
        birth = births.get(c, 0.0)
        if not np.isfinite(death):
            persistence[i] = 1.0
        elif death <= 0.0:
            persistence[i] = 0.0
        else:
            persistence[i] = max(0.0, 1.0 - birth / death)

    return ClusterModel(
        labels=labels,
        n_clusters=len(selected),
        persistence=persistence,
        exemplars=_exemplars(condensed, selected, n),
        outlier_scores=_glosh(condensed, deaths, n),
        min_cluster_size=min_cluster_size,
        min_samples=min_samples,
    )


def soft_membership(model: ClusterModel, reduced: np.ndarray) -> np.ndarray:
    """Per-point distribution over clusters plus the weak-member mass.

    The weak mass is the outlier score clipped to [0, 0.99]; the remaining
    mass splits across clusters proportionally to inverse distance to each
    cluster's nearest exemplar; exact zero-distance ties split uniformly.
    Stores (membership, weak_mass) on the model and returns the (n, N)
    cluster block.

    A strong member is demoted to WEAK when the views of confidence
    disagree with its hierarchy label: its metric argmax points at a
    different cluster, or its weak mass is extreme (above 0.9) while also
    dominating every cluster share.  Hard labels therefore stay consistent
    with membership, and near-total outliers never count as confident
    members.
    """
    if model.is_degenerate:
        raise DegenerateModelError("cannot compute membership for a degenerate model")
    X = np.asarray(reduced, dtype=np.float64)
    n, N = X.shape[0], model.n_clusters
    if n != model.n_points:
        raise DataError("matrix rows do not match the model's point count")

    p_wm = np.clip(model.outlier_scores, 0.0, MAX_WEAK_MASS)
    d = np.empty((n, N), dtype=np.float64)
    for k in range(N):
        ex = model.exemplars[k]
        d[:, k] = cdist(X, X[ex]).min(axis=1)

    membership = np.zeros((n, N), dtype=np.float64)
    zero = d <= 0.0
    any_zero = zero.any(axis=1)
    if any_zero.any():
        rowz = zero[any_zero]
        membership[any_zero] = rowz / rowz.sum(axis=1, keepdims=True)
    rest = ~any_zero
    if rest.any():
        w = 1.0 / (d[rest] + EPSILON)
        membership[rest] = w / w.sum(axis=1, keepdims=True)
    membership *= (1.0 - p_wm)[:, None]

    strong = model.labels != WEAK
    conflicted = strong & (
        (np.argmax(membership, axis=1) != model.labels)
        | ((p_wm > DEMOTION_OUTLIER_SCORE) & (p_wm > membership.max(axis=1)))
    )
    if conflicted.any():
        log.info("demoting %d fringe member(s) with conflicting hierarchy and "
                 "metric membership", int(conflicted.sum()))
        model.labels = model.labels.copy()
        model.labels[conflicted] = WEAK

    model.membership = membership
    model.weak_mass = p_wm
    return membership


def assign_weak(model: ClusterModel, full_embeddings: np.ndarray) -> np.ndarray:
    """Map each weak member to the cluster whose strong-member centroid is
    most cosine-similar; ties break to the lowest cluster id.  Also computes
    and stores the strong centroids (full embedding space)."""
    E = np.asarray(full_embeddings, dtype=np.float64)
    if E.shape[0] != model.n_points:
        raise DataError("embedding rows do not match the model's point count")
    assignments = np.full(model.n_points, WEAK, dtype=np.int64)
    if model.is_degenerate:
        model.weak_assignments = assignments
        return assignments

    centroids = np.stack(
        [E[model.strong_members(k)].mean(axis=0) for k in range(model.n_clusters)]
    )
    model.strong_centroids = centroids
    weak = np.flatnonzero(model.labels == WEAK)
    if weak.size:
        pts = E[weak]
        num = pts @ centroids.T
        denom = np.linalg.norm(pts, axis=1)[:, None] * np.linalg.norm(centroids, axis=1)[None, :]
        with np.errstate(invalid="ignore", divide="ignore"):
            cos = np.where(denom > 0.0, num / denom, -np.inf)
        assignments[weak] = np.argmax(cos, axis=1)  # argmax takes the lowest index on ties
    strong = model.labels != WEAK
    assignments[strong] = model.labels[strong]
    model.weak_assignments = assignments
    return assignments


def model_to_json(model: ClusterModel) -> str:
    doc = {
        "n_clusters": model.n_clusters,
        "min_cluster_size": model.min_cluster_size,
        "min_samples": model.min_samples,
        "labels": model.labels.tolist(),
        "persistence": model.persistence.tolist(),
        "exemplars": [e.tolist() for e in model.exemplars],
        "outlier_scores": model.outlier_scores.tolist(),
        "membership": None if model.membership is None else model.membership.tolist(),
        "weak_mass": None if model.weak_mass is None else model.weak_mass.tolist(),
        "dbcv": model.dbcv,
        "strong_centroids": None
        if model.strong_centroids is None
        else model.strong_centroids.tolist(),
        "weak_assignments": None
        if model.weak_assignments is None
        else model.weak_assignments.tolist(),
    }
    return json.dumps(doc, sort_keys=True)


def model_from_json(text: str) -> ClusterModel:
    doc = json.loads(text)
    model = ClusterModel(
        labels=np.array(doc["labels"], dtype=np.int64),
        n_clusters=int(doc["n_clusters"]),
        persistence=np.array(doc["persistence"], dtype=np.float64),
        exemplars=[np.array(e, dtype=np.int64) for e in doc["exemplars"]],
        outlier_scores=np.array(doc["outlier_scores"], dtype=np.float64),
        min_cluster_size=int(doc["min_cluster_size"]),
        min_samples=int(doc["min_samples"]),
        dbcv=doc.get("dbcv"),
    )
    if doc.get("membership") is not None:
        model.membership = np.array(doc["membership"], dtype=np.float64)
    if doc.get("weak_mass") is not None:
        model.weak_mass = np.array(doc["weak_mass"], dtype=np.float64)
    if doc.get("strong_centroids") is not None:
        model.strong_centroids = np.array(doc["strong_centroids"], dtype=np.float64)
    if doc.get("weak_assignments") is not None:
        model.weak_assignments = np.array(doc["weak_assignments"], dtype=np.int64)
    return model
