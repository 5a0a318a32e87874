"""Density-based cluster validity.

Scores a labeling in [-1, 1] by comparing each cluster's internal density
sparseness (the widest internal edge of its mutual-reachability MST) with
its density separation from the other clusters, weighting per-cluster
verdicts by cluster mass over *all* points, weak members included.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

from .clusterer import WEAK, _prim_mst
from .errors import DegenerateModelError


def _all_points_core_dist(dist_block: np.ndarray, dim: int) -> np.ndarray:
    """Inverse-distance density estimate per point within one cluster."""
    n = dist_block.shape[0]
    with np.errstate(divide="ignore"):
        inv = np.where(dist_block > 0.0, 1.0 / dist_block, np.inf)
    np.fill_diagonal(inv, 0.0)
    s = (inv**dim).sum(axis=1) / (n - 1)
    with np.errstate(divide="ignore", over="ignore"):
        out = s ** (-1.0 / dim)
    out[~np.isfinite(s)] = 0.0  # coincident duplicates: infinite density
    return out


def _sparseness(points: np.ndarray, apts: np.ndarray) -> float:
    """Max internal edge weight of the cluster's mutual-reachability MST;
    falls back to the overall max edge when the MST has no internal edge.

    Mutual reachability produces structurally tied edges (several pairs can
    share a core distance), so the MST edge set is not unique; the tree is
    pinned by Prim's algorithm from point 0 with first-minimum tie-breaks.
    """
    n = points.shape[0]
    d = cdist(points, points)
    mreach = np.maximum(np.maximum(apts[:, None], apts[None, :]), d)
    np.fill_diagonal(mreach, 0.0)
    edges = _prim_mst(mreach)
    if n == 2:
        return float(edges[0, 2])
    degree = np.zeros(n, dtype=np.int64)
    for a, b, _ in edges:
        degree[int(a)] += 1
        degree[int(b)] += 1
    internal = [w for a, b, w in edges if degree[int(a)] > 1 and degree[int(b)] > 1]
    if not internal:
        return float(edges[:, 2].max())
    return float(max(internal))


def dbcv(labels: np.ndarray, X: np.ndarray) -> float:
    """Validity of a hard labeling (WEAK = noise) over matrix X."""
    labels = np.asarray(labels)
    X = np.asarray(X, dtype=np.float64)
    ids = sorted(set(labels.tolist()) - {WEAK})
    if len(ids) < 2:
        raise DegenerateModelError("insufficient clusters for validity")
    dim = X.shape[1]

    members = {k: np.flatnonzero(labels == k) for k in ids}
    for k, idx in members.items():
        if idx.size < 2:
            raise DegenerateModelError(f"cluster {k} has fewer than 2 points")

    apts = {k: _all_points_core_dist(cdist(X[idx], X[idx]), dim) for k, idx in members.items()}
    sparseness = {k: _sparseness(X[members[k]], apts[k]) for k in ids}

    separation = {}
    for i, ki in enumerate(ids):
        best = np.inf
        for kj in ids:
            if kj == ki:
                continue
            d = cdist(X[members[ki]], X[members[kj]])
            m = np.maximum(np.maximum(apts[ki][:, None], apts[kj][None, :]), d)
            best = min(best, float(m.min()))
        separation[ki] = best

    total = labels.shape[0]
    value = 0.0
    for k in ids:
        sep, spa = separation[k], sparseness[k]
        denom = max(sep, spa)
        v = 0.0 if denom == 0.0 else (sep - spa) / denom
        value += (members[k].size / total) * v
    return float(value)


def model_dbcv(model, reduced: np.ndarray) -> float:
    """Validity of a ClusterModel's hard labels; stores the value on the model."""
    if model.n_clusters < 2:
        raise DegenerateModelError("insufficient clusters for validity")
    value = dbcv(model.labels, reduced)
    model.dbcv = value
    return value
