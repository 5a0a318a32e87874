"""Random forest of CART trees for the binary event target.

100 trees by default, bootstrap resampling, ceil(sqrt(d)) features tried
per node, unlimited depth, minimum split of 2.  Feature importances are
normalized total Gini impurity decrease.  Every random draw derives from
the master seed, so refits are byte-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._util import derived_rng
from .errors import DataError

N_TREES = 100
MIN_SPLIT = 2


@dataclass
class _Node:
    feature: int = -1
    threshold: float = 0.0
    left: "_Node | None" = None
    right: "_Node | None" = None
    vote: int = 0
    prob: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.left is None


@dataclass
class Tree:
    root: _Node
    importances: np.ndarray


@dataclass
class ForestFit:
    trees: list[Tree]
    importances: np.ndarray
    feature_names: list[str]
    seed: int
    n_features: int = field(init=False)

    def __post_init__(self):
        self.n_features = self.importances.shape[0]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        votes = np.zeros(X.shape[0])
        for tree in self.trees:
            votes += _predict_tree(tree.root, X)
        return votes / len(self.trees)

    def predict(self, X: np.ndarray) -> np.ndarray:
        # majority vote; exact ties go to class 0
        return (self.predict_proba(X) > 0.5).astype(np.int64)

    def importance_table(self) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.feature_names, self.importances)}


def _gini(counts: np.ndarray) -> float:
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return 1.0 - float(np.sum(p * p))


def _best_split(X, y, rows, features):
    """(feature, threshold, gain, left_rows, right_rows) or None."""
    n = rows.size
    parent_counts = np.bincount(y[rows], minlength=2)
    parent_gini = _gini(parent_counts)
    best = None
    best_gain = 1e-12  # require a strictly positive decrease
    for f in features:
        vals = X[rows, f]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        sy = y[rows][order]
        ones = np.cumsum(sy)
        idx = np.flatnonzero(sv[1:] > sv[:-1])  # split between distinct values
        if idx.size == 0:
            continue
        n_left = idx + 1
        left_ones = ones[idx]
        left_counts = np.stack([n_left - left_ones, left_ones], axis=1)
        right_counts = parent_counts[None, :] - left_counts
        gl = 1.0 - ((left_counts / n_left[:, None]) ** 2).sum(axis=1)
        n_right = n - n_left
        gr = 1.0 - ((right_counts / n_right[:, None]) ** 2).sum(axis=1)
        gain = parent_gini - (n_left * gl + n_right * gr) / n
        j = int(np.argmax(gain))
        if gain[j] > best_gain:
            thr = (sv[idx[j]] + sv[idx[j] + 1]) / 2.0
            best_gain = float(gain[j])
            best = (f, thr, best_gain, rows[order[: idx[j] + 1]], rows[order[idx[j] + 1:]])
    return best


def _grow(X, y, rows, rng, max_features, importances, n_total):
    node = _Node()
    counts = np.bincount(y[rows], minlength=2)
    node.vote = 0 if counts[0] >= counts[1] else 1  # ties to class 0
    node.prob = counts[1] / rows.size
    if rows.size < MIN_SPLIT or counts[0] == 0 or counts[1] == 0:
        return node
    features = rng.choice(X.shape[1], size=max_features, replace=False)
    split = _best_split(X, y, rows, sorted(features.tolist()))
    if split is None:
        return node
    f, thr, gain, left_rows, right_rows = split
    importances[f] += (rows.size / n_total) * gain
    node.feature = f
    node.threshold = thr
    node.left = _grow(X, y, left_rows, rng, max_features, importances, n_total)
    node.right = _grow(X, y, right_rows, rng, max_features, importances, n_total)
    return node


def _predict_tree(root: _Node, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0], dtype=np.float64)
    for i, x in enumerate(X):
        node = root
        while not node.is_leaf:
            node = node.left if x[node.feature] <= node.threshold else node.right
        out[i] = node.vote
    return out


def fit_forest(
    X: np.ndarray,
    y: np.ndarray,
    seed: int = 0,
    n_trees: int = N_TREES,
    feature_names: list[str] | None = None,
) -> ForestFit:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("training matrix must be nonempty and 2-D")
    if X.shape[0] != y.shape[0]:
        raise DataError("X and y row counts differ")
    n, d = X.shape
    names = list(feature_names) if feature_names else [f"x{i}" for i in range(d)]
    max_features = math.ceil(math.sqrt(d))

    trees = []
    total_importance = np.zeros(d)
    for t in range(n_trees):
        rng = derived_rng(seed, 0xF0, t)
        rows = rng.integers(0, n, size=n)  # bootstrap
        importances = np.zeros(d)
        root = _grow(X, y, rows, rng, max_features, importances, rows.size)
        trees.append(Tree(root=root, importances=importances))
        total_importance += importances

    s = total_importance.sum()
    if s > 0:
        total_importance = total_importance / s
    return ForestFit(trees=trees, importances=total_importance, feature_names=names, seed=seed)
