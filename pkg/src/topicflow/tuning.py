"""Seeded random search over the reducer + clusterer pipeline.

Each candidate runs R times with derived seeds; candidates are scored on
five criteria (mean/std of validity, std of cluster count, mean
persistence, and a cluster-count band penalty) collapsed into one scalar.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._util import derived_rng
from .clusterer import cluster
from .dbcv import model_dbcv
from .errors import ConfigError, NumericalError
from .reducer import ReducerConfig, reduce

CLUSTER_BAND = (10.0, 150.0)


@dataclass(frozen=True)
class SearchSpace:
    """Discrete choices sampled uniformly per candidate."""

    n_neighbors: tuple[int, ...] = (15, 30, 50)
    min_dist: tuple[float, ...] = (0.0, 0.1, 0.25)
    target_dims: tuple[int, ...] = (5, 10)
    n_epochs: tuple[int, ...] = (200,)
    min_cluster_size: tuple[int, ...] = (10, 15, 25)
    min_samples: tuple[int, ...] = (5, 10, 15)
    reducer_mode: str = "umap"


@dataclass(frozen=True)
class TuneCriteria:
    mean_dbcv: float
    std_dbcv: float
    mean_n_clusters: float
    std_n_clusters: float
    mean_persistence: float

    def objective(self) -> float:
        return (
            self.mean_dbcv
            - self.std_dbcv
            - self.std_n_clusters
            + self.mean_persistence
            - band_penalty(self.mean_n_clusters)
        )


@dataclass
class Candidate:
    index: int
    reducer: ReducerConfig
    min_cluster_size: int
    min_samples: int
    criteria: TuneCriteria | None = None
    degenerate_runs: int = 0
    runs: list[tuple[float, int, float]] = field(default_factory=list)

    @property
    def is_degenerate(self) -> bool:
        return self.degenerate_runs > 0 or self.criteria is None


def band_penalty(mean_n_clusters: float, band: tuple[float, float] = CLUSTER_BAND) -> float:
    """Relative distance outside the acceptable cluster-count band."""
    lo, hi = band
    if mean_n_clusters < lo:
        return (lo - mean_n_clusters) / lo
    if mean_n_clusters > hi:
        return (mean_n_clusters - hi) / hi
    return 0.0


def _sample_candidate(space: SearchSpace, index: int, rng) -> Candidate:
    reducer = ReducerConfig(
        mode=space.reducer_mode,
        n_neighbors=int(rng.choice(space.n_neighbors)),
        min_dist=float(rng.choice(space.min_dist)),
        target_dims=int(rng.choice(space.target_dims)),
        n_epochs=int(rng.choice(space.n_epochs)),
        seed=0,  # replaced per repeat
    )
    return Candidate(
        index=index,
        reducer=reducer,
        min_cluster_size=int(rng.choice(space.min_cluster_size)),
        min_samples=int(rng.choice(space.min_samples)),
    )


def evaluate_candidate(matrix: np.ndarray, cand: Candidate, repeats: int, seed: int) -> Candidate:
    from dataclasses import replace

    for r in range(repeats):
        run_seed = int(
            np.random.SeedSequence(entropy=seed, spawn_key=(cand.index, r)).generate_state(1)[0]
        )
        reduced = reduce(matrix, replace(cand.reducer, seed=run_seed))
        model = cluster(reduced, cand.min_cluster_size, cand.min_samples, seed=run_seed)
        if model.n_clusters < 2:
            cand.degenerate_runs += 1
            cand.runs.append((float("nan"), model.n_clusters, float("nan")))
            continue
        value = model_dbcv(model, reduced)
        cand.runs.append((value, model.n_clusters, float(model.persistence.mean())))

    if cand.degenerate_runs == 0:
        vals = np.array(cand.runs)
        cand.criteria = TuneCriteria(
            mean_dbcv=float(vals[:, 0].mean()),
            std_dbcv=float(vals[:, 0].std()),
            mean_n_clusters=float(vals[:, 1].mean()),
            std_n_clusters=float(vals[:, 1].std()),
            mean_persistence=float(vals[:, 2].mean()),
        )
    return cand


def tune(
    matrix: np.ndarray,
    space: SearchSpace = SearchSpace(),
    budget: int = 10,
    repeats: int = 2,
    seed: int = 0,
) -> tuple[Candidate, list[Candidate]]:
    """Best candidate plus the full, candidate-index-ordered results table."""
    if budget < 1:
        raise ConfigError("budget must be >= 1")
    if repeats < 2:
        raise ConfigError("repeats must be >= 2")
    rng = derived_rng(seed, 0x70)
    candidates = [_sample_candidate(space, i, rng) for i in range(budget)]
    results = [evaluate_candidate(matrix, c, repeats, seed) for c in candidates]

    viable = [c for c in results if not c.is_degenerate]
    if not viable:
        lines = "; ".join(
            f"candidate {c.index}: {c.degenerate_runs}/{repeats} degenerate runs"
            for c in results
        )
        raise NumericalError(f"all tuning candidates degenerate ({lines})")
    best = max(viable, key=lambda c: (c.criteria.objective(), -c.index))
    return best, results
