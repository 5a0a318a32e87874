"""Time-windowed citation graphs, community detection, betweenness.

Graphs are simple and undirected: one node per window paper that is core
or touches at least one resolvable citation, deduplicated edges, no self
loops.  Communities come from two-phase modularity maximization with a
seeded visit order; centrality is exact dependency accumulation over
breadth-first shortest paths, with every unordered pair counted once and
endpoints excluded.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ._util import derived_rng
from .corpus import CorpusWindow
from .errors import DataError

MODULARITY_GAIN_TOL = 1e-12


@dataclass
class YearGraph:
    t: int
    nodes: list[str]
    edges: list[tuple[int, int]]  # indices into nodes, u < v
    indptr: np.ndarray
    indices: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def index_of(self, paper_id: str) -> int:
        return self._index[paper_id]

    def __post_init__(self):
        self._index = {pid: i for i, pid in enumerate(self.nodes)}

    def degree(self, i: int) -> int:
        return int(self.indptr[i + 1] - self.indptr[i])

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]


def _csr_from_edges(n: int, edges: list[tuple[int, int]]):
    if not edges:
        return np.zeros(n + 1, dtype=np.int64), np.empty(0, dtype=np.int64)
    e = np.asarray(edges, dtype=np.int64)
    src = np.concatenate([e[:, 0], e[:, 1]])
    dst = np.concatenate([e[:, 1], e[:, 0]])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, dst


def graph_from_edge_pairs(t: int, node_ids: list[str], id_pairs) -> YearGraph:
    """Build a simple graph from paper-id pairs; unknown ids are an error."""
    nodes = sorted(set(node_ids))
    index = {pid: i for i, pid in enumerate(nodes)}
    seen: set[tuple[int, int]] = set()
    for a, b in id_pairs:
        if a == b:
            continue
        try:
            i, j = index[a], index[b]
        except KeyError as exc:
            raise DataError(f"edge endpoint {exc.args[0]!r} is not a node") from exc
        seen.add((min(i, j), max(i, j)))
    edges = sorted(seen)
    indptr, indices = _csr_from_edges(len(nodes), edges)
    return YearGraph(t=t, nodes=nodes, edges=edges, indptr=indptr, indices=indices)


def build_graph(window: CorpusWindow) -> YearGraph:
    """Citation graph over a corpus window."""
    pairs = []
    touched: set[str] = set()
    for pid, paper in window.papers.items():
        for ref in paper.references:
            if ref in window.papers and ref != pid:
                pairs.append((pid, ref))
                touched.add(pid)
                touched.add(ref)
    node_ids = {pid for pid, p in window.papers.items() if p.is_core} | touched
    return graph_from_edge_pairs(window.t, sorted(node_ids), pairs)


# ---------------------------------------------------------------------------
# Louvain


@dataclass
class CommunityAssignment:
    communities: dict[str, int]
    modularity: float

    def sets(self) -> dict[int, set[str]]:
        out: dict[int, set[str]] = {}
        for node, comm in self.communities.items():
            out.setdefault(comm, set()).add(node)
        return out


def modularity_of(graph: YearGraph, labels: np.ndarray, resolution: float = 1.0) -> float:
    """Q of a labeling on the original (unweighted, loop-free) graph."""
    m = graph.n_edges
    if m == 0:
        return 0.0
    labels = np.asarray(labels)
    deg = np.diff(graph.indptr).astype(np.float64)
    intra = sum(1.0 for u, v in graph.edges if labels[u] == labels[v])
    tot = np.zeros(int(labels.max()) + 1)
    np.add.at(tot, labels, deg)
    return intra / m - resolution * float(np.sum((tot / (2.0 * m)) ** 2))


def _local_move(adj: list[dict[int, float]], k: np.ndarray, labels: np.ndarray,
                two_m: float, resolution: float, order: np.ndarray) -> bool:
    """One rotation of greedy node moves; returns True if anything moved."""
    comm_tot = np.zeros(len(adj))
    np.add.at(comm_tot, labels, k)
    moved = False
    for u in order:
        cu = labels[u]
        neigh_w: dict[int, float] = {}
        loop_w = 0.0
        for v, w in adj[u].items():
            if v == u:
                loop_w += w
                continue
            neigh_w[labels[v]] = neigh_w.get(labels[v], 0.0) + w
        comm_tot[cu] -= k[u]
        best_c, best_gain = cu, neigh_w.get(cu, 0.0) - resolution * k[u] * comm_tot[cu] / two_m
        for c, w in sorted(neigh_w.items()):
            gain = w - resolution * k[u] * comm_tot[c] / two_m
            if gain > best_gain + MODULARITY_GAIN_TOL:
                best_c, best_gain = c, gain
        comm_tot[best_c] += k[u]
        if best_c != cu:
            labels[u] = best_c
            moved = True
    return moved


def _aggregate(adj: list[dict[int, float]], labels: np.ndarray):
    uniq = np.unique(labels)
    remap = {int(c): i for i, c in enumerate(uniq)}
    new_adj: list[dict[int, float]] = [dict() for _ in uniq]
    for u, nbrs in enumerate(adj):
        cu = remap[int(labels[u])]
        for v, w in nbrs.items():
            cv = remap[int(labels[v])]
            new_adj[cu][cv] = new_adj[cu].get(cv, 0.0) + w
    mapping = np.array([remap[int(c)] for c in labels], dtype=np.int64)
    return new_adj, mapping


def louvain(graph: YearGraph, resolution: float = 1.0, seed: int = 0) -> CommunityAssignment:
    """Two-phase local-move + aggregation; stops when no move improves Q by
    more than 1e-12.  An edgeless graph puts every node in its own community."""
    n = graph.n_nodes
    if n == 0:
        return CommunityAssignment(communities={}, modularity=0.0)
    if graph.n_edges == 0:
        return CommunityAssignment(
            communities={pid: i for i, pid in enumerate(graph.nodes)}, modularity=0.0
        )

    # Weighted adjacency; the self-loop key holds the full both-direction
    # weight, so each supernode's k is just the sum of its dict values.
    adj: list[dict[int, float]] = [dict() for _ in range(n)]
    for u, v in graph.edges:
        adj[u][v] = adj[u].get(v, 0.0) + 1.0
        adj[v][u] = adj[v].get(u, 0.0) + 1.0
    two_m = 2.0 * graph.n_edges
    rng = derived_rng(seed, 0x10)

    level_labels = np.arange(n, dtype=np.int64)  # original node -> supernode
    while True:
        k = np.array([sum(nbrs.values()) for nbrs in adj])
        labels = np.arange(len(adj), dtype=np.int64)
        order = rng.permutation(len(adj))
        improved = False
        while _local_move(adj, k, labels, two_m, resolution, order):
            improved = True
        if not improved:
            break
        prev_size = len(adj)
        adj, mapping = _aggregate(adj, labels)
        level_labels = mapping[labels[level_labels]]
        if len(adj) == prev_size:
            break

    final = level_labels
    q = modularity_of(graph, final, resolution)
    return CommunityAssignment(
        communities={pid: int(final[i]) for i, pid in enumerate(graph.nodes)},
        modularity=q,
    )


# ---------------------------------------------------------------------------
# Betweenness


@dataclass
class CentralityScores:
    values: dict[str, float]
    t: int | None = None

    def __getitem__(self, paper_id: str) -> float:
        return self.values[paper_id]


def _brandes_source(indptr, indices, s: int, n: int, bc: np.ndarray) -> None:
    """Accumulate one source's pair dependencies into bc (level-synchronous)."""
    dist = np.full(n, -1, dtype=np.int64)
    sigma = np.zeros(n, dtype=np.float64)
    dist[s] = 0
    sigma[s] = 1.0
    frontier = np.array([s], dtype=np.int64)
    levels = [frontier]
    while frontier.size:
        starts = indptr[frontier]
        stops = indptr[frontier + 1]
        counts = stops - starts
        if counts.sum() == 0:
            break
        nbr = indices[np.concatenate([np.arange(a, b) for a, b in zip(starts, stops)])]
        src = np.repeat(frontier, counts)
        new_mask = dist[nbr] == -1
        nxt = np.unique(nbr[new_mask])
        dist[nxt] = dist[frontier[0]] + 1
        tree_mask = dist[nbr] == dist[src] + 1
        np.add.at(sigma, nbr[tree_mask], sigma[src[tree_mask]])
        frontier = nxt
        if frontier.size:
            levels.append(frontier)

    delta = np.zeros(n, dtype=np.float64)
    for level in reversed(levels[1:]):
        starts = indptr[level]
        stops = indptr[level + 1]
        counts = stops - starts
        nbr = indices[np.concatenate([np.arange(a, b) for a, b in zip(starts, stops)])]
        src = np.repeat(level, counts)
        pred_mask = dist[nbr] == dist[src] - 1
        w = src[pred_mask]
        v = nbr[pred_mask]
        np.add.at(delta, v, sigma[v] / sigma[w] * (1.0 + delta[w]))
    delta[s] = 0.0
    bc += delta


def betweenness(graph: YearGraph, sample_sources: int | None = None, seed: int = 0) -> CentralityScores:
    """Exact betweenness by default; ``sample_sources`` enables the rescaled
    source-sampling estimate for very large graphs (not used by any test)."""
    n = graph.n_nodes
    bc = np.zeros(n, dtype=np.float64)
    if n and graph.n_edges:
        if sample_sources is not None and sample_sources < n:
            rng = derived_rng(seed, 0xB0)
            sources = np.sort(rng.choice(n, size=sample_sources, replace=False))
            scale = n / float(sample_sources)
        else:
            sources = range(n)
            scale = 1.0
        for s in sources:
            _brandes_source(graph.indptr, graph.indices, int(s), n, bc)
        bc *= scale / 2.0  # undirected: each unordered pair was seen twice
    return CentralityScores(values={pid: float(bc[i]) for i, pid in enumerate(graph.nodes)}, t=graph.t)


# ---------------------------------------------------------------------------
# Serialization


def write_edge_list(graph: YearGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for u, v in sorted((graph.nodes[a], graph.nodes[b]) for a, b in graph.edges):
            fh.write(f"{u},{v}\n")


def read_edge_list(path, t: int = 0) -> YearGraph:
    pairs = []
    nodes = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            u, v = line.split(",")
            pairs.append((u, v))
            nodes.update((u, v))
    return graph_from_edge_pairs(t, sorted(nodes), pairs)


def write_communities_csv(assignment: CommunityAssignment, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", "community"])
        for node in sorted(assignment.communities):
            w.writerow([node, assignment.communities[node]])


def write_centrality_csv(scores: CentralityScores, path) -> None:
    from ._util import fmt_float

    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", "betweenness"])
        for node in sorted(scores.values):
            w.writerow([node, fmt_float(scores.values[node])])
