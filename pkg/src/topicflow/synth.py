"""Synthetic planted-truth corpora.

A timeline is a set of blob threads on the unit sphere: each blob is a
tight Gaussian cloud of papers, events (continuation, split, merge, death,
birth) are planted by constructing blob centers whose pairwise cosines sit
on the correct side of the event-link threshold with margin.  Generation
fails fast if a requested event geometry cannot satisfy the detector's
threshold.  Citations follow a planted-partition model over blob threads,
with optional bridge papers wired across blocks.

Blobs scheduled for a dynamic transition can carry weak satellites
(isolated points near the blob) and a cross-citation boost, giving the
prediction stage a learnable signal, mirroring the mechanism under study.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._util import derived_rng
from .corpus import Corpus, PaperRecord
from .embfile import EmbeddingMatrix
from .errors import DataError

LINK_HI = 0.96  # planted links must reach this center cosine
LINK_LO = 0.93  # everything else must stay below this
SPLIT_OFFSET = 0.24  # unit-sphere offset giving ~0.972 parent cosine
DEFAULT_SIGMA = 0.003
# Weak satellites form one off-sphere cloud per blob-year: the parent
# cosine (0.35) beats every other anchor so weak assignment recovers the
# parent, while the enlarged radius puts the cloud farther from its parent
# (Euclidean) than blobs are from each other, so the density clusterer
# sheds it as noise rather than absorbing a fringe.  A cloud must hold at
# least the reducer's n_neighbors points (self-contained neighborhoods)
# and fewer than min_cluster_size (never a cluster of its own).
SATELLITE_COS = 0.35
SATELLITE_RADIUS = 1.8

KINDS = ("continuation", "split", "merge", "death", "birth")

_WORD_BANK = """
market liquidity hedging capital income asset credit pricing
network community centrality clustering topology resilience diffusion cascade
neural embedding transformer attention gradient encoder token corpus
policy welfare taxation subsidy reform governance election turnout
protein folding receptor binding enzyme pathway kinase membrane
quantum entanglement qubit coherence photon lattice spin annealing
climate carbon emission glacier drought monsoon albedo biosphere
memory cognition attention perception priming recall bias salience
""".split()


@dataclass(frozen=True)
class PlantedEvent:
    year: int  # transition starts at this year (t -> t+1)
    kind: str
    parents: tuple[str, ...] = ()
    children: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"unknown planted kind {self.kind!r}")
        object.__setattr__(self, "parents", tuple(self.parents))
        object.__setattr__(self, "children", tuple(self.children))


@dataclass(frozen=True)
class BlobYear:
    blob_id: str
    year: int
    count: int
    sigma: float = DEFAULT_SIGMA
    weak_satellites: int = 0
    cross_boost: float = 1.0


@dataclass(frozen=True)
class TimelineSpec:
    years: tuple[int, ...]
    blobs: tuple[BlobYear, ...]
    events: tuple[PlantedEvent, ...]
    p_in: float = 0.25
    p_out: float = 0.004
    bridges: int = 0
    seed: int = 0
    dim: int = 768


@dataclass
class SynthTimeline:
    spec: TimelineSpec
    corpus: Corpus
    embeddings: EmbeddingMatrix
    blob_of: dict[str, str]  # paper id -> blob id
    satellite: dict[str, bool]
    centers: dict[str, np.ndarray]
    members: dict[tuple[int, str], list[str]]  # (year, blob) -> core paper ids
    truth_groups: dict[tuple[int, str], str]  # (year, blob) -> dynamic|stable
    planted_links: set[tuple[str, str]]  # (parent blob, child blob)
    bridge_papers: list[str] = field(default_factory=list)
    edges: list[tuple[str, str]] = field(default_factory=list)


def planted_links(events: tuple[PlantedEvent, ...]) -> set[tuple[str, str]]:
    links = set()
    for ev in events:
        if ev.kind == "continuation":
            links.add((ev.parents[0], ev.children[0]))
        elif ev.kind == "split":
            links.update((ev.parents[0], c) for c in ev.children)
        elif ev.kind == "merge":
            links.update((p, ev.children[0]) for p in ev.parents)
    return links


def truth_groups(spec: TimelineSpec) -> dict[tuple[int, str], str]:
    """Planted dynamic/stable group of every non-final-year blob."""
    groups: dict[tuple[int, str], str] = {}
    for ev in spec.events:
        for p in ev.parents:
            key = (ev.year, p)
            if ev.kind in ("split", "merge"):
                groups[key] = "dynamic"
            else:
                groups.setdefault(key, "stable")
    return groups


def _random_unit(rng, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _separated_unit(rng, dim: int, existing: list[np.ndarray], max_cos: float = 0.2,
                    tries: int = 200) -> np.ndarray:
    for _ in range(tries):
        v = _random_unit(rng, dim)
        if all(abs(float(v @ e)) < max_cos for e in existing):
            return v
        # in 768-D rejection virtually never triggers
    raise DataError("could not place a separated center")


def _orthogonal_unit(rng, dim: int, base: np.ndarray) -> np.ndarray:
    v = rng.standard_normal(dim)
    v -= (v @ base) * base
    return v / np.linalg.norm(v)


def assign_centers(spec: TimelineSpec, rng) -> dict[str, np.ndarray]:
    """Blob centers honoring the planted events, then feasibility-checked."""
    centers: dict[str, np.ndarray] = {}
    anchors: list[np.ndarray] = []
    events = sorted(spec.events, key=lambda e: (e.year, e.kind, e.parents, e.children))

    def new_anchor() -> np.ndarray:
        a = _separated_unit(rng, spec.dim, anchors)
        anchors.append(a)
        return a

    # roots: blobs never created by an event (a self-continuation keeps
    # an existing blob alive, it does not create one)
    created = {c for ev in events for c in ev.children if c not in ev.parents}
    blob_years: dict[str, list[int]] = {}
    for b in spec.blobs:
        blob_years.setdefault(b.blob_id, []).append(b.year)
    roots = [bid for bid in sorted(blob_years) if bid not in created]

    merge_parents: dict[str, PlantedEvent] = {}
    for ev in events:
        if ev.kind == "merge":
            for p in ev.parents:
                merge_parents[p] = ev

    placed_merge: set[tuple] = set()
    for bid in roots:
        if bid in centers:
            continue
        if bid in merge_parents:
            ev = merge_parents[bid]
            if ev in placed_merge:
                continue
            anchor = new_anchor()
            u = _orthogonal_unit(rng, spec.dim, anchor)
            offsets = _fan_offsets(len(ev.parents), u, anchor, rng, spec.dim)
            for p, off in zip(ev.parents, offsets):
                c = anchor + SPLIT_OFFSET * off
                centers[p] = c / np.linalg.norm(c)
            placed_merge.add(ev)
        else:
            centers[bid] = new_anchor()

    for ev in events:
        if ev.kind == "continuation":
            centers.setdefault(ev.children[0], centers[ev.parents[0]])
        elif ev.kind == "split":
            parent = centers[ev.parents[0]]
            u = _orthogonal_unit(rng, spec.dim, parent)
            for child, off in zip(ev.children, _fan_offsets(len(ev.children), u, parent, rng, spec.dim)):
                c = parent + SPLIT_OFFSET * off
                centers[child] = c / np.linalg.norm(c)
        elif ev.kind == "merge":
            mean = np.sum([centers[p] for p in ev.parents], axis=0)
            centers[ev.children[0]] = mean / np.linalg.norm(mean)
        elif ev.kind == "birth":
            for child in ev.children:
                centers.setdefault(child, new_anchor())

    missing = set(blob_years) - set(centers)
    if missing:
        raise DataError(f"blobs without derivable centers: {sorted(missing)}")
    return centers


def _fan_offsets(m: int, u: np.ndarray, base: np.ndarray, rng, dim: int) -> list[np.ndarray]:
    if m == 1:
        return [u]
    if m == 2:
        return [u, -u]
    if m == 3:
        v = _orthogonal_unit(rng, dim, base)
        v -= (v @ u) * u
        v /= np.linalg.norm(v)
        return [u, -0.5 * u + 0.8660254 * v, -0.5 * u - 0.8660254 * v]
    raise DataError("planted splits/merges support at most 3 branches")


def check_feasibility(spec: TimelineSpec, centers: dict[str, np.ndarray]) -> None:
    """Adjacent-year center cosines must respect the link margins."""
    per_year: dict[int, list[str]] = {}
    for b in spec.blobs:
        per_year.setdefault(b.year, []).append(b.blob_id)
    links = planted_links(spec.events)
    years = sorted(per_year)
    for t, t1 in zip(years, years[1:]):
        for a in per_year[t]:
            for b in per_year[t1]:
                cos = float(centers[a] @ centers[b])
                if (a, b) in links and cos < LINK_HI:
                    raise DataError(
                        f"planted link {a}->{b} has center cosine {cos:.4f} < {LINK_HI}"
                    )
                if (a, b) not in links and cos > LINK_LO:
                    raise DataError(
                        f"unlinked pair {a}->{b} has center cosine {cos:.4f} > {LINK_LO}"
                    )


def _blob_vocab(blob_id: str, rng) -> list[str]:
    words = rng.choice(_WORD_BANK, size=8, replace=False)
    return [f"{words[i]} {words[i + 1]}" for i in range(0, 8, 2)]


def gen_timeline(spec: TimelineSpec) -> SynthTimeline:
    """Corpus + embeddings + truth tables for a planted timeline."""
    rng = derived_rng(spec.seed, 0x51)
    centers = assign_centers(spec, rng)
    check_feasibility(spec, centers)

    papers: dict[str, PaperRecord] = {}
    ids: list[str] = []
    vectors: list[np.ndarray] = []
    blob_of: dict[str, str] = {}
    satellite: dict[str, bool] = {}
    members: dict[tuple[int, str], list[str]] = {}
    vocab = {bid: _blob_vocab(bid, derived_rng(spec.seed, 0x52, i))
             for i, bid in enumerate(sorted({b.blob_id for b in spec.blobs}))}

    for blob in sorted(spec.blobs, key=lambda b: (b.year, b.blob_id)):
        center = centers[blob.blob_id]
        key = (blob.year, blob.blob_id)
        members[key] = []
        phrases = vocab[blob.blob_id]
        brng = derived_rng(spec.seed, 0x53, blob.year, _stable_id(blob.blob_id))
        sat_axis = _orthogonal_unit(brng, spec.dim, center)
        sat_anchor = SATELLITE_RADIUS * (
            SATELLITE_COS * center + np.sqrt(1.0 - SATELLITE_COS**2) * sat_axis
        )
        for i in range(blob.count + blob.weak_satellites):
            pid = f"p{blob.year}_{blob.blob_id}_{i:03d}"
            is_sat = i >= blob.count
            if is_sat:
                vec = sat_anchor + blob.sigma * brng.standard_normal(spec.dim)
            else:
                vec = center + blob.sigma * brng.standard_normal(spec.dim)
            title_phrases = brng.choice(phrases, size=2, replace=False)
            body = list(brng.choice(phrases, size=3, replace=True))
            filler = brng.choice(_WORD_BANK, size=6, replace=True)
            abstract = (
                f"We study {body[0]} and {body[1]} dynamics. "
                f"Results on {body[2]} relate {' '.join(filler[:3])} "
                f"to {' '.join(filler[3:])}."
            )
            papers[pid] = PaperRecord(
                id=pid,
                title=f"{title_phrases[0]} and {title_phrases[1]}",
                abstract=abstract,
                year=blob.year,
                references=(),
                is_core=True,
            )
            ids.append(pid)
            vectors.append(vec)
            blob_of[pid] = blob.blob_id
            satellite[pid] = is_sat
            members[key].append(pid)

    boost = {}
    for blob in spec.blobs:
        for pid in members[(blob.year, blob.blob_id)]:
            boost[pid] = blob.cross_boost
    edges, bridge_papers = gen_citation_sbm(
        papers, blob_of, spec.p_in, spec.p_out, spec.bridges, spec.seed,
        cross_boost=boost,
    )
    refs: dict[str, list[str]] = {pid: [] for pid in papers}
    for citing, cited in edges:
        refs[citing].append(cited)
    for pid, rs in refs.items():
        if rs:
            papers[pid] = PaperRecord(
                id=pid, title=papers[pid].title, abstract=papers[pid].abstract,
                year=papers[pid].year, references=tuple(sorted(rs)),
                is_core=True,
            )

    matrix = EmbeddingMatrix(
        data=np.asarray(vectors, dtype=np.float32), ids=ids, model_id="synth-planted"
    )
    return SynthTimeline(
        spec=spec,
        corpus=Corpus(papers=papers),
        embeddings=matrix,
        blob_of=blob_of,
        satellite=satellite,
        centers=centers,
        members=members,
        truth_groups=truth_groups(spec),
        planted_links=planted_links(spec.events),
        bridge_papers=bridge_papers,
        edges=edges,
    )


def _stable_id(text: str) -> int:
    out = 0
    for ch in text:
        out = (out * 131 + ord(ch)) % (1 << 31)
    return out


def gen_citation_sbm(
    papers: dict[str, PaperRecord],
    block_of: dict[str, str],
    p_in: float,
    p_out: float,
    bridges: int,
    seed: int,
    cross_boost: dict[str, float] | None = None,
) -> tuple[list[tuple[str, str]], list[str]]:
    """Planted-partition citations: same-block pairs cite with p_in, others
    with p_out (optionally boosted per paper); citations point backward in
    time (ties broken by id order).  Bridge papers connect their block to
    every other block regardless of p_out."""
    if not 0.0 <= p_out < p_in <= 1.0:
        raise DataError(f"need 0 <= p_out < p_in <= 1, got {p_out}, {p_in}")
    rng = derived_rng(seed, 0x54)
    boost = cross_boost or {}
    blocks: dict[str, list[str]] = {}
    for pid in sorted(papers):
        blocks.setdefault(block_of[pid], []).append(pid)

    years = {pid: papers[pid].year for pid in papers}
    edges: list[tuple[str, str]] = []
    names = sorted(blocks)
    for i, ba in enumerate(names):
        for bb in names[i:]:
            a_ids, b_ids = blocks[ba], blocks[bb]
            same = ba == bb
            draw = rng.random((len(a_ids), len(b_ids)))
            if same:
                prob = np.full(draw.shape, p_in)
                prob[np.tril_indices(len(a_ids))] = -1.0  # each pair once
            else:
                ba_boost = np.array([boost.get(p, 1.0) for p in a_ids])
                bb_boost = np.array([boost.get(p, 1.0) for p in b_ids])
                prob = np.minimum(1.0, p_out * np.maximum.outer(ba_boost, bb_boost))
            for ai, bi in np.argwhere(draw < prob):
                pid_a, pid_b = a_ids[int(ai)], b_ids[int(bi)]
                # later paper cites the earlier one
                if (years[pid_a], pid_a) >= (years[pid_b], pid_b):
                    edges.append((pid_a, pid_b))
                else:
                    edges.append((pid_b, pid_a))

    bridge_papers: list[str] = []
    if bridges > 0 and len(names) > 1:
        for k in range(bridges):
            block = names[k % len(names)]
            pid = blocks[block][0]
            bridge_papers.append(pid)
            for other in names:
                if other == block:
                    continue
                candidates = [
                    q for q in blocks[other] if (years[q], q) < (years[pid], pid)
                ] or [q for q in blocks[other] if q != pid]
                picks = rng.choice(len(candidates), size=min(3, len(candidates)), replace=False)
                for idx in picks:
                    q = candidates[int(idx)]
                    if (years[pid], pid) >= (years[q], q):
                        edges.append((pid, q))
                    else:
                        edges.append((q, pid))
    return sorted(set(edges)), bridge_papers


def gen_feature_table(beta: np.ndarray, n: int, seed: int, intercept: float = 0.0):
    """Standard-normal features with Bernoulli(logistic(x @ beta)) labels;
    returns (FeatureRow list, X, y) with coefficients mapped onto the named
    numeric feature slots."""
    from .predict import FeatureRow

    beta = np.asarray(beta, dtype=np.float64)
    d = beta.shape[0]
    slots = ["mean_id_text_strong", "mean_id_net_strong", "mean_id_net_weak"]
    if d > len(slots):
        raise DataError(f"at most {len(slots)} planted coefficients supported")
    rng = derived_rng(seed, 0x55)
    X = rng.standard_normal((n, d))
    p = 1.0 / (1.0 + np.exp(-(intercept + X @ beta)))
    y = (rng.random(n) < p).astype(np.int64)

    rows = []
    for i in range(n):
        values = dict.fromkeys(slots, 0.0)
        for j in range(d):
            values[slots[j]] = float(X[i, j])
        rows.append(
            FeatureRow(
                cluster_id=i,
                year=2011 + (i % 7),
                n_strong=20,
                n_weak=2,
                mean_id_text_strong=values["mean_id_text_strong"],
                mean_id_net_strong=values["mean_id_net_strong"],
                mean_id_net_weak=values["mean_id_net_weak"],
                weak_imputed=0,
                label=int(y[i]),
            )
        )
    return rows, X, y.astype(np.float64)


# ---------------------------------------------------------------------------
# Scenario assembly


def timeline_from_events(
    years: tuple[int, ...],
    events: tuple[PlantedEvent, ...],
    base_count: int = 40,
    sigma: float = DEFAULT_SIGMA,
    dynamic_satellites: int = 16,
    dynamic_boost_range: tuple[float, float] = (2.5, 5.0),
    stable_boost_range: tuple[float, float] = (1.0, 2.5),
    quiet_every: int = 8,
    loud_every: int = 10,
    p_in: float = 0.25,
    p_out: float = 0.004,
    bridges: int = 0,
    seed: int = 0,
    count_jitter: int = 0,
) -> TimelineSpec:
    """Compile an event script into a full TimelineSpec.

    Blob existence is inferred: parents exist in the transition year,
    children in the following year.  Dynamic-next-year blobs receive weak
    satellites (count jittered around ``dynamic_satellites``) and a
    citation cross-boost drawn from ``dynamic_boost_range``, so the
    planted signal is learnable.  Contradictions are planted
    deterministically and independently per signal: every
    ``quiet_every``-th dynamic blob loses one signal (satellites or boost,
    on alternating phases) and every ``loud_every``-th stable blob gains
    one.  The "wrong-signal" cells then hold both classes, which bounds
    any classifier's accuracy away from 1 and keeps the classes from
    being linearly separable, without which the regression stage would
    rightly diverge; and because the two signals flip independently, each
    feature retains identifiable explanatory power of its own.  Set the
    cadences to 0 to disable impostors.
    """
    exists: dict[tuple[int, str], None] = {}
    for ev in events:
        if ev.year not in years:
            raise DataError(f"event year {ev.year} outside timeline years")
        for p in ev.parents:
            exists[(ev.year, p)] = None
        for c in ev.children:
            exists[(ev.year + 1, c)] = None

    groups = truth_groups(
        TimelineSpec(years=years, blobs=(), events=events)
    )
    rng = derived_rng(seed, 0x56)
    blobs = []
    n_dynamic = 0
    n_stable = 0
    for (year, bid) in sorted(exists):
        group = groups.get((year, bid))
        dynamic = group == "dynamic"
        if dynamic:
            n_dynamic += 1
            sat_on = not (quiet_every and n_dynamic % quiet_every == 0)
            boost_on = not (quiet_every and n_dynamic % quiet_every == quiet_every // 2)
        elif group == "stable":
            n_stable += 1
            sat_on = bool(loud_every and n_stable % loud_every == 0)
            boost_on = bool(loud_every and n_stable % loud_every == loud_every // 2)
        else:
            sat_on = boost_on = False
        boost = float(rng.uniform(*(dynamic_boost_range if boost_on else stable_boost_range)))
        count = base_count + (int(rng.integers(-count_jitter, count_jitter + 1)) if count_jitter else 0)
        n_sat = int(rng.integers(dynamic_satellites - 1, dynamic_satellites + 3)) if sat_on else 0
        blobs.append(
            BlobYear(
                blob_id=bid,
                year=year,
                count=count,
                sigma=sigma,
                weak_satellites=n_sat if dynamic_satellites > 0 else 0,
                cross_boost=boost,
            )
        )
    return TimelineSpec(
        years=tuple(years),
        blobs=tuple(blobs),
        events=tuple(events),
        p_in=p_in,
        p_out=p_out,
        bridges=bridges,
        seed=seed,
    )
