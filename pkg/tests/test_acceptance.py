"""Acceptance suite: one test per shipping criterion, each printed as a
pass/fail line with its measured value.  Run with ``pytest
tests/test_acceptance.py -s`` to see the lines as they complete."""

import csv
import json
import time
from pathlib import Path

import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score

from conftest import pipeline_events, taxonomy_events
from topicflow.clusterer import WEAK, cluster, soft_membership
from topicflow.events import EventGroup, classify, link_years
from topicflow.forest import fit_forest
from topicflow.graph import (
    betweenness,
    graph_from_edge_pairs,
    louvain,
    modularity_of,
)
from topicflow.logit import _design, fit_logit, gradient, marginal_effects
from topicflow.predict import decide_retention
from topicflow.scoring import language_id
from topicflow.synth import gen_citation_sbm, gen_feature_table, gen_timeline, timeline_from_events


def report(num: int, ok: bool, detail: str) -> None:
    print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {num}: {detail}")
    assert ok, f"criterion {num}: {detail}"


# ---------------------------------------------------------------------------


def test_criterion_1_language_score_worked_examples():
    start = time.perf_counter()
    single_owner = np.zeros(9)
    single_owner[0] = 1.0
    a = language_id(single_owner, weak_mass=0.0)
    b = language_id(np.full(9, 0.1), weak_mass=0.1)
    elapsed = time.perf_counter() - start
    ok = abs(a - 0.0) <= 1e-12 and abs(b - 0.9) <= 1e-12 and elapsed < 1e-3
    report(1, ok, f"worked examples {a:.1e} / {b:.12f} in {elapsed*1e6:.0f} us")


def _oracle_betweenness(indptr, indices, n):
    """All-pairs shortest-path counting oracle: bc(v) = sum over pairs of
    sigma_sv * sigma_vt / sigma_st when v is interior to a shortest path.
    Path counts come from adjacency-matrix powers over BFS levels, entirely
    independent of the dependency-accumulation algorithm under test."""
    A = np.zeros((n, n))
    for v in range(n):
        A[v, indices[indptr[v]:indptr[v + 1]]] = 1.0
    dist = np.full((n, n), -1, dtype=np.int64)
    np.fill_diagonal(dist, 0)
    sigma = np.eye(n)
    reach = np.eye(n, dtype=bool)
    power = np.eye(n)
    for level in range(1, n):
        power = power @ A  # walk counts of this length
        new = (power > 0) & ~reach
        if not new.any():
            break
        dist[new] = level
        sigma[new] = power[new]  # shortest walks are paths, so counts agree
        reach |= new

    bc = np.zeros(n)
    for s in range(n):
        ds, ss = dist[s], sigma[s]
        for t in range(s + 1, n):
            if dist[s, t] <= 0:
                continue
            valid = (ds + dist[t] == dist[s, t]) & (ds > 0) & (dist[t] > 0)
            bc += np.where(valid, ss * sigma[t] / sigma[s, t], 0.0)
    return bc


def test_criterion_2_betweenness_exact():
    start = time.perf_counter()
    worst = 0.0
    rng = np.random.default_rng(20)
    for trial in range(50):
        n = int(rng.integers(8, 201))
        p = rng.uniform(1.2 / n, 0.12)
        pairs = [(a, b) for a in range(n) for b in range(a + 1, n) if rng.random() < p]
        ids = [f"{i:03d}" for i in range(n)]
        g = graph_from_edge_pairs(0, ids, [(ids[a], ids[b]) for a, b in pairs])
        got = np.array([betweenness(g).values[i] for i in g.nodes])
        want = _oracle_betweenness(g.indptr, g.indices, g.n_nodes)
        worst = max(worst, float(np.abs(got - want).max()))

    # closed forms
    star = graph_from_edge_pairs(0, [str(i) for i in range(6)],
                                 [("0", str(i)) for i in range(1, 6)])
    path = graph_from_edge_pairs(0, list("abcd"), [("a", "b"), ("b", "c"), ("c", "d")])
    k5 = graph_from_edge_pairs(0, [str(i) for i in range(5)],
                               [(str(a), str(b)) for a in range(5) for b in range(a + 1, 5)])
    closed = (
        abs(betweenness(star).values["0"] - 10.0) <= 1e-9
        and abs(betweenness(path).values["b"] - 2.0) <= 1e-9
        and max(abs(v) for v in betweenness(k5).values.values()) <= 1e-9
    )
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and closed and elapsed < 60
    report(2, ok, f"50 random graphs max |err| = {worst:.2e}, closed forms ok, {elapsed:.1f}s")


def _partitions(items):
    if len(items) == 1:
        yield [items]
        return
    first = items[0]
    for smaller in _partitions(items[1:]):
        for i, subset in enumerate(smaller):
            yield smaller[:i] + [[first] + subset] + smaller[i + 1:]
        yield [[first]] + smaller


def test_criterion_3_louvain():
    start = time.perf_counter()
    ids = [f"{i:02d}" for i in range(10)]
    pairs = [(a, b) for a in range(5) for b in range(a + 1, 5)]
    pairs += [(a + 5, b + 5) for a in range(5) for b in range(a + 1, 5)]
    pairs.append((4, 5))
    barbell = graph_from_edge_pairs(0, ids, [(ids[a], ids[b]) for a, b in pairs])
    q_louvain = louvain(barbell, seed=0).modularity
    best = -1.0
    for part in _partitions(list(range(10))):
        labels = np.empty(10, dtype=np.int64)
        for ci, members in enumerate(part):
            labels[members] = ci
        best = max(best, modularity_of(barbell, labels))
    barbell_ok = abs(q_louvain - best) <= 1e-9

    from topicflow.corpus import PaperRecord

    papers, block_of = {}, {}
    for b in range(4):
        for i in range(32):
            pid = f"b{b}_{i:02d}"
            papers[pid] = PaperRecord(id=pid, title="", abstract="", year=2011)
            block_of[pid] = f"block{b}"
    edges, _ = gen_citation_sbm(papers, block_of, p_in=0.3, p_out=0.01, bridges=0, seed=5)
    g = graph_from_edge_pairs(2011, sorted(papers), edges)
    aris = []
    for seed in range(10):
        found = louvain(g, seed=seed)
        aris.append(adjusted_rand_score(
            [block_of[p] for p in g.nodes], [found.communities[p] for p in g.nodes]
        ))
    mean_ari = float(np.mean(aris))
    elapsed = time.perf_counter() - start
    ok = barbell_ok and mean_ari >= 0.9 and elapsed < 60
    report(3, ok, f"barbell |Q - optimum| = {abs(q_louvain - best):.1e}, "
                  f"planted ARI = {mean_ari:.3f} over 10 seeds, {elapsed:.1f}s")


def test_criterion_4_clustering():
    start = time.perf_counter()
    aris, sum_err, argmax_ok, weak_rates = [], 0.0, True, []
    for seed in range(10):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=(150, 5))
        a[:, 0] += 20
        b = rng.normal(size=(150, 5))
        b[:, 0] -= 20
        noise = rng.uniform(-40, 40, size=(30, 5))
        X = np.vstack([a, b, noise])
        planted = np.array([0] * 150 + [1] * 150 + [-1] * 30)
        model = cluster(X, min_cluster_size=15, min_samples=15, seed=seed)
        mem = soft_membership(model, X)
        blob = planted >= 0
        aris.append(adjusted_rand_score(planted[blob], model.labels[blob]))
        sum_err = max(sum_err, float(np.abs(mem.sum(axis=1) + model.weak_mass - 1.0).max()))
        argmax_ok &= model.check_membership_consistency()
        weak_rates.append(float((model.labels[planted == -1] == WEAK).mean()))
    elapsed = time.perf_counter() - start
    ok = (min(aris) >= 0.95 and sum_err <= 1e-9 and argmax_ok
          and float(np.mean(weak_rates)) >= 0.5 and elapsed < 120)
    report(4, ok, f"ARI min = {min(aris):.3f} over 10 seeds, row-sum err = {sum_err:.1e}, "
                  f"argmax consistent = {argmax_ok}, noise weak rate = {np.mean(weak_rates):.2f}, "
                  f"{elapsed:.1f}s")


def test_criterion_5_event_detection():
    start = time.perf_counter()
    events = taxonomy_events()
    spec = timeline_from_events((2011, 2012, 2013, 2014), events, base_count=40,
                                quiet_every=0, loud_every=0, seed=11)
    tl = gen_timeline(spec)
    E_mat = tl.embeddings.data.astype(np.float64)
    row = {pid: i for i, pid in enumerate(tl.embeddings.ids)}

    def centroids_for(year):
        blobs = sorted({b.blob_id for b in spec.blobs if b.year == year})
        cents = {}
        for j, bid in enumerate(blobs):
            idx = [row[p] for p in tl.members[(year, bid)] if not tl.satellite[p]]
            cents[j] = E_mat[idx].mean(axis=0)
        return cents, blobs

    recovered = 0
    misgrouped = 0
    years = (2011, 2012, 2013, 2014)
    for t, t1 in zip(years, years[1:]):
        cents_t, blobs_t = centroids_for(t)
        cents_t1, blobs_t1 = centroids_for(t1)
        links = link_years(cents_t, cents_t1, t, t1)
        tr = classify(links, sorted(cents_t), sorted(cents_t1))
        found = set()
        for ev in tr.events:
            if ev.kind.value == "birth":
                found.add(("birth", blobs_t1[ev.cluster_id]))
            else:
                found.add((ev.kind.value, blobs_t[ev.cluster_id]))
        for ev in [e for e in events if e.year == t]:
            if ev.kind == "birth":
                hit = ("birth", ev.children[0]) in found
            elif ev.kind == "merge":
                hit = all(("merge", p) in found for p in ev.parents)
            else:
                hit = (ev.kind, ev.parents[0]) in found
            recovered += bool(hit)
            if hit and ev.kind != "birth":
                want = tl.truth_groups[(t, ev.parents[0])]
                for p in ev.parents:
                    got = tr.groups_from[blobs_t.index(p)]
                    if got.value != tl.truth_groups[(t, p)]:
                        misgrouped += 1
    elapsed = time.perf_counter() - start
    rate = recovered / len(events)
    ok = rate >= 0.8 and misgrouped == 0 and elapsed < 120
    report(5, ok, f"recovered {recovered}/{len(events)} planted events "
                  f"({rate:.0%}), group misassignments = {misgrouped}, {elapsed:.1f}s")


def test_criterion_6_logit():
    start = time.perf_counter()
    beta_true = np.array([1.0, -1.0, 0.5])
    covered = np.zeros(3, dtype=int)
    for rep in range(100):
        _, X, y = gen_feature_table(beta_true, 5000, seed=1000 + rep)
        fit = fit_logit(X, y)
        lo = fit.beta[1:] - 1.96 * fit.std_errors[1:]
        hi = fit.beta[1:] + 1.96 * fit.std_errors[1:]
        covered += ((lo <= beta_true) & (beta_true <= hi)).astype(int)

    _, X, y = gen_feature_table(beta_true, 5000, seed=77)
    fit = fit_logit(X, y)
    grad_norm = float(np.abs(gradient(_design(X), y, fit.beta)).max())

    # finite-difference observed information on a smaller fixture
    _, Xs, ys = gen_feature_table(beta_true, 400, seed=78)
    fit_s = fit_logit(Xs, ys)
    D = _design(Xs)

    def ll(b):
        eta = D @ b
        return float(np.sum(ys * eta - np.logaddexp(0.0, eta)))

    d = len(fit_s.beta)
    h = 1e-5
    H = np.zeros((d, d))
    for i in range(d):
        for j in range(d):
            bpp = fit_s.beta.copy(); bpp[[i, j]] += [h, h] if i != j else [2 * h, 0]
            bpm = fit_s.beta.copy(); bpm[i] += h; bpm[j] -= h
            bmp = fit_s.beta.copy(); bmp[i] -= h; bmp[j] += h
            bmm = fit_s.beta.copy(); bmm[i] -= h; bmm[j] -= h
            if i == j:
                bpp = fit_s.beta.copy(); bpp[i] += 2 * h
                bmm = fit_s.beta.copy(); bmm[i] -= 2 * h
                H[i, j] = (ll(bpp) - 2 * ll(fit_s.beta) + ll(bmm)) / (4 * h * h)
            else:
                H[i, j] = (ll(bpp) - ll(bpm) - ll(bmp) + ll(bmm)) / (4 * h * h)
    se_fd = np.sqrt(np.diag(np.linalg.inv(-H)))
    se_rel = float(np.abs(fit_s.std_errors - se_fd).max() / np.abs(se_fd).max())

    elapsed = time.perf_counter() - start
    ok = covered.min() >= 90 and grad_norm < 1e-6 and se_rel < 1e-4 and elapsed < 120
    report(6, ok, f"CI coverage {covered.tolist()}/100 per coefficient, "
                  f"grad inf-norm = {grad_norm:.1e}, SE vs finite diff rel err = {se_rel:.1e}, "
                  f"{elapsed:.1f}s")


def test_criterion_7_purposeful_selection():
    start = time.perf_counter()
    names = ["size_strong", "net_weak", "net_strong", "lang"]
    coef_p = {"size_strong": 0.101, "net_weak": 0.436, "net_strong": 0.051, "lang": 0.023}
    ame_p = {"size_strong": 0.097, "net_weak": 0.434, "net_strong": 0.046, "lang": 0.019}
    kept = decide_retention(names, coef_p, ame_p, alpha=0.05)
    elapsed = time.perf_counter() - start
    ok = ("net_weak" not in kept and "size_strong" not in kept
          and "net_strong" in kept and "lang" in kept and elapsed < 1.0)
    report(7, ok, f"retained {kept} from the mocked p-value table, {elapsed*1e3:.1f}ms")


def test_criterion_8_random_forest():
    start = time.perf_counter()
    rng = np.random.default_rng(8)
    y = rng.integers(0, 2, size=200)
    X = rng.normal(size=(200, 5))
    X[:, 2] = np.where(y == 1, X[:, 2] + 8.0, X[:, 2] - 8.0)

    fit_a = fit_forest(X, y, seed=21)
    fit_b = fit_forest(X, y, seed=21)
    sum_err = abs(float(fit_a.importances.sum()) - 1.0)
    train_f1_one = bool(np.array_equal(fit_a.predict(X), y))
    deterministic = (
        fit_a.importances.tobytes() == fit_b.importances.tobytes()
        and fit_a.predict_proba(X).tobytes() == fit_b.predict_proba(X).tobytes()
    )
    elapsed = time.perf_counter() - start
    ok = sum_err <= 1e-9 and train_f1_one and deterministic and elapsed < 60
    report(8, ok, f"importance sum err = {sum_err:.1e}, training F1 = 1.0: {train_f1_one}, "
                  f"seeded determinism: {deterministic}, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# end-to-end


def _pipeline_config(out_dir: Path, seed: int = 11) -> dict:
    events = pipeline_events()
    spec = timeline_from_events((2011, 2012, 2013, 2014), events,
                                base_count=20, dynamic_satellites=13,
                                seed=seed)
    return {
        "paths": {"out_dir": str(out_dir)},
        "seed": seed,
        "reducer": {"mode": "umap", "n_neighbors": 12, "min_dist": 0.1,
                    "target_dims": 8, "n_epochs": 150},
        "clusterer": {"min_cluster_size": 16, "min_samples": 8},
        "synth": {
            "years": [2011, 2012, 2013, 2014],
            "blobs": [vars(b) for b in spec.blobs],
            "events": [{"year": e.year, "kind": e.kind, "parents": list(e.parents),
                        "children": list(e.children)} for e in events],
            "p_in": 0.25,
            "p_out": 0.004,
        },
    }


def _run_pipeline(tmp: Path, tag: str):
    from topicflow.cli import main

    out = tmp / tag
    cfg_path = tmp / f"{tag}.json"
    cfg_path.write_text(json.dumps(_pipeline_config(out)))
    assert main(["--config", str(cfg_path), "synth"]) == 0
    assert main(["--config", str(cfg_path), "pipeline"]) == 0
    return out


@pytest.fixture(scope="module")
def pipeline_outputs(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("acceptance")
    start = time.perf_counter()
    out_a = _run_pipeline(tmp, "runA")
    first_elapsed = time.perf_counter() - start
    out_b = _run_pipeline(tmp, "runB")
    return out_a, out_b, first_elapsed


def test_criterion_9_end_to_end(pipeline_outputs):
    out, _, elapsed = pipeline_outputs
    corpus_lines = (out / "corpus.jsonl").read_text().splitlines()
    n_papers = len(corpus_lines)

    # planted group of each detected cluster via majority blob of members
    from topicflow.clusterer import model_from_json
    from topicflow.corpus import load_corpus

    truth_blob = {r["paper_id"]: r["blob"]
                  for r in csv.DictReader(open(out / "truth_papers.csv"))}
    truth_groups = {(int(r["year"]), r["blob"]): r["group"]
                    for r in csv.DictReader(open(out / "truth_groups.csv"))}
    corpus = load_corpus(out / "corpus.jsonl")

    cluster_blob = {}
    for year in (2011, 2012, 2013):
        model = model_from_json((out / f"clusters_{year}.json").read_text())
        cohort = sorted(p.id for p in corpus.core_papers(year))
        for k in range(model.n_clusters):
            blobs = [truth_blob[cohort[i]] for i in model.strong_members(k)]
            vals, counts = np.unique(blobs, return_counts=True)
            cluster_blob[(year, k)] = str(vals[np.argmax(counts)])

    y_true, y_pred = [], []
    for r in csv.DictReader(open(out / "predictions.csv")):
        year, k = int(r["year"]), int(r["cluster_id"])
        planted = truth_groups.get((year, cluster_blob[(year, k)]))
        if planted is None:
            continue
        y_true.append(1 if planted == "dynamic" else 0)
        y_pred.append(int(r["predicted"]))
    from topicflow.predict import evaluate

    metrics = evaluate(np.array(y_true), np.array(y_pred))
    ok = n_papers >= 2000 and metrics.micro_f1 >= 0.8 and elapsed < 600
    report(9, ok, f"{n_papers} papers over 4 years, pipeline {elapsed:.0f}s, "
                  f"test micro-F1 vs planted labels = {metrics.micro_f1:.3f} "
                  f"on {len(y_true)} clusters")


def test_criterion_10_determinism(pipeline_outputs):
    out_a, out_b, _ = pipeline_outputs
    names = sorted(p.name for p in out_a.glob("*.csv"))
    diffs = [n for n in names
             if (out_a / n).read_bytes() != (out_b / n).read_bytes()]
    ok = not diffs and len(names) >= 8
    report(10, ok, f"{len(names)} CSVs byte-identical across reruns"
                   + (f"; differing: {diffs}" if diffs else ""))
