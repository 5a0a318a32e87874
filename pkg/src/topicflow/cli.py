"""Pipeline orchestration.

One JSON config document drives every stage; CLI flags override config
fields, config fields override defaults.  Each stage reads only persisted
artifacts of earlier stages and writes its outputs plus a manifest
(config hash, seed, input/output hashes) into the output directory, so any
stage can be rerun in isolation and reruns are byte-identical.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import subprocess
import sys
from pathlib import Path

import numpy as np

from . import compare as compare_mod
from . import events as events_mod
from . import graph as graph_mod
from . import keyphrases as keyphrases_mod
from . import predict as predict_mod
from . import report as report_mod
from . import scoring as scoring_mod
from ._util import canonical_json, fmt_float, sha256_file, sha256_json
from .clusterer import cluster, assign_weak, model_from_json, model_to_json, soft_membership
from .corpus import load_corpus, window, write_corpus
from .dbcv import model_dbcv
from .embfile import EmbeddingMatrix, read_embeddings, write_embeddings
from .errors import ConfigError, DataError, NumericalError, TopicflowError
from .reducer import ReducerConfig, reduce
from .stubvec import stub_embed
from .synth import PlantedEvent, TimelineSpec, BlobYear, gen_timeline

log = logging.getLogger("topicflow")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

SUBCOMMANDS = [
    "ingest", "embed", "reduce", "cluster", "graph", "score", "events",
    "compare", "keyphrases", "predict", "synth", "report", "pipeline",
]

DEFAULT_CONFIG = {
    "paths": {"corpus": None, "embeddings": None, "out_dir": "out"},
    "seed": 0,
    "threads": 1,
    "reducer": {"mode": "umap", "n_neighbors": 30, "min_dist": 0.1,
                "target_dims": 10, "n_epochs": 300},
    "clusterer": {"min_cluster_size": 15, "min_samples": 15},
    "events": {"theta": 0.95},
    "compare": {"theta": 0.1},
    "keyphrases": {"k": 5, "lambda": 0.6, "min_df": 2, "ngram_max": 3},
    "predict": {"train_years": None, "test_year": None, "n_trees": 100,
                "language_mean_includes_weak": False},
    "embedder": {"mode": "stub", "executable": None, "model_path": None,
                 "batch_size": 32},
}


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path: str | None, overrides: dict) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            user = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config document must be a JSON object")
        cfg = _deep_merge(cfg, user)
    cfg = _deep_merge(cfg, overrides)
    _validate_config(cfg)
    return cfg


def _validate_config(cfg: dict) -> None:
    for key in ("events", "compare"):
        theta = cfg[key]["theta"]
        if not 0.0 < theta < 1.0:
            raise ConfigError(f"{key}.theta must be in (0, 1), got {theta}")
    if cfg["threads"] < 1:
        raise ConfigError("threads must be >= 1")
    if cfg["seed"] < 0:
        raise ConfigError("seed must be a nonnegative integer")


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg["paths"]["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(stage: str, cfg: dict, inputs: list[Path], outputs: list[Path]) -> Path:
    out = _out_dir(cfg)
    doc = {
        "stage": stage,
        "config_sha256": sha256_json(cfg),
        "seed": cfg["seed"],
        "inputs": [
            {"path": str(p), "sha256": sha256_file(p)} for p in sorted(inputs)
        ],
        "outputs": [
            {"path": str(p), "sha256": sha256_file(p)} for p in sorted(outputs)
        ],
    }
    path = out / f"{stage}.manifest.json"
    path.write_text(canonical_json(doc) + "\n", encoding="utf-8")
    return path


def _require(path_value, what: str) -> Path:
    if not path_value:
        raise ConfigError(f"{what} path is required")
    p = Path(path_value)
    if not p.exists():
        raise DataError(f"{what} not found: {p}")
    return p


# ---------------------------------------------------------------------------
# Stages


def stage_ingest(cfg: dict) -> list[Path]:
    src = _require(cfg["paths"]["corpus"], "corpus")
    corpus = load_corpus(src)
    out = _out_dir(cfg)
    corpus_path = out / "corpus.jsonl"
    write_corpus(corpus, corpus_path)
    report_path = out / "ingest_report.json"
    report_path.write_text(
        canonical_json(
            {
                "n_papers": len(corpus),
                "n_core": len(corpus.core_papers()),
                "core_years": corpus.core_years,
                "n_dangling_references": len(corpus.dangling_ids),
                "n_resolvable_references": corpus.resolvable_reference_count(),
                "n_issues": len(corpus.issues),
                "issues": [
                    {"line": i.line, "message": i.message} for i in corpus.issues
                ],
            }
        )
        + "\n",
        encoding="utf-8",
    )
    _write_manifest("ingest", cfg, [src], [corpus_path, report_path])
    return [corpus_path, report_path]


def stage_embed(cfg: dict) -> list[Path]:
    out = _out_dir(cfg)
    corpus_path = out / "corpus.jsonl"
    if not corpus_path.exists():
        corpus_path = _require(cfg["paths"]["corpus"], "corpus")
    emb_path = out / "embeddings.vesp"
    embedder = cfg["embedder"]
    if embedder.get("executable"):
        cmd = [
            embedder["executable"],
            str(corpus_path),
            str(emb_path),
            "--mode", embedder.get("mode", "stub"),
            "--batch-size", str(embedder.get("batch_size", 32)),
            "--seed", str(cfg["seed"]),
        ]
        if embedder.get("model_path"):
            cmd += ["--model-path", embedder["model_path"]]
        proc = subprocess.run(cmd, capture_output=True, text=True)
        if proc.returncode != 0:
            raise DataError(
                f"embedder executable failed ({proc.returncode}): {proc.stderr.strip()}"
            )
    elif embedder.get("mode", "stub") == "stub":
        corpus = load_corpus(corpus_path)
        ids = [p.id for p in sorted(corpus.papers.values(), key=lambda p: p.id)]
        matrix = stub_embed(ids, cfg["seed"])
        write_embeddings(matrix, emb_path)
    else:
        raise ConfigError(
            "embedder.mode=model requires embedder.executable (the embedding "
            "component is a separate program; stub mode runs in-process)"
        )
    read_embeddings(emb_path)  # validate what we just produced
    manifest = Path(str(emb_path) + ".manifest.json")
    _write_manifest("embed", cfg, [corpus_path], [emb_path, manifest])
    return [emb_path]


def _load_inputs(cfg: dict):
    out = _out_dir(cfg)
    corpus_path = out / "corpus.jsonl"
    if not corpus_path.exists():
        corpus_path = _require(cfg["paths"]["corpus"], "corpus")
    emb_path = out / "embeddings.vesp"
    if not emb_path.exists():
        emb_path = _require(cfg["paths"]["embeddings"], "embeddings")
    corpus = load_corpus(corpus_path)
    matrix = read_embeddings(emb_path)
    return corpus, matrix, corpus_path, emb_path


def _cohort_rows(corpus, matrix, year: int) -> tuple[list[str], np.ndarray]:
    row_of = {pid: i for i, pid in enumerate(matrix.ids)}
    cohort = sorted(p.id for p in corpus.core_papers(year))
    missing = [pid for pid in cohort if pid not in row_of]
    if missing:
        raise DataError(f"cohort papers missing embeddings: {missing[:5]}")
    rows = [row_of[pid] for pid in cohort]
    return cohort, matrix.data[rows]


def stage_reduce(cfg: dict) -> list[Path]:
    corpus, matrix, corpus_path, emb_path = _load_inputs(cfg)
    out = _out_dir(cfg)
    rc = cfg["reducer"]
    outputs = []
    for year in corpus.core_years:
        cohort, X = _cohort_rows(corpus, matrix, year)
        config = ReducerConfig(
            mode=rc["mode"],
            n_neighbors=rc["n_neighbors"],
            min_dist=rc["min_dist"],
            target_dims=rc["target_dims"] if rc["mode"] != "passthrough" else X.shape[1],
            n_epochs=rc["n_epochs"],
            seed=int(np.random.SeedSequence(entropy=cfg["seed"], spawn_key=(1, year)).generate_state(1)[0]),
        )
        reduced = reduce(X, config)
        path = out / f"reduced_{year}.vesp"
        write_embeddings(
            EmbeddingMatrix(data=reduced, ids=cohort, model_id=f"reduced-{rc['mode']}"),
            path,
        )
        outputs.append(path)
        outputs.append(Path(str(path) + ".manifest.json"))
    _write_manifest("reduce", cfg, [corpus_path, emb_path], outputs)
    return outputs


def stage_cluster(cfg: dict) -> list[Path]:
    corpus, matrix, corpus_path, emb_path = _load_inputs(cfg)
    out = _out_dir(cfg)
    cc = cfg["clusterer"]
    row_of = {pid: i for i, pid in enumerate(matrix.ids)}
    outputs = []
    inputs = [corpus_path, emb_path]
    for year in corpus.core_years:
        reduced_path = out / f"reduced_{year}.vesp"
        if not reduced_path.exists():
            raise DataError(f"missing reduced matrix for {year}: run reduce first")
        inputs.append(reduced_path)
        reduced = read_embeddings(reduced_path)
        model = cluster(
            reduced.data.astype(np.float64),
            min_cluster_size=cc["min_cluster_size"],
            min_samples=cc["min_samples"],
            seed=cfg["seed"],
        )
        if not model.is_degenerate:
            soft_membership(model, reduced.data.astype(np.float64))
            full = matrix.data[[row_of[pid] for pid in reduced.ids]].astype(np.float64)
            assign_weak(model, full)
            if model.n_clusters >= 2:
                model_dbcv(model, reduced.data.astype(np.float64))
        path = out / f"clusters_{year}.json"
        path.write_text(model_to_json(model) + "\n", encoding="utf-8")
        outputs.append(path)
    _write_manifest("cluster", cfg, inputs, outputs)
    return outputs


def stage_graph(cfg: dict) -> list[Path]:
    corpus, _, corpus_path, _ = _load_inputs(cfg)
    out = _out_dir(cfg)
    outputs = []
    for year in corpus.core_years:
        win = window(corpus, year)
        g = graph_mod.build_graph(win)
        edge_path = out / f"graph_{year}.edges"
        graph_mod.write_edge_list(g, edge_path)
        communities = graph_mod.louvain(g, seed=cfg["seed"])
        comm_path = out / f"communities_{year}.csv"
        graph_mod.write_communities_csv(communities, comm_path)
        centrality = graph_mod.betweenness(g)
        cent_path = out / f"centrality_{year}.csv"
        graph_mod.write_centrality_csv(centrality, cent_path)
        outputs += [edge_path, comm_path, cent_path]
    _write_manifest("graph", cfg, [corpus_path], outputs)
    return outputs


def _load_year_models(cfg: dict, corpus):
    out = _out_dir(cfg)
    models = {}
    for year in corpus.core_years:
        path = out / f"clusters_{year}.json"
        if not path.exists():
            raise DataError(f"missing cluster model for {year}: run cluster first")
        models[year] = model_from_json(path.read_text(encoding="utf-8"))
    return models


def _load_centrality(cfg: dict, year: int) -> dict[str, float]:
    out = _out_dir(cfg)
    path = out / f"centrality_{year}.csv"
    if not path.exists():
        raise DataError(f"missing centrality for {year}: run graph first")
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            pid, value = line.rstrip("\n").rsplit(",", 1)
            values[pid] = float(value)
    return values


def stage_score(cfg: dict) -> list[Path]:
    corpus, matrix, corpus_path, emb_path = _load_inputs(cfg)
    out = _out_dir(cfg)
    models = _load_year_models(cfg, corpus)
    scores = []
    for year in corpus.core_years:
        cohort_ids, _ = _cohort_rows(corpus, matrix, year)
        model = models[year]
        if model.is_degenerate:
            log.warning("year %d model is degenerate; skipped in scoring", year)
            continue
        centrality = _load_centrality(cfg, year)
        win_cohort = window(corpus, year).cohort
        scores.extend(
            scoring_mod.score_year(year, cohort_ids, model, centrality, set(win_cohort))
        )
    path = out / "scores.csv"
    scoring_mod.write_scores_csv(scores, path)
    _write_manifest("score", cfg, [corpus_path, emb_path], [path])
    return [path]


def stage_events(cfg: dict) -> list[Path]:
    corpus, matrix, corpus_path, emb_path = _load_inputs(cfg)
    out = _out_dir(cfg)
    models = _load_year_models(cfg, corpus)
    theta = cfg["events"]["theta"]
    row_of = {pid: i for i, pid in enumerate(matrix.ids)}
    years = [y for y in corpus.core_years if not models[y].is_degenerate]

    centroids = {}
    for year in years:
        cohort_ids, _ = _cohort_rows(corpus, matrix, year)
        full = matrix.data[[row_of[pid] for pid in cohort_ids]].astype(np.float64)
        centroids[year] = events_mod.cluster_centroids(models[year], full)

    transitions = []
    groups_doc = {}
    for t, t1 in zip(years, years[1:]):
        links = events_mod.link_years(centroids[t], centroids[t1], t, t1)
        tr = events_mod.classify(
            links, sorted(centroids[t]), sorted(centroids[t1]), threshold=theta,
            year_from=t, year_to=t1,
        )
        transitions.append(tr)
        groups_doc[str(t)] = {
            str(c): grp.value for c, grp in sorted(tr.groups_from.items())
        }

    events_path = out / "events.csv"
    events_mod.write_events_csv(transitions, events_path)
    groups_path = out / "groups.json"
    groups_path.write_text(canonical_json(groups_doc) + "\n", encoding="utf-8")
    _write_manifest("events", cfg, [corpus_path, emb_path], [events_path, groups_path])
    return [events_path, groups_path]


def stage_compare(cfg: dict) -> list[Path]:
    corpus, matrix, corpus_path, _ = _load_inputs(cfg)
    out = _out_dir(cfg)
    models = _load_year_models(cfg, corpus)
    theta = cfg["compare"]["theta"]
    reports = []
    for year in corpus.core_years:
        model = models[year]
        if model.is_degenerate:
            continue
        cohort_ids, _ = _cohort_rows(corpus, matrix, year)
        comm_path = out / f"communities_{year}.csv"
        if not comm_path.exists():
            raise DataError(f"missing communities for {year}: run graph first")
        community_sets: dict[int, set[str]] = {}
        with open(comm_path, "r", encoding="utf-8") as fh:
            next(fh)
            for line in fh:
                pid, comm = line.rstrip("\n").rsplit(",", 1)
                community_sets.setdefault(int(comm), set()).add(pid)
        strong = {
            k: {cohort_ids[i] for i in model.strong_members(k)}
            for k in range(model.n_clusters)
        }
        with_weak = {
            k: strong[k] | {cohort_ids[i] for i in model.weak_members(k)}
            for k in range(model.n_clusters)
        }
        reports.append(
            compare_mod.overlap(
                year, strong, with_weak, community_sets, set(cohort_ids), theta
            )
        )
    path = out / "overlap.csv"
    compare_mod.write_overlap_csv(reports, path)
    _write_manifest("compare", cfg, [corpus_path], [path])
    return [path]


def stage_keyphrases(cfg: dict) -> list[Path]:
    corpus, matrix, corpus_path, emb_path = _load_inputs(cfg)
    out = _out_dir(cfg)
    models = _load_year_models(cfg, corpus)
    kc = cfg["keyphrases"]
    row_of = {pid: i for i, pid in enumerate(matrix.ids)}
    per_year = {}
    for year in corpus.core_years:
        model = models[year]
        if model.is_degenerate:
            continue
        cohort_ids, _ = _cohort_rows(corpus, matrix, year)
        full = matrix.data[[row_of[pid] for pid in cohort_ids]].astype(np.float64)
        sets = []
        for k in range(model.n_clusters):
            members = model.strong_members(k)
            texts = [
                corpus[cohort_ids[i]].title + " " + corpus[cohort_ids[i]].abstract
                for i in members
            ]
            phrases = keyphrases_mod.candidates(
                texts, ngram_range=(1, kc["ngram_max"]), min_df=kc["min_df"]
            )
            if not phrases:
                sets.append(keyphrases_mod.KeyphraseSet(cluster_id=k, phrases=[]))
                continue
            phrase_vecs = _embed_phrases(cfg, phrases)
            centroid = events_mod.centroid(members, full)
            sets.append(
                keyphrases_mod.rank(
                    phrases, phrase_vecs, centroid,
                    k=kc["k"], lam=kc["lambda"], cluster_id=k,
                )
            )
        per_year[year] = sets
    path = out / "keyphrases.csv"
    keyphrases_mod.write_keyphrases_csv(per_year, path)
    _write_manifest("keyphrases", cfg, [corpus_path, emb_path], [path])
    return [path]


def _embed_phrases(cfg: dict, phrases: list[str]) -> np.ndarray:
    """Phrase embeddings via the embedder executable when configured,
    otherwise the in-process stub."""
    embedder = cfg["embedder"]
    if embedder.get("executable"):
        import tempfile

        with tempfile.TemporaryDirectory() as tmp:
            req = Path(tmp) / "phrases.jsonl"
            with open(req, "w", encoding="utf-8") as fh:
                for i, p in enumerate(phrases):
                    fh.write(json.dumps({"id": f"phrase-{i}", "title": p,
                                         "abstract": "", "year": 2000}) + "\n")
            out_path = Path(tmp) / "phrases.vesp"
            cmd = [
                embedder["executable"], str(req), str(out_path),
                "--mode", embedder.get("mode", "stub"),
                "--seed", str(cfg["seed"]),
                "--phrases",
            ]
            if embedder.get("model_path"):
                cmd += ["--model-path", embedder["model_path"]]
            proc = subprocess.run(cmd, capture_output=True, text=True)
            if proc.returncode != 0:
                raise DataError(
                    f"embedder executable failed ({proc.returncode}): {proc.stderr.strip()}"
                )
            return read_embeddings(out_path).data.astype(np.float64)
    return stub_embed(phrases, cfg["seed"]).data.astype(np.float64)


def stage_predict(cfg: dict) -> list[Path]:
    corpus, matrix, corpus_path, emb_path = _load_inputs(cfg)
    out = _out_dir(cfg)
    models = _load_year_models(cfg, corpus)
    groups_path = out / "groups.json"
    scores_path = out / "scores.csv"
    if not groups_path.exists() or not scores_path.exists():
        raise DataError("predict needs events and score artifacts; run those stages first")
    groups_doc = json.loads(groups_path.read_text(encoding="utf-8"))

    scores_by_year: dict[int, list] = {}
    with open(scores_path, "r", encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            pid, year, cluster_id, is_weak, id_text, id_net = line.rstrip("\n").split(",")
            s = scoring_mod.InterdisciplinarityScore(
                paper_id=pid,
                year=int(year),
                cluster_id=int(cluster_id),
                is_weak=bool(int(is_weak)),
                id_text=float(id_text) if id_text else None,
                id_network=float(id_net),
            )
            scores_by_year.setdefault(s.year, []).append(s)

    rows = []
    for year_str, cluster_groups in sorted(groups_doc.items()):
        year = int(year_str)
        groups = {
            int(c): events_mod.EventGroup(v) for c, v in cluster_groups.items()
        }
        rows.extend(
            predict_mod.build_features(
                year,
                models.get(year),
                scores_by_year.get(year, []),
                groups,
                language_mean_includes_weak=cfg["predict"]["language_mean_includes_weak"],
            )
        )
    if not rows:
        raise DataError("no feature rows; is the timeline long enough?")

    features_path = out / "features.csv"
    predict_mod.write_features_csv(rows, features_path)

    pc = cfg["predict"]
    years = sorted({r.year for r in rows})
    test_year = pc["test_year"] if pc["test_year"] is not None else years[-1]
    train_years = pc["train_years"] if pc["train_years"] else [y for y in years if y != test_year]
    train, test = predict_mod.split_by_year(rows, train_years, test_year)

    X_all, y_all, names = predict_mod.feature_matrix(rows)
    # constant columns carry no information and would break the regression
    keep = [j for j in range(X_all.shape[1]) if X_all[:, j].std() > 0.0]
    dropped = [names[j] for j in range(X_all.shape[1]) if j not in keep]
    if dropped:
        log.warning("dropping constant feature column(s): %s", ", ".join(dropped))
    X_all = X_all[:, keep]
    names = [names[j] for j in keep]
    retained, initial, final, initial_ame, final_ame = predict_mod.purposeful_selection(
        X_all, y_all, names
    )

    X_train, y_train, _ = predict_mod.feature_matrix(train, retained)
    X_test, y_test, _ = predict_mod.feature_matrix(test, retained)
    from .forest import fit_forest

    forest = fit_forest(X_train, y_train, seed=cfg["seed"], n_trees=pc["n_trees"],
                        feature_names=retained)
    predicted = forest.predict(X_test)
    probs = forest.predict_proba(X_test)
    metrics = predict_mod.evaluate(y_test.astype(int), predicted)

    predictions_path = out / "predictions.csv"
    predict_mod.write_predictions_csv(test, predicted, probs, predictions_path)
    report_path = out / "fit_report.json"
    report_mod.write_fit_report(
        report_mod.fit_report(initial, final, initial_ame, final_ame, retained,
                              forest=forest, metrics=metrics),
        report_path,
    )
    _write_manifest(
        "predict", cfg,
        [corpus_path, emb_path, groups_path, scores_path],
        [features_path, predictions_path, report_path],
    )
    return [features_path, predictions_path, report_path]


def stage_report(cfg: dict) -> list[Path]:
    corpus, matrix, corpus_path, _ = _load_inputs(cfg)
    out = _out_dir(cfg)
    models = _load_year_models(cfg, corpus)
    outputs = []
    for year in corpus.core_years:
        model = models[year]
        reduced_path = out / f"reduced_{year}.vesp"
        if not reduced_path.exists() or model.is_degenerate:
            continue
        reduced = read_embeddings(reduced_path)
        id_text = []
        for i in range(model.n_points):
            if model.labels[i] < 0 or model.membership is None:
                id_text.append(None)
            else:
                id_text.append(
                    scoring_mod.language_id(model.membership[i], float(model.weak_mass[i]))
                    if model.n_clusters >= 2 else 0.0
                )
        path = out / f"plot_{year}.svg"
        report_mod.render_year_svg(
            reduced.data.astype(np.float64), model.labels, id_text, path,
            title=f"clusters {year}",
        )
        outputs.append(path)
    _write_manifest("report", cfg, [corpus_path], outputs)
    return outputs


def stage_synth(cfg: dict) -> list[Path]:
    sc = cfg.get("synth")
    if not sc:
        raise ConfigError("synth stage needs a 'synth' config block")
    spec = TimelineSpec(
        years=tuple(sc["years"]),
        blobs=tuple(BlobYear(**b) for b in sc["blobs"]),
        events=tuple(PlantedEvent(**e) for e in sc["events"]),
        p_in=sc.get("p_in", 0.25),
        p_out=sc.get("p_out", 0.004),
        bridges=sc.get("bridges", 0),
        seed=cfg["seed"],
    )
    timeline = gen_timeline(spec)
    out = _out_dir(cfg)
    corpus_path = out / "corpus.jsonl"
    write_corpus(timeline.corpus, corpus_path)
    emb_path = out / "embeddings.vesp"
    write_embeddings(timeline.embeddings, emb_path)

    truth_events = out / "truth_events.csv"
    with open(truth_events, "w", encoding="utf-8") as fh:
        fh.write("year,kind,parents,children\n")
        for ev in spec.events:
            fh.write(f"{ev.year},{ev.kind},{'|'.join(ev.parents)},{'|'.join(ev.children)}\n")
    truth_groups_path = out / "truth_groups.csv"
    with open(truth_groups_path, "w", encoding="utf-8") as fh:
        fh.write("year,blob,group\n")
        for (year, blob), grp in sorted(timeline.truth_groups.items()):
            fh.write(f"{year},{blob},{grp}\n")
    truth_papers = out / "truth_papers.csv"
    with open(truth_papers, "w", encoding="utf-8") as fh:
        fh.write("paper_id,blob,is_satellite\n")
        for pid in sorted(timeline.blob_of):
            fh.write(f"{pid},{timeline.blob_of[pid]},{int(timeline.satellite[pid])}\n")

    outputs = [corpus_path, emb_path, Path(str(emb_path) + ".manifest.json"),
               truth_events, truth_groups_path, truth_papers]
    _write_manifest("synth", cfg, [], outputs)
    return outputs


STAGES = {
    "ingest": stage_ingest,
    "embed": stage_embed,
    "reduce": stage_reduce,
    "cluster": stage_cluster,
    "graph": stage_graph,
    "score": stage_score,
    "events": stage_events,
    "compare": stage_compare,
    "keyphrases": stage_keyphrases,
    "predict": stage_predict,
    "report": stage_report,
    "synth": stage_synth,
}

PIPELINE_ORDER = [
    "ingest", "embed", "reduce", "cluster", "graph", "score", "events",
    "compare", "keyphrases", "predict", "report",
]


def stage_pipeline(cfg: dict) -> list[Path]:
    outputs = []
    out = _out_dir(cfg)
    for name in PIPELINE_ORDER:
        if name == "ingest" and not cfg["paths"]["corpus"] and (out / "corpus.jsonl").exists():
            continue  # synthetic corpora are already normalized in out_dir
        if name == "embed" and (
            cfg["paths"]["embeddings"] or (out / "embeddings.vesp").exists()
        ):
            emb = cfg["paths"]["embeddings"]
            if emb and not (out / "embeddings.vesp").exists():
                data = read_embeddings(emb)
                write_embeddings(data, out / "embeddings.vesp")
            continue
        log.info("pipeline stage: %s", name)
        outputs.extend(STAGES[name](cfg))
    return outputs


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="topicflow",
        description="Topic evolution analytics over embeddings and citations",
    )
    parser.add_argument("--config", help="JSON config document")
    parser.add_argument("--out-dir", help="output directory (overrides config)")
    parser.add_argument("--corpus", help="corpus JSONL path (overrides config)")
    parser.add_argument("--embeddings", help="VESP-EMB file path (overrides config)")
    parser.add_argument("--seed", type=int, help="master seed (overrides config)")
    parser.add_argument("--threads", type=int, help="parallelism bound (overrides config)")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("command", choices=SUBCOMMANDS, metavar="command",
                        help=f"one of: {', '.join(SUBCOMMANDS)}")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    overrides: dict = {"paths": {}}
    if args.out_dir:
        overrides["paths"]["out_dir"] = args.out_dir
    if args.corpus:
        overrides["paths"]["corpus"] = args.corpus
    if args.embeddings:
        overrides["paths"]["embeddings"] = args.embeddings
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.threads is not None:
        overrides["threads"] = args.threads

    try:
        cfg = load_config(args.config, overrides)
        if args.command == "pipeline":
            stage_pipeline(cfg)
        else:
            STAGES[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except TopicflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
