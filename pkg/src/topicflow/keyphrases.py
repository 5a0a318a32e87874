"""Cluster labeling with embedding-ranked keyphrases.

Candidate phrases are frequent n-grams from the cluster's strong-member
titles and abstracts, filtered so no phrase starts or ends with a stopword;
ranking is greedy maximal-marginal-relevance against the cluster centroid,
trading off relevance and redundancy with weight ``lam``.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass

import numpy as np

from ._util import fmt_float
from .errors import DataError

NGRAM_RANGE = (1, 3)
MIN_DF = 2
TOP_CANDIDATES = 100
DEFAULT_K = 5
DEFAULT_LAMBDA = 0.6

_TOKEN = re.compile(r"[a-z0-9]+(?:-[a-z0-9]+)*")

# Classic English stopword list (Glasgow IR), pinned in-repo so candidate
# generation cannot drift with library upgrades.
STOPWORDS = frozenset("""
a about above across after afterwards again against all almost alone along
already also although always am among amongst amoungst amount an and another
any anyhow anyone anything anyway anywhere are around as at back be became
because become becomes becoming been before beforehand behind being below
beside besides between beyond bill both bottom but by call can cannot cant
co con could couldnt cry de describe detail do done down due during each eg
eight either eleven else elsewhere empty enough etc even ever every everyone
everything everywhere except few fifteen fifty fill find fire first five for
former formerly forty found four from front full further get give go had has
hasnt have he hence her here hereafter hereby herein hereupon hers herself
him himself his how however hundred i ie if in inc indeed interest into is
it its itself keep last latter latterly least less ltd made many may me
meanwhile might mill mine more moreover most mostly move much must my myself
name namely neither never nevertheless next nine no nobody none noone nor
not nothing now nowhere of off often on once one only onto or other others
otherwise our ours ourselves out over own part per perhaps please put rather
re same see seem seemed seeming seems serious several she should show side
since sincere six sixty so some somehow someone something sometime sometimes
somewhere still such system take ten than that the their them themselves
then thence there thereafter thereby therefore therein thereupon these they
thick thin third this those though three through throughout thru thus to
together too top toward towards twelve twenty two un under until up upon us
very via was we well were what whatever when whence whenever where whereafter
whereas whereby wherein whereupon wherever whether which while whither who
whoever whole whom whose why will with within without would yet you your
yours yourself yourselves
""".split())


@dataclass
class KeyphraseSet:
    cluster_id: int
    phrases: list[tuple[str, float]]  # (phrase, score), scores nonincreasing
    ngram_range: tuple[int, int] = NGRAM_RANGE
    k: int = DEFAULT_K
    lam: float = DEFAULT_LAMBDA


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def candidates(
    cluster_texts: list[str],
    ngram_range: tuple[int, int] = NGRAM_RANGE,
    min_df: int = MIN_DF,
    stopwords: frozenset[str] = STOPWORDS,
    top: int = TOP_CANDIDATES,
) -> list[str]:
    """Frequent boundary-clean n-grams, ranked by document frequency
    (ties break lexicographically)."""
    lo, hi = ngram_range
    df: dict[str, int] = {}
    for text in cluster_texts:
        tokens = tokenize(text)
        grams = set()
        for size in range(lo, hi + 1):
            for i in range(len(tokens) - size + 1):
                gram = tokens[i:i + size]
                if gram[0] in stopwords or gram[-1] in stopwords:
                    continue
                grams.add(" ".join(gram))
        for g in grams:
            df[g] = df.get(g, 0) + 1
    kept = [(g, c) for g, c in df.items() if c >= min_df]
    kept.sort(key=lambda item: (-item[1], item[0]))
    return [g for g, _ in kept[:top]]


def _cosine_matrix(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    na = np.linalg.norm(A, axis=1, keepdims=True)
    nb = np.linalg.norm(B, axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = (A @ B.T) / (na * nb.T)
    return np.nan_to_num(out, nan=0.0)


def rank(
    phrases: list[str],
    phrase_embeddings: np.ndarray,
    centroid: np.ndarray,
    k: int = DEFAULT_K,
    lam: float = DEFAULT_LAMBDA,
    cluster_id: int = 0,
) -> KeyphraseSet:
    """Greedy MMR selection of up to ``k`` phrases.

    The first pick scores pure relevance; later picks score
    lam * relevance - (1 - lam) * max-similarity-to-selected.  Ties break
    on the lexicographically smaller phrase.
    """
    E = np.asarray(phrase_embeddings, dtype=np.float64)
    if E.shape[0] != len(phrases):
        raise DataError("one embedding row per candidate phrase required")
    if len(phrases) == 0:
        return KeyphraseSet(cluster_id=cluster_id, phrases=[], k=k, lam=lam)

    relevance = _cosine_matrix(E, np.asarray(centroid, dtype=np.float64)[None, :])[:, 0]
    sims = _cosine_matrix(E, E)

    order = sorted(range(len(phrases)), key=lambda i: (-relevance[i], phrases[i]))
    selected = [order[0]]
    scores = [float(relevance[order[0]])]
    remaining = [i for i in order[1:]]
    while remaining and len(selected) < k:
        best_i, best_score = None, -np.inf
        for i in remaining:
            score = lam * relevance[i] - (1.0 - lam) * float(sims[i, selected].max())
            if score > best_score or (
                score == best_score and phrases[i] < phrases[best_i]
            ):
                best_i, best_score = i, score
        selected.append(best_i)
        scores.append(float(best_score))
        remaining.remove(best_i)

    return KeyphraseSet(
        cluster_id=cluster_id,
        phrases=[(phrases[i], s) for i, s in zip(selected, scores)],
        k=k,
        lam=lam,
    )


def write_keyphrases_csv(per_year: dict[int, list[KeyphraseSet]], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["year", "cluster_id", "rank", "phrase", "score"])
        for year in sorted(per_year):
            for ks in sorted(per_year[year], key=lambda s: s.cluster_id):
                for pos, (phrase, score) in enumerate(ks.phrases, start=1):
                    w.writerow([year, ks.cluster_id, pos, phrase, fmt_float(score)])
