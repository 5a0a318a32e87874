"""Paper corpus: record schema, JSONL ingestion, windowing, embedding alignment.

A corpus is a validated id-indexed set of :class:`PaperRecord`.  References
that do not resolve to a record are kept as *dangling* ids: they are counted
and reported but never become graph nodes or window members.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator

from .embfile import EmbeddingMatrix
from .errors import AlignmentError, CorpusError

YEAR_MIN = 1800
YEAR_MAX = 2100


@dataclass(frozen=True)
class PaperRecord:
    """One publication: identity, text, year, references, core-sample flag."""

    id: str
    title: str
    abstract: str
    year: int
    references: tuple[str, ...] = ()
    doi: str | None = None
    venue: str | None = None
    is_core: bool = True

    def validate(self) -> None:
        if not self.id:
            raise CorpusError("paper id must be nonempty")
        if not isinstance(self.year, int) or isinstance(self.year, bool):
            raise CorpusError(f"{self.id}: year must be an integer, got {self.year!r}")
        if not YEAR_MIN <= self.year <= YEAR_MAX:
            raise CorpusError(f"{self.id}: year {self.year} outside [{YEAR_MIN}, {YEAR_MAX}]")
        if self.id in self.references:
            raise CorpusError(f"{self.id}: record references itself")


@dataclass(frozen=True)
class ParseIssue:
    line: int
    message: str


@dataclass
class Corpus:
    """Id-indexed collection of papers plus parse diagnostics."""

    papers: dict[str, PaperRecord] = field(default_factory=dict)
    issues: tuple[ParseIssue, ...] = field(default_factory=tuple, compare=False)

    def __len__(self) -> int:
        return len(self.papers)

    def __contains__(self, paper_id: str) -> bool:
        return paper_id in self.papers

    def __getitem__(self, paper_id: str) -> PaperRecord:
        return self.papers[paper_id]

    @property
    def core_years(self) -> list[int]:
        return sorted({p.year for p in self.papers.values() if p.is_core})

    @property
    def dangling_ids(self) -> set[str]:
        out: set[str] = set()
        for p in self.papers.values():
            out.update(r for r in p.references if r not in self.papers)
        return out

    def resolvable_reference_count(self) -> int:
        return sum(
            1 for p in self.papers.values() for r in p.references if r in self.papers
        )

    def core_papers(self, year: int | None = None) -> list[PaperRecord]:
        out = [p for p in self.papers.values() if p.is_core]
        if year is not None:
            out = [p for p in out if p.year == year]
        return sorted(out, key=lambda p: p.id)


def _record_from_obj(obj: dict, line_no: int, issues: list[ParseIssue]) -> PaperRecord:
    refs = obj.get("references", [])
    if not isinstance(refs, list) or not all(isinstance(r, str) for r in refs):
        raise CorpusError("references must be a list of paper ids")
    paper_id = obj.get("id")
    if not isinstance(paper_id, str) or not paper_id:
        raise CorpusError("missing or empty id")
    # Self-references are normalized away rather than rejected; they occur
    # in the wild and carry no information.
    clean_refs = []
    for r in refs:
        if r == paper_id:
            issues.append(ParseIssue(line_no, f"{paper_id}: self-reference dropped"))
        elif r not in clean_refs:
            clean_refs.append(r)
    rec = PaperRecord(
        id=paper_id,
        title=str(obj.get("title", "")),
        abstract=str(obj.get("abstract", "")),
        year=obj.get("year"),
        references=tuple(clean_refs),
        doi=obj.get("doi"),
        venue=obj.get("venue"),
        is_core=bool(obj.get("is_core", True)),
    )
    rec.validate()
    return rec


def parse_corpus(stream: Iterable[str] | IO[str]) -> Corpus:
    """Parse newline-delimited JSON records into a validated corpus.

    Malformed lines and out-of-range years are collected as issues and the
    offending record skipped; a duplicate id is fatal because it would make
    every downstream join ambiguous.
    """
    papers: dict[str, PaperRecord] = {}
    issues: list[ParseIssue] = []
    for line_no, line in enumerate(stream, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            issues.append(ParseIssue(line_no, f"malformed JSON: {exc.msg}"))
            continue
        if not isinstance(obj, dict):
            issues.append(ParseIssue(line_no, "record is not a JSON object"))
            continue
        try:
            rec = _record_from_obj(obj, line_no, issues)
        except CorpusError as exc:
            issues.append(ParseIssue(line_no, str(exc)))
            continue
        if rec.id in papers:
            raise CorpusError(f"line {line_no}: duplicate paper id {rec.id!r}")
        papers[rec.id] = rec
    return Corpus(papers=papers, issues=tuple(issues))


def serialize_corpus(corpus: Corpus) -> Iterator[str]:
    """Yield one JSONL line per paper, in id order, round-trip stable."""
    for pid in sorted(corpus.papers):
        p = corpus.papers[pid]
        obj = {
            "id": p.id,
            "title": p.title,
            "abstract": p.abstract,
            "year": p.year,
            "references": list(p.references),
            "is_core": p.is_core,
        }
        if p.doi is not None:
            obj["doi"] = p.doi
        if p.venue is not None:
            obj["venue"] = p.venue
        yield json.dumps(obj, sort_keys=True, ensure_ascii=False)


def write_corpus(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in serialize_corpus(corpus):
            fh.write(line + "\n")


def load_corpus(path) -> Corpus:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_corpus(fh)


@dataclass
class CorpusWindow:
    """Papers visible at year ``t``: everything published then or earlier,
    plus any paper referenced by a member (kept even when its recorded year
    exceeds ``t``, a known wild-data artifact; such papers never join the
    cohort)."""

    t: int
    papers: dict[str, PaperRecord]
    cohort: frozenset[str]

    def __len__(self) -> int:
        return len(self.papers)

    def __contains__(self, paper_id: str) -> bool:
        return paper_id in self.papers


def window(corpus: Corpus, t: int) -> CorpusWindow:
    """Time window G(t) membership: papers from year ``t`` and earlier plus
    their resolvable references."""
    if not isinstance(t, int) or isinstance(t, bool):
        raise CorpusError(f"window year must be an integer, got {t!r}")
    members = {pid: p for pid, p in corpus.papers.items() if p.year <= t}
    for p in list(members.values()):
        for ref in p.references:
            rec = corpus.papers.get(ref)
            if rec is not None and ref not in members:
                members[ref] = rec
    cohort = frozenset(pid for pid, p in members.items() if p.is_core and p.year == t)
    return CorpusWindow(t=t, papers=members, cohort=cohort)


@dataclass
class AlignedView:
    """Bidirectional paper-id <-> embedding-row mapping."""

    row_of: dict[str, int]
    id_of: list[str]

    def rows_for(self, paper_ids: Iterable[str]) -> list[int]:
        return [self.row_of[pid] for pid in paper_ids]


def align_embeddings(corpus: Corpus, matrix: EmbeddingMatrix) -> AlignedView:
    """Map matrix rows onto corpus papers; manifest ids must be unique and known."""
    row_of: dict[str, int] = {}
    for row, pid in enumerate(matrix.ids):
        if pid in row_of:
            raise AlignmentError(f"duplicate id {pid!r} in embedding manifest")
        if pid not in corpus.papers:
            raise AlignmentError(f"embedding id {pid!r} not present in corpus")
        row_of[pid] = row
    return AlignedView(row_of=row_of, id_of=list(matrix.ids))
