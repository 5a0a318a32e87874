"""Thin open-metadata HTTP client used to backfill record fields by DOI.

Speaks JSON over HTTP(S): GET <base_url>/<doi> returns one record with any
of title/abstract/year/references.  Rate limited, bounded retries with
exponential backoff on 429/5xx and connection errors.  Merging never
overwrites a nonempty local field.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import requests

from .corpus import Corpus, PaperRecord
from .errors import ConfigError, DataError

log = logging.getLogger(__name__)

RETRYABLE = {429, 500, 502, 503, 504}


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    batch_size: int = 50
    rate_limit_per_sec: float = 10.0
    max_retries: int = 3
    backoff_base: float = 0.5
    timeout: float = 10.0

    def validate(self) -> None:
        if not self.base_url:
            raise ConfigError("metadata endpoint base_url is required")
        if self.batch_size < 1 or self.rate_limit_per_sec <= 0 or self.max_retries < 0:
            raise ConfigError("invalid metadata endpoint configuration")


@dataclass
class MetadataFragment:
    doi: str
    title: str | None = None
    abstract: str | None = None
    year: int | None = None
    references: list[str] = field(default_factory=list)


def _parse_fragment(doi: str, obj) -> MetadataFragment:
    if not isinstance(obj, dict):
        raise DataError("response is not a JSON object")
    year = obj.get("year")
    if year is not None and not isinstance(year, int):
        raise DataError(f"bad year {year!r}")
    refs = obj.get("references", [])
    if not isinstance(refs, list) or not all(isinstance(r, str) for r in refs):
        raise DataError("bad references list")
    return MetadataFragment(
        doi=doi,
        title=obj.get("title"),
        abstract=obj.get("abstract"),
        year=year,
        references=list(refs),
    )


def fetch_metadata(
    doi_batch: list[str],
    config: EndpointConfig,
    session: requests.Session | None = None,
    sleep=time.sleep,
) -> list[MetadataFragment]:
    """Fetch one fragment per DOI; malformed responses are skipped with a
    warning, retryable failures back off exponentially up to the retry cap."""
    config.validate()
    if len(doi_batch) > config.batch_size:
        raise DataError(
            f"batch of {len(doi_batch)} exceeds configured size {config.batch_size}"
        )
    if not doi_batch:
        return []
    own_session = session is None
    session = session or requests.Session()
    interval = 1.0 / config.rate_limit_per_sec
    fragments = []
    try:
        for i, doi in enumerate(doi_batch):
            if i:
                sleep(interval)
            url = config.base_url.rstrip("/") + "/" + doi
            obj = _get_with_retries(session, url, config, sleep)
            if obj is None:
                continue
            try:
                fragments.append(_parse_fragment(doi, obj))
            except DataError as exc:
                log.warning("skipping %s: %s", doi, exc)
    finally:
        if own_session:
            session.close()
    return fragments


def _get_with_retries(session, url, config: EndpointConfig, sleep):
    last_error = None
    for attempt in range(config.max_retries + 1):
        if attempt:
            sleep(config.backoff_base * 2 ** (attempt - 1))
        try:
            resp = session.get(url, timeout=config.timeout)
        except requests.RequestException as exc:
            last_error = str(exc)
            continue
        if resp.status_code == 200:
            try:
                return resp.json()
            except ValueError:
                log.warning("malformed JSON from %s; skipped", url)
                return None
        if resp.status_code in RETRYABLE:
            last_error = f"HTTP {resp.status_code}"
            continue
        raise DataError(f"{url}: HTTP {resp.status_code}")
    raise DataError(f"{url}: giving up after {config.max_retries + 1} attempts ({last_error})")


def merge_fragments(corpus: Corpus, fragments: list[MetadataFragment]) -> int:
    """Fill empty fields of DOI-matched records; returns the merge count."""
    by_doi = {p.doi: pid for pid, p in corpus.papers.items() if p.doi}
    merged = 0
    for frag in fragments:
        pid = by_doi.get(frag.doi)
        if pid is None:
            log.warning("fragment for unknown DOI %s ignored", frag.doi)
            continue
        rec = corpus.papers[pid]
        updates = {}
        if frag.title and not rec.title:
            updates["title"] = frag.title
        if frag.abstract and not rec.abstract:
            updates["abstract"] = frag.abstract
        if frag.references and not rec.references:
            updates["references"] = tuple(r for r in frag.references if r != pid)
        if updates:
            corpus.papers[pid] = replace(rec, **updates)
            merged += 1
    return merged
