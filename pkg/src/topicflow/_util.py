"""Small shared helpers: hashing, seeding, and stable float formatting."""

from __future__ import annotations

import hashlib
import json

import numpy as np


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_json(obj) -> str:
    """Hash of the canonical JSON encoding (sorted keys, compact separators)."""
    return sha256_bytes(canonical_json(obj).encode("utf-8"))


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def derived_rng(root_seed: int, *spawn_key: int) -> np.random.Generator:
    """Deterministic child generator for a (stage, index, ...) coordinate.

    Children with distinct spawn keys are statistically independent, so
    parallel evaluation order cannot change any stream.
    """
    ss = np.random.SeedSequence(entropy=int(root_seed), spawn_key=tuple(int(k) for k in spawn_key))
    return np.random.Generator(np.random.PCG64(ss))


def fmt_float(x) -> str:
    """Render a float with 6 significant digits (round-half-even) for CSVs."""
    if x is None:
        return ""
    x = float(x)
    if x != x:
        return "nan"
    return format(x, ".6g")
