"""Deterministic stand-in embeddings for offline runs and CI.

Each vector is a pure function of (item id, seed): 768 standard-normal
draws from a Philox counter-based generator keyed with
SHA-256(utf8(id) || 0x00 || u64le(seed)), then L2-normalized.  Text content
is deliberately ignored so fixtures stay stable under copy edits.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .embfile import EmbeddingMatrix

STUB_DIM = 768
STUB_MODEL_ID = "stub-hash-v1"


def stub_vector(item_id: str, seed: int, dim: int = STUB_DIM) -> np.ndarray:
    digest = hashlib.sha256(
        item_id.encode("utf-8") + b"\x00" + int(seed).to_bytes(8, "little")
    ).digest()
    key = int.from_bytes(digest[:16], "little")  # Philox takes a 128-bit key
    rng = np.random.Generator(np.random.Philox(key=key))
    vec = rng.standard_normal(dim).astype(np.float32)
    norm = np.linalg.norm(vec)
    if norm == 0.0:  # unreachable in practice, keeps the contract total
        vec[0] = 1.0
        norm = 1.0
    return vec / norm


def stub_embed(item_ids: list[str], seed: int, dim: int = STUB_DIM) -> EmbeddingMatrix:
    """Embed ids in manifest order; duplicates yield identical rows."""
    data = np.empty((len(item_ids), dim), dtype=np.float32)
    for i, item_id in enumerate(item_ids):
        data[i] = stub_vector(item_id, seed, dim)
    return EmbeddingMatrix(data=data, ids=list(item_ids), model_id=STUB_MODEL_ID)
