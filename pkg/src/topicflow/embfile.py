"""VESP-EMB v1 embedding files.

Layout: magic ``VESP``, u16 version (=1), u16 flags (=0), u32 n_rows,
u32 n_cols, then the row-major little-endian float32 payload.  A sidecar
JSON manifest (``<path>.manifest.json``) carries the row ids, the id of the
model that produced the vectors, and the SHA-256 of the payload bytes.
All header integers are little-endian.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._util import sha256_bytes
from .errors import FormatError

MAGIC = b"VESP"
VERSION = 1
_HEADER = struct.Struct("<4sHHII")


@dataclass
class EmbeddingMatrix:
    """Dense float32 embedding matrix with a row-aligned id manifest."""

    data: np.ndarray
    ids: list[str] = field(default_factory=list)
    model_id: str = "unknown"

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 2:
            raise FormatError(f"embedding matrix must be 2-D, got shape {self.data.shape}")
        self.ids = list(self.ids)
        if len(self.ids) != self.data.shape[0]:
            raise FormatError(
                f"manifest has {len(self.ids)} ids for {self.data.shape[0]} rows"
            )
        if self.data.size and not np.all(np.isfinite(self.data)):
            raise FormatError("embedding matrix contains non-finite values")

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]

    @property
    def n_cols(self) -> int:
        return self.data.shape[1]

    @property
    def payload_sha256(self) -> str:
        return sha256_bytes(self.data.tobytes())

    def row_for(self, paper_id: str) -> np.ndarray:
        return self.data[self.ids.index(paper_id)]


def manifest_path(path) -> Path:
    return Path(str(path) + ".manifest.json")


def write_embeddings(matrix: EmbeddingMatrix, path) -> Path:
    """Write the binary file plus its sidecar manifest; returns the manifest path."""
    path = Path(path)
    payload = matrix.data.astype("<f4", copy=False).tobytes()
    header = _HEADER.pack(MAGIC, VERSION, 0, matrix.n_rows, matrix.n_cols)
    path.write_bytes(header + payload)
    sidecar = manifest_path(path)
    doc = {
        "ids": matrix.ids,
        "model_id": matrix.model_id,
        "payload_sha256": sha256_bytes(payload),
    }
    sidecar.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return sidecar


def read_embeddings(path) -> EmbeddingMatrix:
    """Read and validate a VESP-EMB v1 file and its manifest."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, flags, n_rows, n_cols = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if flags != 0:
        raise FormatError(f"{path}: unsupported flags {flags:#06x}")
    payload = blob[_HEADER.size:]
    expected = 4 * n_rows * n_cols
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload is {len(payload)} bytes, header implies {expected}"
        )

    sidecar = manifest_path(path)
    if not sidecar.exists():
        raise FormatError(f"{path}: missing manifest {sidecar}")
    doc = json.loads(sidecar.read_text(encoding="utf-8"))
    ids = doc.get("ids")
    if not isinstance(ids, list):
        raise FormatError(f"{sidecar}: manifest lacks an id list")
    if len(ids) != n_rows:
        raise FormatError(f"{sidecar}: {len(ids)} ids for {n_rows} rows")
    digest = sha256_bytes(payload)
    if doc.get("payload_sha256") != digest:
        raise FormatError(f"{path}: payload hash mismatch")

    data = np.frombuffer(payload, dtype="<f4").reshape(n_rows, n_cols)
    return EmbeddingMatrix(data=data.copy(), ids=ids, model_id=doc.get("model_id", "unknown"))
