"""Exact cosine-distance index over canonical-name vectors."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import NormalizedName
from .embedder import ModelParams, encode_many


class DimensionError(ValueError):
    pass


@dataclass
class VectorIndex:
    names: list[NormalizedName]
    vectors: np.ndarray  # (N, d), unit rows

    def __post_init__(self):
        keys = [n.key for n in self.names]
        if len(set(keys)) != len(keys):
            dupes = sorted({k for k in keys if keys.count(k) > 1})
            raise ValueError(f"duplicate canonical keys: {dupes}")
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.names):
            raise ValueError("vectors must be an (N, d) array aligned with names")
        # ties in query results are broken by key, so keep a key-sorted order
        self._by_key = np.argsort(np.array(keys, dtype=object), kind="stable")
        self._key_rank = np.empty(len(keys), dtype=np.int64)
        self._key_rank[self._by_key] = np.arange(len(keys))

    @property
    def dims(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.names)

    def to_bytes(self) -> bytes:
        out = [struct.pack("<QQ", len(self.names), self.dims)]
        for name, vec in zip(self.names, self.vectors):
            key, disp = name.key.encode("utf-8"), name.display.encode("utf-8")
            out += [struct.pack("<I", len(key)), key, struct.pack("<I", len(disp)), disp,
                    np.ascontiguousarray(vec, dtype="<f8").tobytes()]
        return b"".join(out)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "VectorIndex":
        n, d = struct.unpack_from("<QQ", blob, 0)
        off = 16
        names, rows = [], []
        for _ in range(n):
            (klen,) = struct.unpack_from("<I", blob, off)
            key = blob[off + 4 : off + 4 + klen].decode("utf-8")
            off += 4 + klen
            (dlen,) = struct.unpack_from("<I", blob, off)
            disp = blob[off + 4 : off + 4 + dlen].decode("utf-8")
            off += 4 + dlen
            rows.append(np.frombuffer(blob, dtype="<f8", count=d, offset=off).astype(np.float64))
            off += 8 * d
            names.append(NormalizedName(key, disp))
        if off != len(blob):
            raise ValueError("index file has trailing bytes")
        vectors = np.vstack(rows) if rows else np.zeros((0, d))
        return cls(names, vectors)

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: str | Path) -> "VectorIndex":
        return cls.from_bytes(Path(path).read_bytes())


def build_index(params: ModelParams, canonicals: Sequence[NormalizedName]) -> VectorIndex:
    if not canonicals:
        raise ValueError("no canonical names to index")
    seen = set()
    for c in canonicals:
        if c.key in seen:
            raise ValueError(f"duplicate canonical key: {c.key!r}")
        seen.add(c.key)
    try:
        vectors = encode_many(params, list(canonicals))
    except ValueError:
        for c in canonicals:
            try:
                encode_many(params, [c])
            except ValueError as exc:
                raise ValueError(f"cannot encode canonical {c.display!r}: {exc}") from exc
        raise
    return VectorIndex(list(canonicals), vectors)


def cosine_distances(index: VectorIndex, vs: np.ndarray) -> np.ndarray:
    """(N, M) distances 1 - dot for M query vectors given as rows of ``vs``.

    Dot products are reduced per entry rather than through BLAS so a value
    never depends on how many queries share the call.
    """
    vs = np.atleast_2d(np.asarray(vs, dtype=float))
    if vs.shape[1] != index.dims:
        raise DimensionError(f"vector has {vs.shape[1]} dims, index has {index.dims}")
    n, m = len(index), vs.shape[0]
    out = np.empty((n, m))
    step = max(1, 2_000_000 // max(1, n * index.dims))
    for start in range(0, m, step):
        block = vs[start : start + step]
        out[:, start : start + len(block)] = (index.vectors[:, None, :] * block[None, :, :]).sum(axis=2)
    return np.clip(1.0 - out, 0.0, 2.0)


def _ranking(index: VectorIndex, dist: np.ndarray) -> np.ndarray:
    # primary: distance ascending; secondary: canonical key ascending
    return np.lexsort((index._key_rank, dist))


def query(index: VectorIndex, v: np.ndarray, k: int) -> list[tuple[NormalizedName, float]]:
    if k < 1:
        raise ValueError("k must be >= 1")
    dist = cosine_distances(index, np.asarray(v, dtype=float).reshape(1, -1))[:, 0]
    order = _ranking(index, dist)[:k]
    return [(index.names[i], float(dist[i])) for i in order]


@dataclass
class DistanceMatrix:
    """R[i, j] = cosine distance between canonical i and synonym j."""

    R: np.ndarray
    rows: list[NormalizedName]

    def ranking(self, index: VectorIndex, j: int) -> np.ndarray:
        return _ranking(index, self.R[:, j])


def build_matrix(index: VectorIndex, synonyms: np.ndarray) -> DistanceMatrix:
    return DistanceMatrix(cosine_distances(index, synonyms), list(index.names))
