"""Hashed term frequencies, IDF weighting and design-matrix assembly."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DataError

DEFAULT_DIM = 1 << 15

_FNV_OFFSET = 0x811C9DC5
_FNV_PRIME = 0x01000193


@lru_cache(maxsize=1 << 16)
def fnv1a_32(token: str) -> int:
    """32-bit FNV-1a hash of the token's UTF-8 bytes."""
    h = _FNV_OFFSET
    for byte in token.encode("utf-8"):
        h ^= byte
        h = (h * _FNV_PRIME) & 0xFFFFFFFF
    return h


@dataclass(frozen=True, eq=False)
class SparseVector:
    dim: int
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        if idx.shape != val.shape:
            raise ValueError("indices and values differ in length")
        if idx.size and (np.any(np.diff(idx) <= 0) or idx[0] < 0 or idx[-1] >= self.dim):
            raise ValueError("indices must be strictly increasing and inside [0, dim)")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    def __len__(self):
        return len(self.indices)

    def to_dense(self):
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out


def hashing_tf(tokens: Sequence[str], dim: int = DEFAULT_DIM) -> SparseVector:
    """Occurrence counts of ``tokens`` in ``dim`` hashed buckets."""
    if dim <= 0:
        raise ValueError("dim must be positive")
    counts = {}
    for tok in tokens:
        b = fnv1a_32(tok) % dim
        counts[b] = counts.get(b, 0) + 1
    idx = sorted(counts)
    return SparseVector(dim, np.array(idx, dtype=np.int64), np.array([counts[i] for i in idx], dtype=np.float64))


@dataclass(frozen=True, eq=False)
class IdfModel:
    dim: int
    doc_count: int
    idf: np.ndarray

    def to_dict(self):
        return {"dim": self.dim, "doc_count": self.doc_count, "idf": self.idf}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["dim"]), int(d["doc_count"]), np.asarray(d["idf"], dtype=np.float64))


def idf_fit(corpus: Sequence[SparseVector], dim: int) -> IdfModel:
    """Smoothed IDF ``ln((N + 1) / (df + 1))`` per bucket."""
    df = np.zeros(dim, dtype=np.int64)
    for v in corpus:
        if v.dim != dim:
            raise ValueError(f"vector dim {v.dim} does not match {dim}")
        df[v.indices] += 1
    n = len(corpus)
    idf = np.log((n + 1.0) / (df + 1.0))
    return IdfModel(dim, n, idf)


def idf_transform(model: IdfModel, v: SparseVector) -> SparseVector:
    if v.dim != model.dim:
        raise ValueError(f"vector dim {v.dim} does not match model dim {model.dim}")
    vals = v.values * model.idf[v.indices]
    keep = vals != 0.0
    return SparseVector(v.dim, v.indices[keep], vals[keep])


def to_csr(vectors: Sequence[SparseVector], dim: int) -> sp.csr_matrix:
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(v) for v in vectors])
    if vectors:
        indices = np.concatenate([v.indices for v in vectors])
        data = np.concatenate([v.values for v in vectors])
    else:
        indices, data = np.zeros(0, np.int64), np.zeros(0)
    return sp.csr_matrix((data, indices, indptr), shape=(len(vectors), dim))


@dataclass(frozen=True, eq=False)
class SparseBlock:
    """Per-row sparse vectors from one token column."""

    name: str
    dim: int
    vectors: tuple


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Dense numeric block (NaN = missing) followed by sparse blocks.

    ``names`` covers every output column in order.
    """

    dense: np.ndarray
    sparse: sp.csr_matrix | None
    names: tuple

    @property
    def shape(self):
        return (self.dense.shape[0], len(self.names))

    def to_array(self):
        if self.sparse is None:
            return self.dense
        return np.hstack([self.dense, self.sparse.toarray()])


def assemble(frame, numeric_cols: Sequence[str], sparse_blocks: Sequence[SparseBlock] = ()) -> DesignMatrix:
    """Numeric columns in the given order, then each sparse block's buckets."""
    n = frame.n_rows
    dense = np.empty((n, len(numeric_cols)))
    for j, name in enumerate(numeric_cols):
        dense[:, j] = frame[name].as_float()
    names = list(numeric_cols)
    mats = []
    for block in sparse_blocks:
        if len(block.vectors) != n:
            raise DataError(f"block {block.name!r} has {len(block.vectors)} rows, frame has {n}")
        mats.append(to_csr(block.vectors, block.dim))
        width = len(str(max(block.dim - 1, 0)))
        names.extend(f"{block.name}[{b:0{width}d}]" for b in range(block.dim))
    sparse = sp.hstack(mats, format="csr") if mats else None
    return DesignMatrix(dense, sparse, tuple(names))


def tfidf_block(name, token_lists, dim=DEFAULT_DIM, model: IdfModel | None = None):
    """Hash and IDF-weight a token column; fits the IDF model when none is given."""
    tf = [hashing_tf(toks, dim) for toks in token_lists]
    if model is None:
        model = idf_fit(tf, dim)
    return SparseBlock(name, dim, tuple(idf_transform(model, v) for v in tf)), model

