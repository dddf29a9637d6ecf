import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pumine.dataset import Column, Frame
from pumine.errors import DataError
from pumine.text import (
    SparseBlock, SparseVector, assemble, fnv1a_32, hashing_tf, idf_fit, idf_transform, tfidf_block,
)

tokens = st.lists(st.text(min_size=0, max_size=6), max_size=30)


def test_fnv1a_reference_values():
    # published FNV-1a 32-bit test vectors
    assert fnv1a_32("") == 0x811C9DC5
    assert fnv1a_32("a") == 0xE40C292C
    assert fnv1a_32("foobar") == 0xBF9CF968


def test_counts_without_collision():
    v = hashing_tf(["a", "a", "b"], dim=1 << 20)
    assert sorted(v.values.tolist()) == [1.0, 2.0]
    assert len(v) == 2


def test_empty_and_single_bucket():
    assert len(hashing_tf([], 16)) == 0
    v = hashing_tf(["x", "y", "z", "x"], dim=1)
    assert v.indices.tolist() == [0] and v.values.tolist() == [4.0]


@given(tokens, st.integers(1, 64))
def test_total_mass_equals_token_count(toks, dim):
    v = hashing_tf(toks, dim)
    assert v.values.sum() == len(toks)
    assert np.all(np.diff(v.indices) > 0) and (v.indices.size == 0 or v.indices[-1] < dim)


def test_sparse_vector_validation():
    with pytest.raises(ValueError):
        SparseVector(4, [2, 1], [1.0, 1.0])
    with pytest.raises(ValueError):
        SparseVector(4, [4], [1.0])


def test_idf_single_document_term_removed():
    v = hashing_tf(["a"], 8)
    m = idf_fit([v], 8)
    assert m.idf[v.indices[0]] == 0.0
    assert len(idf_transform(m, v)) == 0


def test_idf_hand_value():
    dim = 1 << 16
    docs = [hashing_tf(t, dim) for t in (["rare"], ["x"], ["y"])]
    m = idf_fit(docs, dim)
    b = docs[0].indices[0]
    assert m.idf[b] == math.log(4 / 2)
    assert abs(m.idf[b] - 0.6931) < 1e-4


def test_idf_transform_empty_and_dim_mismatch():
    m = idf_fit([hashing_tf(["a"], 8)], 8)
    assert len(idf_transform(m, hashing_tf([], 8))) == 0
    with pytest.raises(ValueError):
        idf_transform(m, hashing_tf(["a"], 4))
    with pytest.raises(ValueError):
        idf_fit([hashing_tf(["a"], 4)], 8)


@given(st.lists(st.lists(st.sampled_from("abcdefgh"), max_size=6), min_size=1, max_size=15))
def test_idf_non_increasing_in_df(corpus):
    dim = 1 << 12
    docs = [hashing_tf(d, dim) for d in corpus]
    m = idf_fit(docs, dim)
    df = np.zeros(dim, int)
    for d in docs:
        df[d.indices] += 1
    order = np.argsort(df, kind="stable")
    assert np.all(np.diff(m.idf[order]) <= 0)
    assert np.all(m.idf >= 0)


def _frame(n, cols):
    out = [Column("id", "categorical", [str(i) for i in range(n)], np.zeros(n, bool))]
    for name, vals in cols.items():
        arr = np.array(vals, dtype=float)
        out.append(Column(name, "numeric", np.nan_to_num(arr), np.isnan(arr)))
    return Frame("f", "id", tuple(out))


def test_assemble_widths_and_names():
    f = _frame(3, {"a": [1, 2, 3], "b": [4, 5, np.nan]})
    block, _ = tfidf_block("apps", [["x"], ["y"], []], dim=4)
    X = assemble(f, ["a", "b"], [block])
    assert X.shape == (3, 6)
    assert X.names == ("a", "b", "apps[0]", "apps[1]", "apps[2]", "apps[3]")
    assert np.isnan(X.to_array()[2, 1])


def test_assemble_identity_and_all_missing():
    f = _frame(2, {"a": [1, 2], "m": [np.nan, np.nan]})
    X = assemble(f, ["a", "m"])
    assert X.sparse is None
    assert X.dense[:, 0].tolist() == [1.0, 2.0] and np.isnan(X.dense[:, 1]).all()


def test_assemble_row_mismatch():
    f = _frame(2, {"a": [1, 2]})
    with pytest.raises(DataError):
        assemble(f, ["a"], [SparseBlock("t", 4, (hashing_tf([], 4),))])


@given(st.lists(st.tuples(st.one_of(st.none(), st.floats(-1e3, 1e3)), st.lists(st.sampled_from("pqrs"), max_size=4)),
                min_size=1, max_size=12))
def test_assemble_is_lossless(rows):
    f = _frame(len(rows), {"a": [np.nan if v is None else v for v, _ in rows]})
    dim = 32
    tf = [hashing_tf(t, dim) for _, t in rows]
    X = assemble(f, ["a"], [SparseBlock("t", dim, tuple(tf))]).to_array()
    for i, (v, _) in enumerate(rows):
        assert (np.isnan(X[i, 0]) if v is None else X[i, 0] == v)
        assert np.array_equal(X[i, 1:], tf[i].to_dense())
