import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pumine.dataset import AggSpec, Column, Frame, group_by_aggregate
from pumine.errors import SchemaError
from pumine.features import (
    DATE_PARTS, DerivationSpec, FeaturePipeline, FeatureSettings, GroupByEncoder, correlation_groups,
    correlation_matrix, count_encode, cross_categories, decompose_dates, groupby_features, null_pattern_groups,
)


def _frame(cols, kinds=None, n=None):
    n = n or len(next(iter(cols.values())))
    kinds = kinds or {}
    out = [Column.from_list("id", "categorical", [f"r{i}" for i in range(n)])]
    for name, vals in cols.items():
        kind = kinds.get(name, "numeric")
        out.append(Column.from_list(name, kind, vals))
    return Frame("f", "id", tuple(out))


# ------------------------------------------------------------------ dates


def test_date_parts():
    f = _frame({"d": [np.datetime64("2021-01-03"), None]}, {"d": "date"})
    out = decompose_dates(f, "d")
    row = {p: out[f"d_{p}"].to_list()[0] for p in DATE_PARTS}
    # 2021-01-03 is a Sunday in ISO week 53 of 2020
    assert row == {"year": 2021, "month": 1, "day": 3, "weekday": 7, "day_of_year": 3, "week_of_year": 53,
                   "quarter": 1}
    assert all(out[f"d_{p}"].missing[1] for p in DATE_PARTS)


def test_date_group_matches_reported_selection():
    # agreement dates over several years with a shared missing pattern
    r = np.random.default_rng(0)
    n = 3000
    d = np.datetime64("2015-01-01") + r.integers(0, 6 * 365, n)
    miss = r.random(n) < 0.2
    f = Frame("x", "id", (Column("id", "categorical", [str(i) for i in range(n)], np.zeros(n, bool)),
                          Column("agree", "date", d, miss)))
    f = decompose_dates(f, "agree").drop(["agree"])
    cols = [f"agree_{p}" for p in DATE_PARTS]
    nulls = null_pattern_groups(f)
    assert len(nulls) == 1 and set(nulls[0].columns) == set(cols)
    groups = correlation_groups(correlation_matrix(f, cols), cols, 0.97, f)
    dropped = {m for g in groups for m in g.members if m != g.representative}
    kept = {c[len("agree_"):] for c in cols if c not in dropped}
    reported = {"year", "day", "weekday", "day_of_year", "week_of_year"}
    assert {"month", "quarter"} <= {c[len("agree_"):] for c in dropped}
    assert {"year", "day", "weekday", "day_of_year"} <= kept <= reported


# ------------------------------------------------------------ null groups


def test_null_groups_by_rows():
    f = _frame({"A": [1, None, 3, None], "B": [1, None, 3, None], "C": [1, None, 3, 4], "D": [None, 2, 3, None],
                "E": [1, 2, 3, 4], "F": [5, 6, 7, 8]})
    groups = null_pattern_groups(f)
    sets = {g.columns for g in groups}
    assert ("A", "B") in sets and ("E", "F") in sets
    assert not any("D" in g.columns for g in groups)
    assert not any("C" in g.columns for g in groups)
    assert [g for g in groups if g.complete][0].columns == ("E", "F")


def test_null_groups_count_mode():
    f = _frame({"A": [None, 2, None, 4], "C": [None, 2, 3, None]})
    assert null_pattern_groups(f) == []
    g = null_pattern_groups(f, mode="count")
    assert len(g) == 1 and g[0].columns == ("A", "C") and g[0].missing_count == 2


def test_no_missing_single_complete_group():
    f = _frame({"a": [1, 2], "b": [3, 4], "c": [5, 6]})
    g = null_pattern_groups(f)
    assert len(g) == 1 and g[0].complete and g[0].columns == ("a", "b", "c")


# ------------------------------------------------------------ correlation


def test_affine_and_negation():
    x = np.arange(10.0)
    f = _frame({"x": list(x), "y": list(2 * x + 3), "z": list(-x)})
    R = correlation_matrix(f, ["x", "y", "z"])
    assert R[0, 1] == pytest.approx(1.0, abs=1e-15) and R[0, 2] == pytest.approx(-1.0, abs=1e-15)


def test_independent_uniforms_uncorrelated():
    r = np.random.default_rng(7)
    f = _frame({"u": list(r.random(1000)), "v": list(r.random(1000))})
    assert abs(correlation_matrix(f, ["u", "v"])[0, 1]) < 0.1


def test_pairwise_complete_and_degenerate():
    f = _frame({"a": [1, 2, None, 4, 5], "b": [2, 4, 100, 8, 10], "c": [1, 1, 1, 1, 1], "d": [1, None, None, None, 2]})
    R = correlation_matrix(f, ["a", "b", "c", "d"])
    assert R[0, 1] == pytest.approx(1.0)  # the outlier row is not complete for a
    assert R[0, 2] == 0.0 and R[0, 3] == 0.0
    with pytest.raises(SchemaError):
        correlation_matrix(_frame({"a": [1, 2], "g": ["x", "y"]}, {"g": "categorical"}), ["a", "g"])


@given(st.lists(st.tuples(*[st.one_of(st.none(), st.integers(-3, 3))] * 3), min_size=0, max_size=25))
def test_matrix_symmetric_bounded(rows):
    if not rows:
        return
    cols = {k: [None if r[j] is None else float(r[j]) for r in rows] for j, k in enumerate("abc")}
    R = correlation_matrix(_frame(cols, n=len(rows)), ["a", "b", "c"])
    assert np.array_equal(R, R.T) and np.all(np.diag(R) == 1.0)
    assert np.all(np.abs(R) <= 1.0)


def test_chain_is_one_component():
    R = np.array([[1, 0.98, 0.5], [0.98, 1, 0.98], [0.5, 0.98, 1]])
    g = correlation_groups(R, ["A", "B", "C"], 0.97)
    assert len(g) == 1 and g[0].members == ("A", "B", "C")


def test_duplicate_pair_one_dropped_representative_by_distinct():
    f = _frame({"a": [1, 2, 3, 4, 5], "b": [1, 2, 3, 4, 5], "c": [5, 1, 4, 2, 2]})
    g = correlation_groups(correlation_matrix(f, ["a", "b", "c"]), ["a", "b", "c"], 0.97, f)
    assert len(g) == 1 and g[0].members == ("a", "b") and g[0].representative == "a"
    f2 = _frame({"a": [1, 2, 2, 4, 4], "b": [2, 4, 4, 8, 9]})
    g2 = correlation_groups(correlation_matrix(f2, ["a", "b"]), ["a", "b"], 0.97, f2)
    assert g2[0].representative == "b"  # more distinct values wins


@given(st.lists(st.lists(st.integers(0, 2), min_size=6, max_size=6), min_size=2, max_size=5))
def test_threshold_one_only_exact_duplicates(columns):
    names = [f"c{i}" for i in range(len(columns))]
    f = _frame({n: [float(v) for v in c] for n, c in zip(names, columns)})
    groups = correlation_groups(correlation_matrix(f, names), names, 1.0, f)
    # nothing exceeds |r| = 1, so no groups at all
    assert groups == []


# ---------------------------------------------------------------- crossing


def test_cross_values_and_missing():
    f = _frame({"a": ["a", "b"], "x": ["x", None]}, {"a": "categorical", "x": "categorical"})
    out = cross_categories(f, ["a", "x"])
    assert out["cross(a,x)"].to_list() == ["a&x", None]
    with pytest.raises(ValueError):
        cross_categories(f, ["a"])
    with pytest.raises(SchemaError):
        cross_categories(_frame({"a": ["a"], "n": [1.0]}, {"a": "categorical"}), ["a", "n"])


@given(st.lists(st.tuples(st.sampled_from("abc"), st.sampled_from("xy"), st.sampled_from("pq")), min_size=1,
                max_size=30))
def test_cross_distinct_bounded_by_product(rows):
    kinds = {k: "categorical" for k in "uvw"}
    f = _frame({k: [r[j] for r in rows] for j, k in enumerate("uvw")}, kinds)
    out = cross_categories(f, ["u", "v", "w"])
    crossed = set(out["cross(u,v,w)"].to_list())
    expected = {"&".join(t) for t in rows}
    assert crossed == expected
    assert len(crossed) <= len({r[0] for r in rows}) * len({r[1] for r in rows}) * len({r[2] for r in rows})


# ---------------------------------------------------------------- encoders


def test_count_encode_basic_and_unseen():
    f = _frame({"g": ["a", "a", "b"]}, {"g": "categorical"})
    out, enc = count_encode(f, "g")
    assert out["count(g)"].to_list() == [2.0, 2.0, 1.0]
    test = _frame({"g": ["c", None]}, {"g": "categorical"})
    assert enc.apply(test)["count(g)"].to_list() == [0.0, None]


@given(st.lists(st.one_of(st.none(), st.sampled_from("abcde")), min_size=1, max_size=40))
def test_count_encode_identities(vals):
    f = _frame({"g": vals}, {"g": "categorical"})
    out, enc = count_encode(f, "g")
    enc_vals = [v for v in out["count(g)"].to_list() if v is not None]
    present = [v for v in vals if v is not None]
    assert sum(enc_vals) == sum(present.count(v) ** 2 for v in set(present))
    # consistent with group-by count over the source column
    rows = [i for i, v in enumerate(vals) if v is not None]
    if rows:
        agg = group_by_aggregate(f.take(rows), "g", [AggSpec("id", "count", "n")])
        counts = dict(zip(agg["g"].to_list(), agg["n"].to_list()))
        for v, e in zip(vals, out["count(g)"].to_list()):
            assert e == (None if v is None else counts[v])
    # applying the fitted map to the fitted frame reproduces fit-time output
    assert enc.apply(f)["count(g)"].to_list() == out["count(g)"].to_list()


def test_groupby_mean_and_std():
    f = _frame({"g": ["a", "a", "b"], "v": [1.0, 3.0, 5.0]}, {"g": "categorical"})
    out, encs = groupby_features(f, [("g", "v", "mean"), ("g", "v", "std")])
    assert out["agg(mean,v,by=g)"].to_list() == [2.0, 2.0, 5.0]
    assert out["agg(std,v,by=g)"].to_list()[2] is None
    assert out["agg(std,v,by=g)"].to_list()[0] == pytest.approx(2 ** 0.5)
    unseen = _frame({"g": ["z"], "v": [1.0]}, {"g": "categorical"})
    assert encs[0].apply(unseen)["agg(mean,v,by=g)"].to_list() == [None]


def test_groupby_constant_column_and_kind_errors():
    f = _frame({"g": ["a", "b", "b", "c"], "v": [7.0] * 4}, {"g": "categorical"})
    out, _ = groupby_features(f, [("g", "v", "mean")])
    assert out["agg(mean,v,by=g)"].to_list() == [7.0] * 4
    with pytest.raises(SchemaError):
        GroupByEncoder.fit(f, "v", "g", "mean")
    with pytest.raises(ValueError):
        GroupByEncoder.fit(f, "g", "v", "median")


# ---------------------------------------------------------------- pipeline


def _five_column_fixture(n=200, seed=0):
    r = np.random.default_rng(seed)
    a = r.standard_normal(n)
    return Frame("five", "id", (
        Column("id", "categorical", [f"r{i}" for i in range(n)], np.zeros(n, bool)),
        Column("a", "numeric", a, np.zeros(n, bool)),
        Column("a_copy", "numeric", a.copy(), np.zeros(n, bool)),
        Column("b", "numeric", r.standard_normal(n), np.zeros(n, bool)),
        Column("g", "categorical", r.choice(["x", "y", "z"], n).tolist(), np.zeros(n, bool)),
        Column("h", "categorical", r.choice(["p", "q"], n).tolist(), np.zeros(n, bool)),
    ))


def test_pipeline_engineered_column_count():
    f = _five_column_fixture()
    spec = DerivationSpec(cross_pairs=[("g", "h")], groupby=[("g", "b", "mean"), ("h", "a", "max")])
    pipe = FeaturePipeline(FeatureSettings(derivation=spec, single_feature_cv=False)).fit(f)
    # numeric a, b (a_copy dropped) + count(g), count(h), count(cross(g,h)) + 2 group-by columns
    assert len(pipe.output_columns) == 2 + 3 + 2
    reasons = dict(pipe.report.dropped)
    assert reasons["a_copy"] == "corr_group"
    assert reasons["g"] == reasons["h"] == reasons["cross(g,h)"] == "categorical_encoded"


def test_pipeline_fit_apply_separable():
    f = _five_column_fixture()
    spec = DerivationSpec(cross_pairs=[("g", "h")], groupby=[("g", "b", "std")])
    pipe = FeaturePipeline(FeatureSettings(derivation=spec, single_feature_cv=False)).fit(f)
    X1 = pipe.transform(f).dense
    clone = FeaturePipeline.from_dict(pipe.to_dict())
    X2 = clone.transform(f).dense
    assert np.array_equal(X1, X2, equal_nan=True)


def test_pipeline_empty_derivation_passthrough_plus_dates():
    n = 30
    f = Frame("d", "id", (
        Column("id", "categorical", [str(i) for i in range(n)], np.zeros(n, bool)),
        Column("x", "numeric", np.arange(n, dtype=float), np.zeros(n, bool)),
        Column("when", "date", np.datetime64("2020-01-01") + np.arange(n) * 40, np.zeros(n, bool)),
    ))
    pipe = FeaturePipeline(FeatureSettings(single_feature_cv=False, corr_threshold=1.0)).fit(f)
    assert pipe.output_columns == ["x"] + [f"when_{p}" for p in DATE_PARTS]


def test_single_feature_filter_in_pipeline():
    n = 300
    r = np.random.default_rng(1)
    y = (r.random(n) < 0.4).astype(int)
    f = Frame("s", "id", (
        Column("id", "categorical", [str(i) for i in range(n)], np.zeros(n, bool)),
        Column("signal", "numeric", y + 0.1 * r.standard_normal(n), np.zeros(n, bool)),
        Column("flat", "numeric", np.ones(n), np.zeros(n, bool)),
    ))
    pipe = FeaturePipeline(FeatureSettings()).fit(f, y)
    assert pipe.output_columns == ["signal"]
    assert ("flat", "single_feature_cv") in pipe.report.dropped


def test_pipeline_text_columns_keep_used_buckets():
    f = Frame("t", "id", (
        Column("id", "categorical", ["a", "b", "c"], np.zeros(3, bool)),
        Column("apps", "text", [("x", "y"), ("y",), ()], np.array([False, False, True])),
    ))
    pipe = FeaturePipeline(FeatureSettings(single_feature_cv=False, text_dim=64)).fit(f)
    assert all(c.startswith("apps[") for c in pipe.output_columns) and len(pipe.output_columns) == 2
    X = pipe.transform(f).dense
    assert X.shape == (3, 2)


def test_derivation_validation():
    f = _five_column_fixture()
    with pytest.raises(SchemaError):
        DerivationSpec(cross_pairs=[("g", "a")]).validate(f)
    with pytest.raises(SchemaError):
        DerivationSpec(cross_triples=[("g", "h")]).validate(f)
