"""Feature engineering and redundancy elimination.

Everything that learns from data (count maps, group statistics, IDF
weights, clipping bounds, dropped columns) is fitted on one frame and can be
applied unchanged to another, so the test set never leaks into the fit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataset import Column, Frame, nearest_rank
from .errors import DataError, SchemaError
from .text import DEFAULT_DIM, DesignMatrix, IdfModel, assemble, tfidf_block

DATE_PARTS = ("year", "month", "day", "weekday", "day_of_year", "week_of_year", "quarter")
GROUPBY_STATS = ("mean", "sum", "min", "max", "std")
DEFAULT_CORR_THRESHOLD = 0.97


def _require(frame, name, kind):
    col = frame[name]
    if col.kind != kind:
        raise SchemaError(f"column {name!r} is {col.kind}, expected {kind}")
    return col


# ------------------------------------------------------------------ dates


def decompose_dates(frame: Frame, column: str) -> Frame:
    """Add ``<column>_<part>`` numeric columns for every calendar part.

    weekday runs 1 (Monday) to 7; week_of_year is the ISO-8601 week.
    """
    col = _require(frame, column, "date")
    n = frame.n_rows
    parts = {p: np.zeros(n) for p in DATE_PARTS}
    for i, (d, miss) in enumerate(zip(col.values.tolist(), col.missing.tolist())):
        if miss:
            continue
        iso = d.isocalendar()
        parts["year"][i] = d.year
        parts["month"][i] = d.month
        parts["day"][i] = d.day
        parts["weekday"][i] = d.isoweekday()
        parts["day_of_year"][i] = d.timetuple().tm_yday
        parts["week_of_year"][i] = iso[1]
        parts["quarter"][i] = (d.month + 2) // 3
    return frame.with_columns(Column(f"{column}_{p}", "numeric", parts[p], col.missing) for p in DATE_PARTS)


# ------------------------------------------------------------- null groups


@dataclass(frozen=True)
class NullGroup:
    columns: tuple
    missing_count: int
    complete: bool = False


def null_pattern_groups(frame: Frame, mode: str = "rows") -> list:
    """Group columns that share a missing pattern.

    ``mode="rows"`` requires identical missing-row sets; ``mode="count"``
    only identical missing counts. Columns without missing values form the
    single ``complete`` group. Singleton groups are omitted.
    """
    if mode not in ("rows", "count"):
        raise ValueError(f"unknown null-pattern mode {mode!r}")
    groups = {}
    for c in frame.columns:
        if c.name == frame.key:
            continue
        cnt = int(c.missing.sum())
        sig = ("complete",) if cnt == 0 else (cnt, c.missing.tobytes() if mode == "rows" else None)
        groups.setdefault(sig, []).append(c.name)
    out = []
    for sig, names in groups.items():
        if len(names) < 2:
            continue
        complete = sig == ("complete",)
        out.append(NullGroup(tuple(names), 0 if complete else sig[0], complete))
    out.sort(key=lambda g: (not g.complete, g.missing_count, g.columns))
    return out


# ------------------------------------------------------------ correlation


def _pearson(x, y):
    if x.size < 3:
        return 0.0
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        return 0.0
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def correlation_matrix(frame: Frame, columns: Sequence[str]) -> np.ndarray:
    """Pearson r over pairwise-complete rows (0 when undefined), unit diagonal."""
    if len(columns) < 2:
        raise ValueError("correlation needs at least two columns")
    cols = [_require(frame, c, "numeric") for c in columns]
    p = len(cols)
    R = np.eye(p)
    vals = [c.values for c in cols]
    present = [~c.missing for c in cols]
    for i in range(p):
        for j in range(i + 1, p):
            both = present[i] & present[j]
            r = _pearson(vals[i][both], vals[j][both])
            R[i, j] = R[j, i] = r
    return R


@dataclass(frozen=True)
class CorrGroup:
    members: tuple
    representative: str
    pairs: tuple  # (a, b, r) for every above-threshold edge

    def to_dict(self):
        return {"members": list(self.members), "representative": self.representative,
                "pairs": [list(p) for p in self.pairs]}


def _distinct_count(col: Column):
    return len(set(col.values[~col.missing].tolist()))


def correlation_groups(matrix, columns: Sequence[str], threshold: float = DEFAULT_CORR_THRESHOLD,
                       frame: Frame | None = None) -> list:
    """Connected components of the ``|r| > threshold`` graph.

    The representative of each group is the member with the most distinct
    non-missing values in ``frame`` (ties: smallest name). Groups of one
    column are not reported.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must be in (0, 1]")
    R = np.asarray(matrix)
    p = len(columns)
    parent = list(range(p))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    edges = []
    for i in range(p):
        for j in range(i + 1, p):
            if abs(R[i, j]) > threshold:
                edges.append((i, j))
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    comps = {}
    for i in range(p):
        comps.setdefault(find(i), []).append(i)
    groups = []
    for root in sorted(comps):
        idx = comps[root]
        if len(idx) < 2:
            continue
        members = tuple(columns[i] for i in idx)
        if frame is not None:
            score = {m: _distinct_count(frame[m]) for m in members}
            rep = min(members, key=lambda m: (-score[m], m))
        else:
            rep = min(members)
        pairs = tuple((columns[i], columns[j], float(R[i, j])) for i, j in edges if find(i) == root)
        groups.append(CorrGroup(members, rep, pairs))
    return groups


# ---------------------------------------------------------------- crossing


def cross_name(columns):
    return f"cross({','.join(columns)})"


def cross_categories(frame: Frame, columns: Sequence[str]) -> Frame:
    """Join 2 or 3 categorical values with ``&``; missing if any member is missing."""
    if len(columns) not in (2, 3):
        raise ValueError("crossing takes 2 or 3 columns")
    cols = [_require(frame, c, "categorical") for c in columns]
    missing = np.zeros(frame.n_rows, dtype=bool)
    for c in cols:
        missing |= c.missing
    vals = ["&".join(parts) for parts in zip(*(c.values.tolist() for c in cols))]
    return frame.with_columns([Column(cross_name(columns), "categorical", vals, missing)])


# -------------------------------------------------------------- encoders


@dataclass(frozen=True)
class CountEncoder:
    column: str
    counts: dict

    @property
    def output(self):
        return f"count({self.column})"

    @classmethod
    def fit(cls, frame: Frame, column: str):
        col = _require(frame, column, "categorical")
        counts = {}
        for v in col.values[~col.missing].tolist():
            counts[v] = counts.get(v, 0) + 1
        return cls(column, counts)

    def apply(self, frame: Frame) -> Frame:
        col = _require(frame, self.column, "categorical")
        vals = np.array([float(self.counts.get(v, 0)) for v in col.values.tolist()])
        return frame.with_columns([Column(self.output, "numeric", vals, col.missing)])


def count_encode(frame: Frame, column: str):
    """Return ``(frame with count(<column>), fitted encoder)``."""
    enc = CountEncoder.fit(frame, column)
    return enc.apply(frame), enc


@dataclass(frozen=True)
class GroupByEncoder:
    key: str
    value: str
    stat: str
    table: dict  # category -> statistic (None when undefined)

    @property
    def output(self):
        return f"agg({self.stat},{self.value},by={self.key})"

    @classmethod
    def fit(cls, frame: Frame, key: str, value: str, stat: str):
        if stat not in GROUPBY_STATS:
            raise ValueError(f"unknown group-by statistic {stat!r}")
        kc = _require(frame, key, "categorical")
        vc = _require(frame, value, "numeric")
        buckets = {}
        ok = ~kc.missing
        for k, v, m in zip(kc.values[ok].tolist(), vc.values[ok].tolist(), vc.missing[ok].tolist()):
            lst = buckets.setdefault(k, [])
            if not m:
                lst.append(v)
        table = {}
        for k, vals in buckets.items():
            a = np.asarray(vals, dtype=np.float64)
            if a.size == 0 or (stat == "std" and a.size < 2):
                table[k] = None
            elif stat == "mean":
                table[k] = float(a.mean())
            elif stat == "sum":
                table[k] = float(a.sum())
            elif stat == "min":
                table[k] = float(a.min())
            elif stat == "max":
                table[k] = float(a.max())
            else:
                table[k] = float(a.std(ddof=1))
        return cls(key, value, stat, table)

    def apply(self, frame: Frame) -> Frame:
        kc = _require(frame, self.key, "categorical")
        n = frame.n_rows
        vals = np.zeros(n)
        missing = np.ones(n, dtype=bool)
        for i, (k, m) in enumerate(zip(kc.values.tolist(), kc.missing.tolist())):
            v = None if m else self.table.get(k)
            if v is not None:
                vals[i] = v
                missing[i] = False
        return frame.with_columns([Column(self.output, "numeric", vals, missing)])


def groupby_features(frame: Frame, specs: Sequence[tuple]):
    """Apply ``(category, value, stat)`` group statistics; returns ``(frame, encoders)``."""
    encoders = []
    for key, value, stat in specs:
        enc = GroupByEncoder.fit(frame, key, value, stat)
        frame = enc.apply(frame)
        encoders.append(enc)
    return frame, encoders


# ------------------------------------------------------------- pipeline


@dataclass
class DerivationSpec:
    cross_pairs: list = field(default_factory=list)
    cross_triples: list = field(default_factory=list)
    groupby: list = field(default_factory=list)  # (category, numeric, stat)
    count_encode: list = field(default_factory=list)

    def validate(self, frame: Frame):
        for pair in self.cross_pairs:
            if len(pair) != 2:
                raise SchemaError(f"cross pair {pair!r} must have 2 columns")
        for triple in self.cross_triples:
            if len(triple) != 3:
                raise SchemaError(f"cross triple {triple!r} must have 3 columns")
        for cols in list(self.cross_pairs) + list(self.cross_triples):
            for c in cols:
                _require(frame, c, "categorical")
        for key, value, stat in self.groupby:
            if stat not in GROUPBY_STATS:
                raise SchemaError(f"unknown group-by statistic {stat!r}")
        for c in self.count_encode:
            if c not in frame and not c.startswith("cross("):
                raise SchemaError(f"unknown column {c!r}")


@dataclass
class FeatureSettings:
    corr_threshold: float = DEFAULT_CORR_THRESHOLD
    null_mode: str = "rows"
    derivation: DerivationSpec = field(default_factory=DerivationSpec)
    encode_all_categoricals: bool = True
    text_columns: list | None = None  # None: every text column
    text_dim: int = DEFAULT_DIM
    clip: list = field(default_factory=list)  # (column, lo_q, hi_q)
    single_feature_cv: bool = True
    single_feature_threshold: float = 0.5
    cv_folds: int = 5
    seed: int = 0


@dataclass
class FeatureReport:
    null_groups: list = field(default_factory=list)
    corr_groups: list = field(default_factory=list)
    dropped: list = field(default_factory=list)  # (column, reason)
    kept: list = field(default_factory=list)
    single_feature: list = field(default_factory=list)

    def to_dict(self):
        return {
            "null_groups": [
                {"columns": list(g.columns), "missing_count": g.missing_count, "complete": g.complete}
                for g in self.null_groups
            ],
            "corr_groups": [g.to_dict() for g in self.corr_groups],
            "dropped": [list(d) for d in self.dropped],
            "kept": list(self.kept),
            "single_feature": list(self.single_feature),
        }


class FeaturePipeline:
    """Fit on a training frame, then transform any frame with the same schema.

    Step order: clipping, date decomposition, null-pattern and correlation
    grouping, correlation drops, crossing, count encoding, group-by
    features, TF-IDF text blocks, single-feature CV filter.
    """

    def __init__(self, settings: FeatureSettings | None = None, label: str | None = None):
        self.settings = settings or FeatureSettings()
        self.label = label
        self.report = FeatureReport()
        self._fitted = False

    # the fitted state is plain data so it can be serialized
    def _reset(self):
        self.clip_bounds = []  # (column, lo, hi)
        self.date_columns = []
        self.corr_dropped = []
        self.crosses = []
        self.count_encoders = []
        self.groupby_encoders = []
        self.text_models = []  # (column, IdfModel, kept buckets)
        self.numeric_columns = []
        self.output_columns = []

    def _excluded(self, frame):
        return {frame.key} | ({self.label} if self.label else set())

    def fit(self, frame: Frame, labels=None) -> FeaturePipeline:
        s = self.settings
        self._reset()
        report = FeatureReport()
        excluded = self._excluded(frame)
        candidates = [c.name for c in frame.columns if c.name not in excluded]
        dropped = []

        for column, lo_q, hi_q in s.clip:
            col = _require(frame, column, "numeric")
            vals = np.sort(col.values[~col.missing])
            if vals.size:
                self.clip_bounds.append((column, float(nearest_rank(vals, lo_q)), float(nearest_rank(vals, hi_q))))
        frame = self._clip(frame)

        self.date_columns = [c.name for c in frame.columns if c.kind == "date" and c.name not in excluded]
        for d in self.date_columns:
            frame = decompose_dates(frame, d)
            candidates += [f"{d}_{p}" for p in DATE_PARTS]
            dropped.append((d, "date_decomposed"))
        frame = frame.drop(self.date_columns)

        report.null_groups = null_pattern_groups(frame.drop([c for c in excluded if c != frame.key and c in frame]),
                                                 s.null_mode)
        numeric = [c.name for c in frame.columns if c.kind == "numeric" and c.name not in excluded]
        if len(numeric) >= 2:
            R = correlation_matrix(frame, numeric)
            report.corr_groups = correlation_groups(R, numeric, s.corr_threshold, frame)
            for g in report.corr_groups:
                for m in g.members:
                    if m != g.representative:
                        self.corr_dropped.append(m)
                        dropped.append((m, "corr_group"))
        frame = frame.drop(self.corr_dropped)

        s.derivation.validate(frame)
        self.crosses = [tuple(c) for c in list(s.derivation.cross_pairs) + list(s.derivation.cross_triples)]
        for cols in self.crosses:
            frame = cross_categories(frame, cols)
            candidates.append(cross_name(cols))

        to_encode = list(s.derivation.count_encode)
        if s.encode_all_categoricals:
            to_encode += [c.name for c in frame.columns
                          if c.kind == "categorical" and c.name not in excluded and c.name not in to_encode]
        for c in to_encode:
            enc = CountEncoder.fit(frame, c)
            self.count_encoders.append(enc)
            frame = enc.apply(frame)
            candidates.append(enc.output)

        for key, value, stat in s.derivation.groupby:
            enc = GroupByEncoder.fit(frame, key, value, stat)
            self.groupby_encoders.append(enc)
            frame = enc.apply(frame)
            candidates.append(enc.output)

        text_cols = s.text_columns
        if text_cols is None:
            text_cols = [c.name for c in frame.columns if c.kind == "text" and c.name not in excluded]
        for t in text_cols:
            col = _require(frame, t, "text")
            block, model = tfidf_block(t, [() if m else v for v, m in zip(col.values, col.missing)], s.text_dim)
            used = sorted({int(i) for v in block.vectors for i in v.indices})
            self.text_models.append((t, model, used))

        for c in frame.columns:
            if c.name in excluded or c.kind == "numeric":
                continue
            reason = {"categorical": "categorical_encoded", "text": "text_hashed"}.get(c.kind, "unsupported")
            if c.name in candidates:
                dropped.append((c.name, reason))

        self.numeric_columns = [c.name for c in frame.columns if c.kind == "numeric" and c.name not in excluded]
        self.output_columns = self.numeric_columns + self._text_names()
        self._fitted = True

        if s.single_feature_cv and labels is not None and self.output_columns:
            from .evaluation import single_feature_cv

            X = self._design(frame)
            cv = single_feature_cv(X.dense, labels, k=s.cv_folds, threshold=s.single_feature_threshold,
                                   seed=s.seed, names=X.names)
            report.single_feature = [r.to_dict() for r in cv.features]
            bad = {r.name for r in cv.features if not r.keep}
            dropped += [(n, "single_feature_cv") for n in self.output_columns if n in bad]
            self.output_columns = [n for n in self.output_columns if n not in bad]

        report.dropped = dropped
        report.kept = list(self.output_columns)
        self.report = report
        return self

    def _text_names(self):
        names = []
        for t, model, used in self.text_models:
            width = len(str(max(model.dim - 1, 0)))
            names += [f"{t}[{b:0{width}d}]" for b in used]
        return names

    def _clip(self, frame):
        for column, lo, hi in self.clip_bounds:
            col = frame[column]
            vals = np.where(col.missing, col.values, np.clip(col.values, lo, hi))
            frame = frame.replace(Column(column, "numeric", vals, col.missing))
        return frame

    def _design(self, frame) -> DesignMatrix:
        blocks = []
        for t, model, used in self.text_models:
            col = _require(frame, t, "text")
            block, _ = tfidf_block(t, [() if m else v for v, m in zip(col.values, col.missing)], model.dim, model)
            blocks.append(block)
        X = assemble(frame, self.numeric_columns, blocks)
        if not blocks:
            return X
        pieces = [X.dense]
        start = 0
        for t, model, used in self.text_models:
            pieces.append(X.sparse[:, [start + b for b in used]].toarray())
            start += model.dim
        return DesignMatrix(np.hstack(pieces), None, tuple(self.numeric_columns + self._text_names()))

    def transform_frame(self, frame: Frame) -> Frame:
        if not self._fitted:
            raise RuntimeError("pipeline is not fitted")
        frame = self._clip(frame)
        for d in self.date_columns:
            frame = decompose_dates(frame, d)
        frame = frame.drop(self.date_columns)
        frame = frame.drop([c for c in self.corr_dropped if c in frame])
        for cols in self.crosses:
            frame = cross_categories(frame, cols)
        for enc in self.count_encoders:
            frame = enc.apply(frame)
        for enc in self.groupby_encoders:
            frame = enc.apply(frame)
        return frame

    def transform(self, frame: Frame) -> DesignMatrix:
        """Design matrix with exactly the fitted output columns."""
        frame = self.transform_frame(frame)
        for name in self.numeric_columns:
            if name not in frame:
                raise DataError(f"column {name!r} missing from frame {frame.name!r}")
        X = self._design(frame)
        pos = {n: j for j, n in enumerate(X.names)}
        idx = [pos[n] for n in self.output_columns]
        return DesignMatrix(X.dense[:, idx], None, tuple(self.output_columns))

    def engineered_frame(self, frame: Frame) -> Frame:
        """Key column plus every output column, as a numeric frame."""
        X = self.transform(frame)
        cols = [frame[frame.key]]
        for j, n in enumerate(X.names):
            v = X.dense[:, j]
            miss = np.isnan(v)
            cols.append(Column(n, "numeric", np.where(miss, 0.0, v), miss))
        return Frame(frame.name, frame.key, tuple(cols))

    def to_dict(self):
        s = self.settings
        return {
            "label": self.label,
            "settings": {
                "corr_threshold": s.corr_threshold,
                "null_mode": s.null_mode,
                "text_dim": s.text_dim,
                "single_feature_cv": s.single_feature_cv,
                "single_feature_threshold": s.single_feature_threshold,
            },
            "clip_bounds": [list(c) for c in self.clip_bounds],
            "date_columns": self.date_columns,
            "corr_dropped": self.corr_dropped,
            "crosses": [list(c) for c in self.crosses],
            "count_encoders": [
                {"column": e.column, "counts": sorted([k, v] for k, v in e.counts.items())}
                for e in self.count_encoders
            ],
            "groupby_encoders": [
                {"key": e.key, "value": e.value, "stat": e.stat,
                 "table": sorted([k, v] for k, v in e.table.items())}
                for e in self.groupby_encoders
            ],
            "text_models": [{"column": t, "idf": m.to_dict(), "used": u} for t, m, u in self.text_models],
            "numeric_columns": self.numeric_columns,
            "output_columns": self.output_columns,
            "report": self.report.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        st = d["settings"]
        p = cls(FeatureSettings(corr_threshold=st["corr_threshold"], null_mode=st["null_mode"],
                                text_dim=st["text_dim"], single_feature_cv=st["single_feature_cv"],
                                single_feature_threshold=st["single_feature_threshold"]), d["label"])
        p._reset()
        p.clip_bounds = [tuple(c) for c in d["clip_bounds"]]
        p.date_columns = list(d["date_columns"])
        p.corr_dropped = list(d["corr_dropped"])
        p.crosses = [tuple(c) for c in d["crosses"]]
        p.count_encoders = [CountEncoder(e["column"], {k: v for k, v in e["counts"]}) for e in d["count_encoders"]]
        p.groupby_encoders = [
            GroupByEncoder(e["key"], e["value"], e["stat"], {k: v for k, v in e["table"]})
            for e in d["groupby_encoders"]
        ]
        p.text_models = [(t["column"], IdfModel.from_dict(t["idf"]), list(t["used"])) for t in d["text_models"]]
        p.numeric_columns = list(d["numeric_columns"])
        p.output_columns = list(d["output_columns"])
        p._fitted = True
        return p

