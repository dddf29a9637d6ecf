"""Columnar frames, CSV ingestion and the aggregate-then-join preprocessing.

A :class:`Frame` is an immutable list of typed :class:`Column` objects sharing
a row count. Missing cells are tracked by an explicit boolean mask per
column; the value stored under a missing cell is a placeholder and is never
read.
"""
from __future__ import annotations

import csv
import datetime as _dt
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, SchemaError

KINDS = ("numeric", "categorical", "date", "text")
AGG_STATS = ("count", "sum", "mean", "min", "max", "nunique", "first", "text_len_sum")
TOKEN_SEP = "|"


def _placeholder(kind):
    if kind not in KINDS:
        raise SchemaError(f"unknown column kind {kind!r}")
    return {"numeric": 0.0, "categorical": "", "date": np.datetime64(0, "D"), "text": ()}[kind]


def _as_values(kind, values):
    if kind == "numeric":
        return np.asarray(values, dtype=np.float64)
    if kind == "date":
        return np.asarray(values, dtype="datetime64[D]")
    arr = np.empty(len(values), dtype=object)
    for i, v in enumerate(values):
        arr[i] = tuple(v) if kind == "text" else v
    return arr


@dataclass(frozen=True, eq=False)
class Column:
    name: str
    kind: str
    values: np.ndarray
    missing: np.ndarray

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"column {self.name!r}: unknown kind {self.kind!r}")
        values = _as_values(self.kind, self.values)
        missing = np.asarray(self.missing, dtype=bool)
        if missing.shape != values.shape or values.ndim != 1:
            raise SchemaError(f"column {self.name!r}: values and mask lengths differ")
        if missing.any():
            values = values.copy()
            ph = _placeholder(self.kind)
            for i in np.flatnonzero(missing):  # element-wise, () would broadcast as empty
                values[i] = ph
        values.flags.writeable = False
        missing = missing.copy()
        missing.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "missing", missing)

    @classmethod
    def from_list(cls, name, kind, items):
        """Build a column from Python values, ``None`` meaning missing."""
        missing = np.array([v is None for v in items], dtype=bool)
        ph = _placeholder(kind)
        vals = [ph if v is None else v for v in items]
        if kind == "numeric":
            vals = [float(v) for v in vals]
        return cls(name, kind, _as_values(kind, vals), missing)

    def __len__(self):
        return len(self.values)

    def to_list(self):
        out = []
        for v, m in zip(self.values.tolist(), self.missing.tolist()):
            out.append(None if m else v)
        return out

    def as_float(self):
        """Numeric values with NaN at missing cells."""
        if self.kind != "numeric":
            raise SchemaError(f"column {self.name!r} is {self.kind}, not numeric")
        out = self.values.astype(np.float64, copy=True)
        out[self.missing] = np.nan
        return out

    def take(self, rows):
        return Column(self.name, self.kind, self.values[rows], self.missing[rows])

    def renamed(self, name):
        return Column(name, self.kind, self.values, self.missing)


@dataclass(frozen=True, eq=False)
class Frame:
    name: str
    key: str
    columns: tuple = field(default_factory=tuple)

    def __post_init__(self):
        cols = tuple(self.columns)
        object.__setattr__(self, "columns", cols)
        names = [c.name for c in cols]
        if len(set(names)) != len(names):
            dup = next(n for n in names if names.count(n) > 1)
            raise SchemaError(f"duplicate column name {dup!r}")
        if cols and len({len(c) for c in cols}) != 1:
            raise SchemaError("columns have different lengths")
        if self.key not in names:
            raise SchemaError(f"key column {self.key!r} not in frame")
        if self[self.key].missing.any():
            row = int(np.flatnonzero(self[self.key].missing)[0]) + 1
            raise DataError("key column has a missing entry", row=row, column=self.key)

    @property
    def n_rows(self):
        return len(self.columns[0]) if self.columns else 0

    @property
    def column_names(self):
        return [c.name for c in self.columns]

    @property
    def ids(self):
        return self[self.key].values

    def __contains__(self, name):
        return any(c.name == name for c in self.columns)

    def __getitem__(self, name) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise SchemaError(f"unknown column {name!r}")

    def names_of_kind(self, kind):
        return [c.name for c in self.columns if c.kind == kind and c.name != self.key]

    def with_columns(self, new: Iterable[Column]) -> Frame:
        return Frame(self.name, self.key, self.columns + tuple(new))

    def replace(self, column: Column) -> Frame:
        cols = tuple(column if c.name == column.name else c for c in self.columns)
        return Frame(self.name, self.key, cols)

    def drop(self, names: Iterable[str]) -> Frame:
        names = set(names)
        if self.key in names:
            raise SchemaError("cannot drop the key column")
        return Frame(self.name, self.key, tuple(c for c in self.columns if c.name not in names))

    def select(self, names: Sequence[str]) -> Frame:
        keep = [self.key] + [n for n in names if n != self.key]
        return Frame(self.name, self.key, tuple(self[n] for n in keep))

    def take(self, rows) -> Frame:
        rows = np.asarray(rows)
        return Frame(self.name, self.key, tuple(c.take(rows) for c in self.columns))


def frame_from_dict(name, key, data, kinds):
    """Convenience constructor: ``data`` maps column name to a list with None for missing."""
    cols = [Column.from_list(n, kinds[n], data[n]) for n in data]
    return Frame(name, key, tuple(cols))


# --------------------------------------------------------------------- CSV


def _parse_cell(kind, text, token_sep):
    if kind == "numeric":
        v = float(text)
        if not math.isfinite(v):
            raise ValueError("non-finite")
        return v
    if kind == "date":
        return np.datetime64(_dt.date.fromisoformat(text), "D")
    if kind == "text":
        return tuple(text.split(token_sep))
    return text


def read_csv(path, schema, name=None, key=None, token_sep=TOKEN_SEP) -> Frame:
    """Read a UTF-8 CSV into a :class:`Frame`.

    ``schema`` is a sequence of ``(column name, kind)`` pairs; the header must
    contain exactly these names (in any order). Empty cells become missing.
    ``key`` defaults to the first schema column.
    """
    schema = list(schema)
    kinds = dict(schema)
    if len(kinds) != len(schema):
        raise SchemaError("duplicate names in schema")
    for n, k in schema:
        if k not in KINDS:
            raise SchemaError(f"column {n!r}: unknown kind {k!r}")
    key = key or schema[0][0]
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        if len(set(header)) != len(header):
            dup = next(h for h in header if header.count(h) > 1)
            raise SchemaError(f"{path}: duplicate header name {dup!r}")
        if set(header) != set(kinds):
            extra = sorted(set(header) - set(kinds))
            absent = sorted(set(kinds) - set(header))
            raise SchemaError(f"{path}: header does not match schema (extra {extra}, missing {absent})")
        cells = [[] for _ in header]
        masks = [[] for _ in header]
        for rownum, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"expected {len(header)} cells, got {len(row)}", row=rownum)
            for j, text in enumerate(row):
                kind = kinds[header[j]]
                if text == "":
                    cells[j].append(_placeholder(kind))
                    masks[j].append(True)
                    continue
                try:
                    cells[j].append(_parse_cell(kind, text, token_sep))
                except ValueError:
                    raise DataError(f"cannot parse {text!r} as {kind}", row=rownum, column=header[j]) from None
                masks[j].append(False)
    cols = tuple(
        Column(h, kinds[h], _as_values(kinds[h], cells[j]), np.array(masks[j], dtype=bool))
        for j, h in enumerate(header)
    )
    return Frame(name or str(path), key, cols)


def _format_cell(kind, value, token_sep):
    if kind == "numeric":
        return repr(float(value))
    if kind == "date":
        return str(value)
    if kind == "text":
        return token_sep.join(value)
    return str(value)


def write_csv(frame: Frame, path, token_sep=TOKEN_SEP):
    """Write ``frame`` so that :func:`read_csv` with the same schema restores it."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(frame.column_names)
        cols = [(c.kind, c.values.tolist(), c.missing.tolist()) for c in frame.columns]
        for i in range(frame.n_rows):
            w.writerow(["" if m[i] else _format_cell(k, v[i], token_sep) for k, v, m in cols])


def schema_of(frame: Frame):
    return [(c.name, c.kind) for c in frame.columns]


# ------------------------------------------------------------ aggregation


@dataclass(frozen=True)
class AggSpec:
    """One aggregation: ``stat`` of ``source`` written to ``output``."""

    source: str
    stat: str
    output: str


def _group_codes(values):
    """Group index per row, groups numbered in order of first appearance."""
    index = {}
    codes = np.empty(len(values), dtype=np.int64)
    for i, v in enumerate(values.tolist()):
        codes[i] = index.setdefault(v, len(index))
    return codes, list(index)


def group_by_aggregate(frame: Frame, key: str, spec: Sequence[AggSpec]) -> Frame:
    """One row per distinct ``key`` value; missing inputs excluded from each statistic."""
    keycol = frame[key]
    if keycol.kind != "categorical":
        raise SchemaError(f"group key {key!r} must be categorical")
    if keycol.missing.any():
        raise DataError("group key has missing entries", column=key)
    outs = [s.output for s in spec]
    if len(set(outs)) != len(outs) or key in outs:
        raise SchemaError("aggregation output names must be unique and differ from the key")
    codes, groups = _group_codes(keycol.values)
    ng = len(groups)
    new_cols = [Column(key, "categorical", _as_values("categorical", groups), np.zeros(ng, bool))]
    for s in spec:
        if s.stat not in AGG_STATS:
            raise SchemaError(f"unknown statistic {s.stat!r}")
        col = frame[s.source]
        if s.stat == "text_len_sum" and col.kind != "text":
            raise SchemaError(f"text_len_sum needs a text column, {s.source!r} is {col.kind}")
        if s.stat in ("sum", "mean", "min", "max") and col.kind != "numeric":
            raise SchemaError(f"{s.stat} needs a numeric column, {s.source!r} is {col.kind}")
        present = ~col.missing
        pc = codes[present]
        cnt = np.bincount(pc, minlength=ng).astype(np.float64)
        empty = cnt == 0
        if s.stat == "count":
            new_cols.append(Column(s.output, "numeric", cnt, np.zeros(ng, bool)))
            continue
        if s.stat in ("sum", "mean"):
            tot = np.bincount(pc, weights=col.values[present], minlength=ng)
            vals = tot if s.stat == "sum" else np.divide(tot, cnt, out=np.zeros(ng), where=~empty)
            new_cols.append(Column(s.output, "numeric", vals, empty))
        elif s.stat in ("min", "max"):
            init, ufunc = (np.inf, np.minimum) if s.stat == "min" else (-np.inf, np.maximum)
            vals = np.full(ng, init)
            ufunc.at(vals, pc, col.values[present])
            vals[empty] = 0.0
            new_cols.append(Column(s.output, "numeric", vals, empty))
        elif s.stat == "text_len_sum":
            lens = np.array([sum(len(t) for t in toks) for toks in col.values[present]], dtype=np.float64)
            vals = np.bincount(pc, weights=lens, minlength=ng)
            new_cols.append(Column(s.output, "numeric", vals, empty))
        elif s.stat == "nunique":
            seen = [set() for _ in range(ng)]
            for c, v in zip(pc.tolist(), col.values[present].tolist()):
                seen[c].add(v)
            vals = np.array([len(x) for x in seen], dtype=np.float64)
            new_cols.append(Column(s.output, "numeric", vals, np.zeros(ng, bool)))
        else:  # first
            first = np.full(ng, -1, dtype=np.int64)
            rows = np.flatnonzero(present)
            for r in rows[::-1]:
                first[codes[r]] = r
            src = np.where(first < 0, 0, first)
            vals = col.values[src] if frame.n_rows else col.values[:0]
            new_cols.append(Column(s.output, col.kind, vals, first < 0))
    return Frame(f"agg({frame.name})", key, tuple(new_cols))


def left_join(left: Frame, right: Frame, key: str) -> Frame:
    """Many-to-one left join; unmatched left rows get missing right columns."""
    rkeys = right[key].values.tolist()
    pos = {}
    for i, k in enumerate(rkeys):
        if k in pos:
            raise DataError(f"duplicate key {k!r} in right frame", row=i + 1, column=key)
        pos[k] = i
    clash = [c.name for c in right.columns if c.name != key and c.name in left]
    if clash:
        raise SchemaError(f"columns present on both sides: {clash}")
    lkeys = left[key].values.tolist()
    idx = np.array([pos.get(k, -1) for k in lkeys], dtype=np.int64)
    unmatched = idx < 0
    src = np.where(unmatched, 0, idx)
    new = []
    for c in right.columns:
        if c.name == key:
            continue
        if right.n_rows == 0:
            vals = _as_values(c.kind, [_placeholder(c.kind)] * left.n_rows)
            new.append(Column(c.name, c.kind, vals, np.ones(left.n_rows, bool)))
        else:
            new.append(Column(c.name, c.kind, c.values[src], c.missing[src] | unmatched))
    return left.with_columns(new)


# ------------------------------------------------------------ exploration


@dataclass
class ColumnSummary:
    name: str
    kind: str
    count: int
    missing: int
    mean: float | None = None
    min: object = None
    max: object = None
    std: float | None = None
    distinct: int | None = None
    top: list = field(default_factory=list)

    def to_dict(self):
        d = dict(self.__dict__)
        for k in ("min", "max"):
            if isinstance(d[k], np.datetime64):
                d[k] = str(d[k])
        return d


def summary_stats(frame: Frame, top_n=5) -> dict:
    """Per-column descriptive statistics. Undefined statistics are ``None``."""
    out = {}
    for c in frame.columns:
        present = ~c.missing
        n = int(present.sum())
        s = ColumnSummary(c.name, c.kind, n, int(c.missing.sum()))
        vals = c.values[present]
        if c.kind == "numeric" and n:
            s.mean = float(np.mean(vals))
            s.min = float(vals.min())
            s.max = float(vals.max())
            s.std = float(np.std(vals, ddof=1)) if n >= 2 else None
        elif c.kind == "date" and n:
            s.min, s.max = vals.min(), vals.max()
        if c.kind in ("categorical", "date", "text") and n:
            counts = {}
            for v in vals.tolist():
                counts[v] = counts.get(v, 0) + 1
            s.distinct = len(counts)
            ranked = sorted(counts.items(), key=lambda kv: (-kv[1], str(kv[0])))
            s.top = [(str(v) if not isinstance(v, tuple) else TOKEN_SEP.join(v), k) for v, k in ranked[:top_n]]
        elif c.kind == "numeric":
            s.distinct = int(np.unique(vals).size)
        out[c.name] = s
    return out


def nearest_rank(sorted_values, q):
    """Nearest-rank quantile of an ascending array (no interpolation)."""
    n = len(sorted_values)
    rank = min(n, max(1, math.ceil(q * n)))
    return sorted_values[rank - 1]


def clip_outliers(frame: Frame, column: str, lo_q: float, hi_q: float) -> Frame:
    """Winsorize ``column`` to its nearest-rank ``[lo_q, hi_q]`` quantiles."""
    col = frame[column]
    if col.kind != "numeric":
        raise SchemaError(f"clip_outliers needs a numeric column, {column!r} is {col.kind}")
    if not (0.0 <= lo_q < hi_q <= 1.0):
        raise ValueError("need 0 <= lo_q < hi_q <= 1")
    present = ~col.missing
    if not present.any():
        return frame
    s = np.sort(col.values[present])
    lo, hi = nearest_rank(s, lo_q), nearest_rank(s, hi_q)
    vals = np.where(present, np.clip(col.values, lo, hi), col.values)
    return frame.replace(Column(column, "numeric", vals, col.missing))


def concat(frames: Sequence[Frame], name=None) -> Frame:
    """Stack frames with identical schemas row-wise."""
    if not frames:
        raise ValueError("nothing to concatenate")
    first = frames[0]
    schema = schema_of(first)
    for f in frames[1:]:
        if schema_of(f) != schema:
            raise SchemaError(f"frame {f.name!r} has a different schema from {first.name!r}")
    cols = []
    for j, (n, kind) in enumerate(schema):
        vals = np.concatenate([f.columns[j].values for f in frames])
        miss = np.concatenate([f.columns[j].missing for f in frames])
        cols.append(Column(n, kind, vals, miss))
    return Frame(name or first.name, first.key, tuple(cols))


def read_header(path):
    with open(path, newline="", encoding="utf-8") as fh:
        try:
            return next(csv.reader(fh))
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
