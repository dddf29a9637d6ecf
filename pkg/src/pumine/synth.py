"""Seeded synthetic tabular data with known labels.

Positives are shifted by ``class_sep`` standard deviations on the first half
of the numeric features (the rest is noise) and draw categorical levels from
a tilted frequency table. Observed PU labels keep each true positive with
probability ``censor_c`` independently of its features. An optional drift
shifts one numeric feature in the train split only.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from .dataset import Column, Frame

N_LEVELS = 5


@dataclass(frozen=True)
class SynthSpec:
    n_rows: int = 2000
    n_numeric: int = 6
    n_categorical: int = 2
    class_sep: float = 1.5
    positive_rate: float = 0.3
    drift: tuple | None = None  # (numeric feature index, shift in sd units)
    censor_c: float = 1.0
    seed: int = 0
    n_test: int | None = None  # defaults to n_rows
    missing_rate: float = 0.0

    def __post_init__(self):
        if self.n_rows < 1 or self.n_numeric < 0 or self.n_categorical < 0:
            raise ValueError("n_rows must be positive and feature counts non-negative")
        if self.n_numeric + self.n_categorical == 0:
            raise ValueError("need at least one feature")
        if not 0.0 < self.positive_rate < 1.0:
            raise ValueError("positive_rate must be in (0, 1)")
        if not 0.0 < self.censor_c <= 1.0:
            raise ValueError("censor_c must be in (0, 1]")
        if self.class_sep < 0:
            raise ValueError("class_sep must be >= 0")
        if not 0.0 <= self.missing_rate < 1.0:
            raise ValueError("missing_rate must be in [0, 1)")
        if self.drift is not None:
            j, _ = self.drift
            if not 0 <= int(j) < self.n_numeric:
                raise ValueError(f"drift feature {j} out of range")

    @property
    def n_informative(self):
        return (self.n_numeric + 1) // 2

    def to_dict(self):
        d = asdict(self)
        d["drift"] = list(self.drift) if self.drift is not None else None
        return d


class SynthData(NamedTuple):
    train: Frame
    test: Frame
    true_labels: np.ndarray  # train rows
    pu_labels: np.ndarray  # train rows, 1 = observed positive


def _level_tables(class_sep):
    neg = np.arange(N_LEVELS, 0, -1, dtype=np.float64)
    neg /= neg.sum()
    tilt = min(1.0, class_sep / 4.0)
    pos = (1.0 - tilt) * neg + tilt * neg[::-1]
    return np.cumsum(neg), np.cumsum(pos)


def _draw(rng, spec: SynthSpec, n, prefix):
    y = rng.random(n) < spec.positive_rate
    Z = rng.standard_normal((n, spec.n_numeric))
    Z[y, : spec.n_informative] += spec.class_sep
    cneg, cpos = _level_tables(spec.class_sep)
    cats = []
    for _ in range(spec.n_categorical):
        u = rng.random(n)
        lvl = np.where(y, np.searchsorted(cpos, u, side="right"), np.searchsorted(cneg, u, side="right"))
        cats.append(np.minimum(lvl, N_LEVELS - 1))
    miss = rng.random((n, spec.n_numeric)) < spec.missing_rate
    width = len(str(max(n - 1, 1)))
    ids = [f"{prefix}{i:0{width}d}" for i in range(n)]
    return y, Z, cats, miss, ids


def _frame(name, ids, Z, cats, miss):
    n = len(ids)
    cols = [Column("id", "categorical", ids, np.zeros(n, bool))]
    for j in range(Z.shape[1]):
        cols.append(Column(f"num_{j}", "numeric", Z[:, j], miss[:, j]))
    for j, lvl in enumerate(cats):
        cols.append(Column(f"cat_{j}", "categorical", [f"L{v}" for v in lvl.tolist()], np.zeros(n, bool)))
    return Frame(name, "id", tuple(cols))


def generate(spec: SynthSpec) -> SynthData:
    """Train frame, test frame, true train labels and observed PU train labels."""
    rng = np.random.default_rng(spec.seed)
    y, Z, cats, miss, ids = _draw(rng, spec, spec.n_rows, "u")
    observed = y & (rng.random(spec.n_rows) < spec.censor_c)
    n_test = spec.n_rows if spec.n_test is None else spec.n_test
    _, Zt, cats_t, miss_t, ids_t = _draw(rng, spec, n_test, "t")
    if spec.drift is not None:
        j, shift = spec.drift
        Z[:, int(j)] += float(shift)
    return SynthData(
        _frame("synth_train", ids, Z, cats, miss),
        _frame("synth_test", ids_t, Zt, cats_t, miss_t),
        y.astype(np.int64),
        observed.astype(np.int64),
    )


def numeric_matrix(frame: Frame, fit_on: Frame | None = None):
    """Dense matrix of the numeric columns plus count-encoded categoricals.

    Count maps are fitted on ``fit_on`` (default: ``frame`` itself); pass the
    train frame when encoding a test frame so both share one map.
    """
    from .features import CountEncoder

    ref = frame if fit_on is None else fit_on
    names, cols = [], []
    for c in frame.columns:
        if c.name == frame.key:
            continue
        if c.kind == "categorical":
            c = CountEncoder.fit(ref, c.name).apply(frame)[f"count({c.name})"]
        if c.kind == "numeric":
            names.append(c.name)
            cols.append(c.as_float())
    return np.column_stack(cols), names
