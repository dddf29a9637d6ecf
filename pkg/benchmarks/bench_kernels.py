"""Compare the compiled kernels against the numpy fallback.

Times histogram construction, tree traversal and an end-to-end GBDT fit
with each backend in one process and checks that both give identical bits.

    python benchmarks/bench_kernels.py --rows 20000 --features 20 --trees 50
"""
import argparse
import time

import numpy as np

from pumine import _kernels, docio, gbdt
from pumine._kernels import _pykernels
from pumine.gbdt.binning import bin_features

try:
    from pumine._kernels import _ckernels
except ImportError:
    _ckernels = None


def best_of(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=20000)
    ap.add_argument("--features", type=int, default=20)
    ap.add_argument("--trees", type=int, default=50)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if _ckernels is None:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")

    r = np.random.default_rng(args.seed)
    X = r.standard_normal((args.rows, args.features))
    X[r.random(X.shape) < 0.02] = np.nan
    y = (np.nan_to_num(X[:, 0]) + 0.5 * np.nan_to_num(X[:, 1]) + r.standard_normal(args.rows) > 0).astype(int)
    _, binned = bin_features(X)
    width = int(binned.max()) + 1
    offsets = np.arange(args.features + 1, dtype=np.int64) * width
    rows = np.arange(args.rows, dtype=np.int64)
    feats = np.arange(args.features, dtype=np.int64)
    g, h = r.standard_normal(args.rows), r.random(args.rows)
    params = gbdt.GBDTParams(num_trees=args.trees)
    _kernels.set_num_threads(args.threads)

    results = {}
    for name, impl in (("python", _pykernels), ("cython", _ckernels)):
        _kernels._impl = impl
        t_hist, hist = best_of(lambda: _kernels.build_histograms(binned, rows, feats, offsets, g, h), args.repeat)
        t_fit, model = best_of(lambda: gbdt.train(params, X, y), args.repeat)
        t_pred, pred = best_of(lambda: gbdt.predict(model, X), args.repeat)
        results[name] = (t_hist, t_fit, t_pred, hist, model, pred)

    py, cy = results["python"], results["cython"]
    same = (all(np.array_equal(a, b) for a, b in zip(py[3], cy[3])) and docio.dumps("m", py[4].to_dict()) == docio.dumps("m", cy[4].to_dict())
            and np.array_equal(py[5], cy[5]))
    print(f"rows={args.rows} features={args.features} trees={args.trees} threads={args.threads}")
    print(f"{'stage':<12}{'python s':>12}{'cython s':>12}{'speedup':>10}")
    for i, stage in enumerate(("histogram", "train", "predict")):
        print(f"{stage:<12}{py[i]:>12.4f}{cy[i]:>12.4f}{py[i] / cy[i]:>10.2f}")
    print(f"identical outputs: {same}")


if __name__ == "__main__":
    main()
