"""Config-driven command line: ``pumine <command> --config run.yaml``.

Commands: explore, features, adversarial, cv, train, predict, pu, synth.
Every artifact goes under the output directory, together with a
``manifest_<command>.json`` naming the inputs (with content hashes), the
config hash and the seed. Exit codes: 0 ok, 2 config, 3 data, 4 numeric.
"""
from __future__ import annotations

import argparse
import hashlib
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from . import _kernels, docio, gbdt
from .dataset import KINDS, concat, left_join, read_csv, read_header, summary_stats, write_csv
from .errors import ConfigError, DataError, NumericError, PumineError, SchemaError
from .evaluation import LEARNER_NAMES, adversarial_drop, cross_validate, make_learner
from .features import DerivationSpec, FeaturePipeline, FeatureSettings, null_pattern_groups
from .pulearn import PUDataset, bagging_pu, calibrate_prior, rank_order, rank_top_k, spy_two_step, write_ranking
from .synth import SynthSpec, generate

COMMANDS = ("explore", "features", "adversarial", "cv", "train", "predict", "pu", "synth")
INPUT_KEYS = ("train", "test", "labels", "pu_labels", "positives", "unlabeled")
TOP_KEYS = {"seed", "threads", "output_dir", "key", "label", "inputs", "schema", "features", "gbdt", "eval",
            "adversarial", "pu", "synth"}

PU_DEFAULTS = {"method": "bagging", "rounds": 100, "neg_ratio": 1.0, "spy_frac": 0.1, "spy_quantile": 0.05,
               "top_k": 10000, "calibrate": False, "holdout_frac": 0.2}
EVAL_DEFAULTS = {"k": 5, "learners": list(LEARNER_NAMES), "params": {}}
ADV_DEFAULTS = {"auc_target": 0.6, "max_drops": None, "k": 5}


@dataclass
class PipelineConfig:
    source: Path | None
    digest: str
    seed: int = 0
    threads: int = 1
    output_dir: Path = Path("out")
    key: str = "id"
    label: str = "label"
    inputs: dict = field(default_factory=dict)
    schema: list | None = None
    features: FeatureSettings = field(default_factory=FeatureSettings)
    gbdt: gbdt.GBDTParams = field(default_factory=gbdt.GBDTParams)
    eval: dict = field(default_factory=lambda: dict(EVAL_DEFAULTS))
    adversarial: dict = field(default_factory=lambda: dict(ADV_DEFAULTS))
    pu: dict = field(default_factory=lambda: dict(PU_DEFAULTS))
    synth: dict = field(default_factory=dict)

    def input(self, name, required=True):
        path = self.inputs.get(name)
        if path is None:
            if required:
                raise ConfigError(f"inputs.{name} is required for this command")
            return None
        if not path.is_file():
            raise ConfigError(f"inputs.{name}: file not found: {path}")
        return path


def _merge(defaults, given, section):
    given = given or {}
    if not isinstance(given, dict):
        raise ConfigError(f"{section} must be a mapping")
    unknown = sorted(set(given) - set(defaults))
    if unknown:
        raise ConfigError(f"{section}: unknown keys {unknown}")
    return {**defaults, **given}


def _schema(raw):
    if raw is None:
        return None
    if isinstance(raw, dict):
        pairs = list(raw.items())
    elif isinstance(raw, list):
        try:
            pairs = [(str(n), str(k)) for n, k in raw]
        except (TypeError, ValueError):
            raise ConfigError("schema list entries must be [name, kind] pairs") from None
    else:
        raise ConfigError("schema must be a mapping of column name to kind")
    for n, k in pairs:
        if k not in KINDS:
            raise ConfigError(f"schema: column {n!r} has unknown kind {k!r}")
    return [(str(n), str(k)) for n, k in pairs]


def _feature_settings(raw, seed):
    raw = dict(raw or {})
    deriv = raw.pop("derivation", None) or {}
    allowed = {f.name for f in fields(FeatureSettings)} - {"derivation", "seed"}
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(f"features: unknown keys {unknown}")
    dkeys = {f.name for f in fields(DerivationSpec)}
    if set(deriv) - dkeys:
        raise ConfigError(f"features.derivation: unknown keys {sorted(set(deriv) - dkeys)}")
    spec = DerivationSpec(
        [tuple(p) for p in deriv.get("cross_pairs", [])],
        [tuple(t) for t in deriv.get("cross_triples", [])],
        [tuple(g) for g in deriv.get("groupby", [])],
        list(deriv.get("count_encode", [])),
    )
    if "clip" in raw:
        raw["clip"] = [tuple(c) for c in raw["clip"]]
    s = FeatureSettings(derivation=spec, seed=seed, **raw)
    if not 0.0 < s.corr_threshold <= 1.0:
        raise ConfigError("features.corr_threshold must be in (0, 1]")
    if s.null_mode not in ("rows", "count"):
        raise ConfigError("features.null_mode must be 'rows' or 'count'")
    if s.text_dim < 1:
        raise ConfigError("features.text_dim must be positive")
    return s


def load_config(path=None, seed=None, out=None) -> PipelineConfig:
    """Parse a YAML config; paths inside it are relative to the file."""
    text = ""
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    try:
        raw = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    unknown = sorted(set(raw) - TOP_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys {unknown}")
    base = path.parent if path is not None else Path(".")
    try:
        master = int(raw.get("seed", 0) if seed is None else seed)
        threads = int(raw.get("threads", 1))
    except (TypeError, ValueError):
        raise ConfigError("seed and threads must be integers") from None
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    inputs = raw.get("inputs") or {}
    if set(inputs) - set(INPUT_KEYS):
        raise ConfigError(f"inputs: unknown keys {sorted(set(inputs) - set(INPUT_KEYS))}")
    out_dir = Path(out) if out is not None else base / raw.get("output_dir", "out")
    try:
        features = _feature_settings(raw.get("features"), master)
        params = gbdt.GBDTParams(**{**(raw.get("gbdt") or {}), "seed": master})
        pu = _merge(PU_DEFAULTS, raw.get("pu"), "pu")
        ev = _merge(EVAL_DEFAULTS, raw.get("eval"), "eval")
        adv = _merge(ADV_DEFAULTS, raw.get("adversarial"), "adversarial")
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if pu["method"] not in ("bagging", "spy"):
        raise ConfigError("pu.method must be 'bagging' or 'spy'")
    if int(pu["top_k"]) < 1 or int(pu["rounds"]) < 1:
        raise ConfigError("pu.top_k and pu.rounds must be >= 1")
    bad = [n for n in ev["learners"] if n not in LEARNER_NAMES]
    if bad:
        raise ConfigError(f"eval.learners: unknown learners {bad}")
    if int(ev["k"]) < 2:
        raise ConfigError("eval.k must be >= 2")
    return PipelineConfig(
        source=path,
        digest=hashlib.sha256(text.encode("utf-8")).hexdigest(),
        seed=master,
        threads=threads,
        output_dir=out_dir,
        key=str(raw.get("key", "id")),
        label=str(raw.get("label", "label")),
        inputs={k: base / v for k, v in inputs.items() if v is not None},
        schema=_schema(raw.get("schema")),
        features=features,
        gbdt=params,
        eval=ev,
        adversarial=adv,
        pu=pu,
        synth=dict(raw.get("synth") or {}),
    )


# ------------------------------------------------------------------ helpers


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _out(cfg, name):
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    return cfg.output_dir / name


def _manifest(cfg, command, used, outputs):
    docio.save(_out(cfg, f"manifest_{command}.json"), "manifest", {
        "command": command,
        "config_sha256": cfg.digest,
        "seed": cfg.seed,
        "inputs": {k: {"path": str(p), "sha256": _sha256(p)} for k, p in sorted(used.items())},
        "outputs": sorted(outputs),
    })


def _read(cfg, name, required=True):
    """Read an input CSV with the config schema restricted to its header."""
    path = cfg.input(name, required)
    if path is None:
        return None, None
    if cfg.schema is None:
        raise ConfigError("schema is required to read CSV inputs")
    header = read_header(path)
    kinds = dict(cfg.schema)
    unknown = [h for h in header if h not in kinds]
    if unknown:
        raise SchemaError(f"{path}: columns {unknown} are not in the schema")
    if cfg.key not in header:
        raise SchemaError(f"{path}: key column {cfg.key!r} not found")
    schema = [(n, k) for n, k in cfg.schema if n in header]
    return read_csv(path, schema, name=name, key=cfg.key), path


def _read_labels(cfg, name):
    path = cfg.input(name)
    header = read_header(path)
    if cfg.key not in header or cfg.label not in header or len(header) != 2:
        raise SchemaError(f"{path}: expected columns {cfg.key!r} and {cfg.label!r}")
    schema = [(n, "categorical" if n == cfg.key else "numeric") for n in header]
    return read_csv(path, schema, name=name, key=cfg.key), path


def _labels_from(frame, column):
    col = frame[column]
    if col.kind != "numeric":
        raise SchemaError(f"label column {column!r} must be numeric")
    if col.missing.any():
        raise DataError("missing label", row=int(np.flatnonzero(col.missing)[0]) + 1, column=column)
    y = col.values
    if not np.isin(y, (0.0, 1.0)).all():
        bad = int(np.flatnonzero(~np.isin(y, (0.0, 1.0)))[0]) + 1
        raise DataError("labels must be 0 or 1", row=bad, column=column)
    return y.astype(np.int64)


def _labelled_train(cfg, used, label_input="labels"):
    """Train frame without its label column, plus the 0/1 label vector."""
    train, used["train"] = _read(cfg, "train")
    if cfg.label in train:
        return train.drop([cfg.label]), _labels_from(train, cfg.label)
    labels, used[label_input] = _read_labels(cfg, label_input)
    joined = left_join(train, labels, cfg.key)
    return train, _labels_from(joined, cfg.label)


def _test(cfg, used):
    test, path = _read(cfg, "test", required=False)
    if test is not None:
        used["test"] = path
        if cfg.label in test:
            test = test.drop([cfg.label])
    return test


def _fit_pipeline(cfg, frame, labels=None):
    return FeaturePipeline(cfg.features, cfg.label).fit(frame, labels)


def _predictions_csv(path, ids, scores):
    order = rank_order(ids, scores)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("id,score,rank\n")
        for r, i in enumerate(order, start=1):
            fh.write(f"{ids[i]},{float(scores[i])!r},{r}\n")


def _print_table(rows, headers):
    cells = [headers] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[j]) for r in cells) for j in range(len(headers))]
    for i, r in enumerate(cells):
        print("  ".join(c.ljust(w) if j == 0 else c.rjust(w) for j, (c, w) in enumerate(zip(r, widths))))
        if i == 0:
            print("  ".join("-" * w for w in widths))


# ----------------------------------------------------------------- commands


def cmd_explore(cfg: PipelineConfig):
    used = {}
    frames = []
    train, used["train"] = _read(cfg, "train")
    frames.append(("train", train))
    test = _test(cfg, used)
    if test is not None:
        frames.append(("test", test))
    report = {}
    for role, frame in frames:
        stats = summary_stats(frame)
        report[role] = {
            "n_rows": frame.n_rows,
            "columns": [stats[n].to_dict() for n in frame.column_names],
            "all_missing": [c.name for c in frame.columns if frame.n_rows and c.missing.all()],
            "null_groups": [
                {"columns": list(g.columns), "missing_count": g.missing_count, "complete": g.complete}
                for g in null_pattern_groups(frame, cfg.features.null_mode)
            ],
        }
        for name in report[role]["all_missing"]:
            print(f"warning: {role} column {name!r} is entirely missing", file=sys.stderr)
    docio.save(_out(cfg, "explore_report.json"), "explore_report", report)
    _manifest(cfg, "explore", used, ["explore_report.json"])
    print(f"explore: {len(frames)} frame(s) summarized -> {cfg.output_dir / 'explore_report.json'}")


def cmd_features(cfg: PipelineConfig):
    used = {}
    train, used["train"] = _read(cfg, "train")
    labels = None
    if cfg.label in train:
        labels = _labels_from(train, cfg.label)
        train = train.drop([cfg.label])
    elif "labels" in cfg.inputs:
        labels_frame, used["labels"] = _read_labels(cfg, "labels")
        labels = _labels_from(left_join(train, labels_frame, cfg.key), cfg.label)
    test = _test(cfg, used)
    pipe = _fit_pipeline(cfg, train, labels)
    outputs = ["train_features.csv", "feature_report.json", "pipeline.json"]
    write_csv(pipe.engineered_frame(train), _out(cfg, "train_features.csv"))
    if test is not None:
        write_csv(pipe.engineered_frame(test), _out(cfg, "test_features.csv"))
        outputs.append("test_features.csv")
    docio.save(_out(cfg, "feature_report.json"), "feature_report", pipe.report.to_dict())
    docio.save(_out(cfg, "pipeline.json"), "feature_pipeline", pipe.to_dict())
    _manifest(cfg, "features", used, outputs)
    print(f"features: {len(pipe.output_columns)} columns kept, {len(pipe.report.dropped)} dropped")


def cmd_adversarial(cfg: PipelineConfig):
    used = {}
    train, used["train"] = _read(cfg, "train")
    if cfg.label in train:
        train = train.drop([cfg.label])
    test = _test(cfg, used)
    if test is None:
        raise ConfigError("inputs.test is required for adversarial validation")
    pipe = _fit_pipeline(cfg, train)
    Xtr, Xte = pipe.transform(train), pipe.transform(test)
    a = cfg.adversarial
    rep = adversarial_drop(Xtr.dense, Xte.dense, cfg.gbdt, auc_target=float(a["auc_target"]),
                           max_drops=a["max_drops"], k=int(a["k"]), seed=cfg.seed, feature_names=Xtr.names)
    docio.save(_out(cfg, "adversarial_report.json"), "adversarial_report", rep.to_dict())
    _manifest(cfg, "adversarial", used, ["adversarial_report.json"])
    print(f"adversarial: mean AUC {rep.mean_auc:.4f}, top drift feature {rep.top_feature}")
    for name, after in rep.drop_trace:
        print(f"  dropped {name}: mean AUC {after:.4f}")


def cmd_cv(cfg: PipelineConfig):
    used = {}
    train, labels = _labelled_train(cfg, used)
    pipe = _fit_pipeline(cfg, train, labels)
    X = pipe.transform(train).dense
    k = int(cfg.eval["k"])
    reports = []
    for name in cfg.eval["learners"]:
        params = dict(cfg.eval["params"].get(name, {}))
        if name == "gbdt":
            params = {**{f.name: getattr(cfg.gbdt, f.name) for f in fields(cfg.gbdt)}, **params}
        try:
            learner = make_learner(name, params)
        except TypeError as exc:
            raise ConfigError(f"eval.params.{name}: {exc}") from None
        reports.append(cross_validate(learner, X, labels, k=k, seed=cfg.seed))
    docio.save(_out(cfg, "cv_report.json"), "cv_report",
               {"k": k, "n_features": X.shape[1], "learners": [r.to_dict() for r in reports]})
    _manifest(cfg, "cv", used, ["cv_report.json"])
    _print_table([(r.learner, f"{r.mean_f1:.4f}", f"{r.mean_val_auc:.4f}", f"{r.mean_train_auc:.4f}")
                  for r in reports], ["model", "F1", "val AUC", "train AUC"])
    return reports


def cmd_train(cfg: PipelineConfig):
    used = {}
    train, labels = _labelled_train(cfg, used)
    pipe = _fit_pipeline(cfg, train, labels)
    X = pipe.transform(train)
    model = gbdt.train(cfg.gbdt, X.dense, labels, feature_names=list(X.names))
    docio.save(_out(cfg, "pipeline.json"), "feature_pipeline", pipe.to_dict())
    model.save(_out(cfg, "model.json"))
    _manifest(cfg, "train", used, ["model.json", "pipeline.json"])
    print(f"train: {len(model.trees)} trees on {X.dense.shape[0]} rows x {X.dense.shape[1]} features, "
          f"final train loss {model.train_loss[-1] if model.train_loss else float('nan'):.6f}")


def cmd_predict(cfg: PipelineConfig):
    used = {}
    test, used["test"] = _read(cfg, "test")
    if cfg.label in test:
        test = test.drop([cfg.label])
    model_path, pipe_path = cfg.output_dir / "model.json", cfg.output_dir / "pipeline.json"
    for p in (model_path, pipe_path):
        if not p.is_file():
            raise ConfigError(f"{p} not found; run the train command first")
    used["model"], used["pipeline"] = model_path, pipe_path
    pipe = FeaturePipeline.from_dict(docio.load(pipe_path, "feature_pipeline"))
    model = gbdt.GBDTModel.load(model_path)
    scores = gbdt.predict(model, pipe.transform(test).dense)
    _predictions_csv(_out(cfg, "predictions.csv"), test.ids, scores)
    _manifest(cfg, "predict", used, ["predictions.csv"])
    print(f"predict: {test.n_rows} rows scored -> {cfg.output_dir / 'predictions.csv'}")


def _pu_frames(cfg, used):
    """One frame holding every row plus the observed-positive mask."""
    if "positives" in cfg.inputs or "unlabeled" in cfg.inputs:
        pos, used["positives"] = _read(cfg, "positives")
        unl, used["unlabeled"] = _read(cfg, "unlabeled")
        pos = pos.drop([cfg.label]) if cfg.label in pos else pos
        unl = unl.drop([cfg.label]) if cfg.label in unl else unl
        frame = concat([pos, unl], name="pu")
        observed = np.concatenate([np.ones(pos.n_rows, np.int64), np.zeros(unl.n_rows, np.int64)])
        return frame, observed
    frame, observed = _labelled_train(cfg, used, "pu_labels")
    return frame, observed


def cmd_pu(cfg: PipelineConfig):
    used = {}
    frame, observed = _pu_frames(cfg, used)
    pipe = _fit_pipeline(cfg, frame)
    X = pipe.transform(frame)
    data = PUDataset.from_labels(X.dense, frame.ids, observed, X.names)
    p = cfg.pu
    if p["method"] == "spy":
        result = spy_two_step(data, cfg.gbdt, spy_frac=float(p["spy_frac"]), spy_quantile=float(p["spy_quantile"]),
                              seed=cfg.seed, fallback_rounds=int(p["rounds"]))
    else:
        result = bagging_pu(data, cfg.gbdt, rounds=int(p["rounds"]), neg_ratio=float(p["neg_ratio"]), seed=cfg.seed)
    if p["calibrate"]:
        result.c = calibrate_prior(data, cfg.gbdt, holdout_frac=float(p["holdout_frac"]), seed=cfg.seed)
    top = rank_top_k(result, int(p["top_k"]))
    if top.short_list:
        result.warnings.append(f"only {len(top.ids)} unlabeled rows, fewer than top_k={p['top_k']}")
    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)
    write_ranking(top, _out(cfg, "topk.csv"))
    docio.save(_out(cfg, "pu_result.json"), "pu_result", {**result.to_dict(), "top_k": int(p["top_k"]),
                                                          "short_list": top.short_list})
    docio.save(_out(cfg, "pu_pipeline.json"), "feature_pipeline", pipe.to_dict())
    _manifest(cfg, "pu", used, ["topk.csv", "pu_result.json", "pu_pipeline.json"])
    c = f", c={result.c:.4f}" if result.c is not None else ""
    print(f"pu: {result.method}, {data.positives.shape[0]} positives, {data.unlabeled.shape[0]} unlabeled, "
          f"top {len(top.ids)} written{c}")
    return result


def cmd_synth(cfg: PipelineConfig):
    raw = dict(cfg.synth)
    raw.pop("seed", None)  # the master seed governs
    if raw.get("drift") is not None:
        raw["drift"] = tuple(raw["drift"])
    try:
        spec = SynthSpec(seed=cfg.seed, **raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"synth: {exc}") from None
    data = generate(spec)
    ids = data.train.ids
    write_csv(data.train, _out(cfg, "train.csv"))
    write_csv(data.test, _out(cfg, "test.csv"))
    for name, y in (("labels.csv", data.true_labels), ("pu_labels.csv", data.pu_labels)):
        with open(_out(cfg, name), "w", encoding="utf-8", newline="") as fh:
            fh.write("id,label\n")
            fh.writelines(f"{i},{int(v)}\n" for i, v in zip(ids, y))
    schema = {c.name: c.kind for c in data.train.columns}
    run_cfg = {
        "seed": cfg.seed,
        "key": "id",
        "label": "label",
        "output_dir": "run",
        "inputs": {"train": "train.csv", "test": "test.csv", "labels": "labels.csv", "pu_labels": "pu_labels.csv"},
        "schema": schema,
    }
    with open(_out(cfg, "config.yaml"), "w", encoding="utf-8") as fh:
        yaml.safe_dump(run_cfg, fh, sort_keys=False)
    docio.save(_out(cfg, "manifest_synth.json"), "manifest", {
        "command": "synth",
        "config_sha256": cfg.digest,
        "seed": cfg.seed,
        "spec": spec.to_dict(),
        "outputs": ["config.yaml", "labels.csv", "pu_labels.csv", "test.csv", "train.csv"],
    })
    print(f"synth: {spec.n_rows} train rows, {data.test.n_rows} test rows, "
          f"{int(data.true_labels.sum())} positives ({int(data.pu_labels.sum())} observed)")


# --------------------------------------------------------------------- main


def build_parser():
    ap = argparse.ArgumentParser(prog="pumine", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML run config (required except for synth)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="override the output directory")
    return ap


def run(command, cfg: PipelineConfig):
    _kernels.set_num_threads(cfg.threads)
    return globals()[f"cmd_{command}"](cfg)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.config is None and args.command != "synth":
            raise ConfigError("--config is required")
        cfg = load_config(args.config, seed=args.seed, out=args.out)
        run(args.command, cfg)
    except PumineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FloatingPointError as exc:
        print(f"error: numeric failure: {exc}", file=sys.stderr)
        return NumericError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
