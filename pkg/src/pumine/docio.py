"""Versioned JSON document container shared by models, reports and configs.

Every document carries ``format``, ``version`` and ``kind`` keys. Floats are
written with ``repr`` (shortest round-trip form), so loading a document
reproduces every float bit for bit. Non-finite floats are not allowed.
"""
import json
import math
from pathlib import Path

import numpy as np

from .errors import DataError

FORMAT = "pumine"
VERSION = 1


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if not math.isfinite(v):
            raise ValueError(f"non-finite float {v!r} cannot be serialized")
        return v
    return obj


def dumps(kind, payload):
    doc = {"format": FORMAT, "version": VERSION, "kind": kind}
    doc.update(_plain(payload))
    return json.dumps(doc, indent=1, sort_keys=True, allow_nan=False) + "\n"


def loads(text, kind=None):
    doc = json.loads(text)
    if doc.get("format") != FORMAT:
        raise DataError("not a pumine document")
    if doc.get("version") != VERSION:
        raise DataError(f"unsupported document version {doc.get('version')!r}")
    if kind is not None and doc.get("kind") != kind:
        raise DataError(f"expected a {kind!r} document, got {doc.get('kind')!r}")
    return doc


def save(path, kind, payload):
    Path(path).write_text(dumps(kind, payload), encoding="utf-8")


def load(path, kind=None):
    return loads(Path(path).read_text(encoding="utf-8"), kind)
