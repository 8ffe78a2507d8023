"""Deterministic result files: JSON reports, CSV series, run manifests."""

import csv
import hashlib
import json
import math
import os
import pickle
import time

import numpy as np

from . import __version__


def fmt(x):
    """Fixed 17-significant-digit text for a real number."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def _plain(obj):
    # numpy scalars/arrays and complex numbers to JSON-friendly values
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _plain(obj.real), "im": _plain(obj.imag)}
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return float(fmt(x))
        return fmt(x)
    return obj


def dumps_json(obj):
    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        fh.write(dumps_json(obj))
    return path


def write_csv(path, columns):
    """``columns`` maps header -> 1-d sequence; all the same length."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    names = list(columns)
    data = [np.asarray(columns[k]).ravel() for k in names]
    n = {len(d) for d in data}
    if len(n) > 1:
        raise ValueError(f"column lengths differ: {sorted(n)}")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in zip(*data):
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return {h: np.array([float(r[i]) for r in body]) for i, h in enumerate(header)}


def write_manifest(outdir, config_hash, wall_time, extra=None):
    rec = {"config_hash": config_hash, "tool_version": __version__,
           "wall_time_s": wall_time}
    if extra:
        rec.update(extra)
    # wall time varies run to run, so the manifest is kept apart from results
    return write_json(os.path.join(outdir, "manifest.json"), rec)


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def file_digest(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


class DiskCache:
    """Pickled objects under ``root/<key>/<name>.pkl``."""

    def __init__(self, root):
        self.root = root

    def path(self, key, name):
        return os.path.join(self.root, key, name + ".pkl")

    def get(self, key, name):
        p = self.path(key, name)
        if not os.path.exists(p):
            return None
        with open(p, "rb") as fh:
            return pickle.load(fh)

    def put(self, key, name, obj):
        p = self.path(key, name)
        os.makedirs(os.path.dirname(p), exist_ok=True)
        tmp = p + ".tmp"
        with open(tmp, "wb") as fh:
            pickle.dump(obj, fh)
        os.replace(tmp, p)
        return obj
