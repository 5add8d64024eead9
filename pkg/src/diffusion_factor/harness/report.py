"""Write result tables and a run manifest."""

import csv
import hashlib
import json
import os
import platform
import time

import numpy as np

from .. import __version__
from .._backend import BACKEND
from ..errors import InvalidInputError
from .config import config_hash

MANIFEST = "manifest.json"
# files whose content records wall-clock time and so differs between runs
VOLATILE = {MANIFEST, "train_log.csv"}


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


def write_table(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def emit_report(out_dir, tables, cfg=None, seeds=None, started=None, extra=None):
    """Write ``tables`` (name -> (columns, rows)) as CSV plus ``manifest.json``.

    The manifest lists every file in ``out_dir`` with its SHA-256.
    """
    if not tables:
        raise InvalidInputError("nothing to report")
    os.makedirs(out_dir, exist_ok=True)
    for name, (columns, rows) in tables.items():
        write_table(os.path.join(out_dir, name), columns, rows)
    return write_manifest(out_dir, cfg, seeds, started, extra)


def write_manifest(out_dir, cfg=None, seeds=None, started=None, extra=None):
    files = {}
    for root, _, names in os.walk(out_dir):
        for name in sorted(names):
            path = os.path.join(root, name)
            rel = os.path.relpath(path, out_dir)
            if rel == MANIFEST:
                continue
            files[rel] = file_sha256(path)
    doc = {
        "package_version": __version__,
        "backend": BACKEND,
        "numpy": np.__version__,
        "python": platform.python_version(),
        "config_hash": config_hash(cfg) if cfg is not None else None,
        "config": cfg.to_dict() if cfg is not None else None,
        "seeds": seeds,
        "wall_time_s": None if started is None else time.time() - started,
        "files": dict(sorted(files.items())),
    }
    if extra:
        doc.update(extra)
    path = os.path.join(out_dir, MANIFEST)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=str)
    return path
