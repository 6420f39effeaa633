"""Report emission: JSON documents and CSV tables with a config header."""
import csv
import datetime as _dt
import json
import math
import os

import numpy as np

from . import __version__


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def header(config):
    return {"tool": "treeips", "version": __version__,
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "config": _clean(config)}


def write_json(path, config, body):
    """Write {"header": ..., "body": ...}; the body is key-sorted so repeated
    runs differ only in the timestamp."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        json.dump({"header": header(config), "body": _clean(body)}, fh, indent=1, sort_keys=True)
    return path


def write_csv(path, config, rows, columns=None):
    """CSV with the header as '#'-prefixed JSON on the first line."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    rows = [_clean(r) for r in rows]
    if columns is None:
        columns = []
        for r in rows:
            columns.extend(k for k in r if k not in columns)
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(header(config), sort_keys=True) + "\n")
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: (json.dumps(v) if isinstance(v, (list, dict)) else v)
                        for k, v in r.items()})
    return path


def read_csv(path):
    with open(path) as fh:
        first = fh.readline()
        head = json.loads(first[2:]) if first.startswith("# ") else None
        if head is None:
            fh.seek(0)
        rows = list(csv.DictReader(fh))
    return head, rows


def write_jsonl(path, records):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(_clean(rec), sort_keys=True) + "\n")
    return path
