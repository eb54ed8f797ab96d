"""CSV and JSON helpers shared by the CLI and the benchmark."""

import csv
import io
import json
import math

import numpy as np

SCHEMA_VERSION = 1


def fmt(v):
    """Format a table cell; floats keep 17 significant digits."""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_text(path, text):
    with open(path, "w", newline="") as f:
        f.write(text)


def write_csv(path, header, rows):
    write_text(path, csv_text(header, rows))


def read_vector(path):
    """A signal stored as CSV: one value per line, or one comma-separated row."""
    data = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    if data.shape[0] != 1 and data.shape[1] != 1:
        raise ValueError(f"{path}: expected a single row or column, got shape {data.shape}")
    return data.ravel()


def read_matrix(path):
    return np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        # JSON has no inf/nan
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def json_text(payload):
    body = {"schema_version": SCHEMA_VERSION}
    body.update(to_jsonable(payload))
    return json.dumps(body, indent=2, sort_keys=False) + "\n"


def load_json(path_or_text):
    text = path_or_text
    if not text.lstrip().startswith(("{", "[")):
        with open(path_or_text) as f:
            text = f.read()
    return json.loads(text)
