"""Reading and writing measures, plans and grid densities."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .errors import ParseError, SchemaViolation, ValidationError
from .measures import DiscreteMeasure, new_discrete


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _first_nonfinite(obj, where="$"):
    if isinstance(obj, float) and not math.isfinite(obj):
        return where
    if isinstance(obj, dict):
        items = ((f"{where}.{k}", v) for k, v in obj.items())
    elif isinstance(obj, list):
        items = ((f"{where}[{i}]", v) for i, v in enumerate(obj))
    else:
        return None
    for w, v in items:
        hit = _first_nonfinite(v, w)
        if hit:
            return hit
    return None


def _checked(obj):
    hit = _first_nonfinite(obj)
    if hit:
        raise SchemaViolation("non-finite number is not allowed", path=hit)
    return obj


def load_json(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: malformed JSON ({exc.msg} at line {exc.lineno})") from exc
    return _checked(obj)


def _finite_number(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaViolation("expected a number", path=where)
    if not math.isfinite(v):
        raise SchemaViolation("non-finite number", path=where)
    return float(v)


def measure_from_obj(obj) -> DiscreteMeasure:
    """Validate ``{"dim": d, "points": [[...], ...], "weights": [...]}``."""
    if not isinstance(obj, dict):
        raise SchemaViolation("measure must be a JSON object", path="$")
    for key in ("dim", "points", "weights"):
        if key not in obj:
            raise SchemaViolation(f"missing field '{key}'", path=f"$.{key}")
    d = obj["dim"]
    if isinstance(d, bool) or not isinstance(d, int) or d < 1:
        raise SchemaViolation("dim must be a positive integer", path="$.dim")
    pts, wts = obj["points"], obj["weights"]
    if not isinstance(pts, list) or not pts:
        raise SchemaViolation("points must be a non-empty list", path="$.points")
    if not isinstance(wts, list) or len(wts) != len(pts):
        raise SchemaViolation("weights must be a list with one entry per point", path="$.weights")
    P = np.empty((len(pts), d))
    for i, row in enumerate(pts):
        if not isinstance(row, list) or len(row) != d:
            raise SchemaViolation(f"point {i} must have {d} coordinates", path=f"$.points[{i}]")
        for a, v in enumerate(row):
            P[i, a] = _finite_number(v, f"$.points[{i}][{a}]")
    W = np.array([_finite_number(v, f"$.weights[{i}]") for i, v in enumerate(wts)])
    for i in np.flatnonzero(W < 0):
        raise SchemaViolation(f"weight {i} is negative", path=f"$.weights[{i}]")
    return new_discrete(P, W)


def measure_to_obj(m: DiscreteMeasure) -> dict:
    return {"dim": m.dim, "points": m.points.tolist(), "weights": m.weights.tolist()}


def _read_csv_rows(path):
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from exc
    out = []
    for k, r in enumerate(rows):
        try:
            out.append([float(c) for c in r])
        except ValueError as exc:
            raise ParseError(f"{path}: row {k + 1} is not numeric") from exc
    return out


def parse_measure(path) -> DiscreteMeasure:
    """JSON measure, or CSV with coordinates in the leading columns and the weight last."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        rows = _read_csv_rows(path)
        if not rows:
            raise ParseError(f"{path}: no rows")
        width = len(rows[0])
        if width < 2:
            raise ParseError(f"{path}: need at least one coordinate and a weight per row")
        for k, r in enumerate(rows):
            if len(r) != width:
                raise ParseError(f"{path}: row {k + 1} has {len(r)} columns, expected {width}")
            for a, v in enumerate(r):
                if not math.isfinite(v):
                    raise SchemaViolation(f"row {k + 1}, column {a + 1}: non-finite number", path=f"row[{k}][{a}]")
        arr = np.array(rows)
        if np.any(arr[:, -1] < 0):
            raise SchemaViolation("negative weight", path="weights")
        return new_discrete(arr[:, :-1], arr[:, -1])
    return measure_from_obj(load_json(path))


def serialize_measure(m: DiscreteMeasure, path) -> None:
    """Write JSON (or CSV for a ``.csv`` path); floats use round-trip ``repr``."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            for x, wt in zip(m.points, m.weights):
                w.writerow([repr(float(v)) for v in x] + [repr(float(wt))])
        return
    path.write_text(json.dumps(measure_to_obj(m)) + "\n")


def parse_density_csv(path):
    """``a,b,n`` header then ``n`` cell values (any layout); returns ``(a, b, values)``."""
    rows = _read_csv_rows(path)
    if not rows or len(rows[0]) != 3:
        raise ParseError(f"{path}: first row must be 'a,b,n'")
    a, b, n = rows[0]
    if not float(n).is_integer() or n < 1:
        raise ParseError(f"{path}: cell count must be a positive integer")
    vals = [v for r in rows[1:] for v in r]
    if len(vals) != int(n):
        raise ParseError(f"{path}: header announces {int(n)} cells, found {len(vals)}")
    vals = np.array(vals)
    if not np.all(np.isfinite(vals)) or not (math.isfinite(a) and math.isfinite(b)):
        raise SchemaViolation("non-finite value in density file", path="values")
    if not b > a:
        raise ValidationError(f"empty interval [{a}, {b}]")
    return float(a), float(b), vals


def parse_numbers(text_or_path):
    """A JSON list of numbers, given inline or as a file path."""
    p = Path(text_or_path)
    obj = load_json(p) if p.exists() else _loads_inline(text_or_path)
    if isinstance(obj, dict) and "values" in obj:
        obj = obj["values"]
    if not isinstance(obj, list):
        raise SchemaViolation("expected a list of numbers", path="$")
    return np.array([_finite_number(v, f"$[{i}]") for i, v in enumerate(obj)])


def _loads_inline(text):
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON argument: {exc.msg}") from exc
    return _checked(obj)


def load_json_arg(text_or_path):
    """JSON given inline or as a path to a file."""
    p = Path(text_or_path)
    if not text_or_path.lstrip().startswith(("{", "[")) and p.exists():
        return load_json(p)
    return _loads_inline(text_or_path)
