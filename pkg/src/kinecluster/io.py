"""CSV and JSON artifact formats.

Floats are written with ``repr`` so that values survive a write/read cycle
exactly, and a canonical file is reproduced byte-for-byte when read and
written again. Feature and label files carry a leading ``# {json}`` line
with their metadata.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .clustering import Labeling
from .errors import DataIOError, ValidationError
from .kinematics import FEATURE_KINDS, FeatureMatrix, MarkerSet

MARKER_COLUMNS = ("x_ref", "y_ref", "u_x", "u_y")
TRUTH_COLUMNS = ("x", "y", "label")


def _fmt(x):
    return repr(float(x))


def _read_lines(path):
    try:
        return Path(path).read_text().splitlines()
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc}") from exc


def _write_text(path, text):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise DataIOError(f"cannot write {path}: {exc}") from exc
    return path


def _split_meta(lines, path):
    if not lines or not lines[0].startswith("# "):
        raise ValidationError(f"{path}: missing '# {{json}}' metadata line")
    try:
        meta = json.loads(lines[0][2:])
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: bad metadata line: {exc}") from exc
    return meta, lines[1:]


def _table(lines, columns, path):
    rows = list(csv.reader(lines))
    if not rows or tuple(rows[0]) != tuple(columns):
        raise ValidationError(f"{path}: expected header {','.join(columns)}")
    body = rows[1:]
    if any(len(r) != len(columns) for r in body):
        raise ValidationError(f"{path}: ragged rows")
    try:
        return np.array(body, dtype=float).reshape(len(body), len(columns))
    except ValueError as exc:
        raise ValidationError(f"{path}: non-numeric entry ({exc})") from exc


def _csv_text(columns, rows):
    lines = [",".join(columns)]
    lines.extend(",".join(r) for r in rows)
    return "\n".join(lines) + "\n"


def jsonable(value):
    """Recursively convert numpy containers and scalars to plain JSON types."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def write_json(path, data):
    return _write_text(path, json.dumps(jsonable(data), indent=2, sort_keys=True) + "\n")


def read_json(path):
    try:
        return json.loads("\n".join(_read_lines(path)))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc


# -- markers ----------------------------------------------------------------


def write_markers(path, markers: MarkerSet):
    rows = ([_fmt(v) for v in (*p, *u)] for p, u in zip(markers.positions, markers.displacements))
    return _write_text(path, _csv_text(MARKER_COLUMNS, rows))


def read_markers(path):
    data = _table(_read_lines(path), MARKER_COLUMNS, path)
    return MarkerSet(data[:, :2], data[:, 2:], source="file")


# -- ground truth -------------------------------------------------------------


def write_ground_truth(path, points, labels):
    rows = ([_fmt(p[0]), _fmt(p[1]), str(int(lab))] for p, lab in zip(points, labels))
    return _write_text(path, _csv_text(TRUTH_COLUMNS, rows))


def read_ground_truth(path):
    """Return ``(points, labels)``."""
    data = _table(_read_lines(path), TRUTH_COLUMNS, path)
    labels = data[:, 2]
    if not np.array_equal(labels, np.round(labels)):
        raise ValidationError(f"{path}: labels must be integers")
    return data[:, :2], labels.astype(np.int64)


# -- features -----------------------------------------------------------------


def write_features(path, features: FeatureMatrix, extra=None):
    meta = {
        "kind": features.kind,
        "grid": features.grid_shape[0] if features.grid_shape else None,
        "standardized": features.standardized,
        "n_imputed": features.n_imputed,
    }
    if features.standardized:
        meta["mean"] = [float(v) for v in features.mean]
        meta["scale"] = [float(v) for v in features.scale]
        meta["zero_variance"] = [bool(v) for v in features.zero_variance]
    meta.update(extra or {})
    rows = ([_fmt(v) for v in row] for row in features.values)
    text = "# " + json.dumps(jsonable(meta), sort_keys=True) + "\n" + _csv_text(features.columns, rows)
    return _write_text(path, text)


def read_features(path):
    meta, lines = _split_meta(_read_lines(path), path)
    kind = meta.get("kind")
    if kind not in FEATURE_KINDS:
        raise ValidationError(f"{path}: unknown feature kind {kind!r}")
    values = _table(lines, FEATURE_KINDS[kind], path)
    grid = meta.get("grid")
    standardized = bool(meta.get("standardized", False))
    arr = lambda key, dtype=float: np.asarray(meta[key], dtype=dtype) if key in meta else None  # noqa: E731
    return FeatureMatrix(
        values=values,
        kind=kind,
        columns=FEATURE_KINDS[kind],
        grid_shape=(grid, grid) if grid else None,
        standardized=standardized,
        mean=arr("mean"),
        scale=arr("scale"),
        zero_variance=arr("zero_variance", bool),
        n_imputed=int(meta.get("n_imputed", 0)),
    )


# -- labels -------------------------------------------------------------------


def _scalar_params(params):
    out = {}
    for key, value in params.items():
        if isinstance(value, (bool, int, float, str, type(None), np.generic)):
            out[key] = jsonable(value)
    return out


def write_labels(path, labeling: Labeling, extra=None):
    meta = {
        "method": labeling.method,
        "k": labeling.k,
        "grid_shape": list(labeling.grid_shape) if labeling.grid_shape else None,
        "params": _scalar_params(labeling.params),
        "flags": list(labeling.flags),
    }
    meta.update(extra or {})
    body = "label\n" + "".join(f"{int(v)}\n" for v in labeling.labels)
    return _write_text(path, "# " + json.dumps(jsonable(meta), sort_keys=True) + "\n" + body)


def read_labels(path):
    meta, lines = _split_meta(_read_lines(path), path)
    if not lines or lines[0].strip() != "label":
        raise ValidationError(f"{path}: expected header 'label'")
    try:
        labels = np.array([int(x) for x in lines[1:] if x.strip()], dtype=np.int64)
    except ValueError as exc:
        raise ValidationError(f"{path}: labels must be integers ({exc})") from exc
    shape = meta.get("grid_shape")
    return Labeling(
        labels,
        k=meta.get("k"),
        grid_shape=tuple(shape) if shape else None,
        method=meta.get("method", "file"),
        params=meta.get("params", {}),
        flags=list(meta.get("flags", [])),
    )
