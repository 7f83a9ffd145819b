"""Netpbm heatmaps and label images.

Grid arrays are stored with row index following ``y`` upwards; images are
written with row 0 at the top, i.e. at physical ``y = 1``.

Label images use an indexed colour code: label ``l`` maps to the 24-bit
colour ``((l + 1) * MULTIPLIER) mod 2**24``. The multiplier is odd, so the
map is a bijection and images decode back to labels exactly. Unlabeled
nodes (-1) are black.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import DataIOError, ValidationError
from .io import read_json, write_json

MULTIPLIER = 0x9E3779
MODULUS = 1 << 24
_INVERSE = pow(MULTIPLIER, -1, MODULUS)


def _as_image(values):
    arr = np.asarray(values)
    if arr.ndim == 1:
        side = int(round(np.sqrt(arr.size)))
        if side * side != arr.size:
            raise ValidationError("values are not grid shaped")
        arr = arr.reshape(side, side)
    if arr.ndim != 2:
        raise ValidationError("values are not grid shaped")
    return np.flipud(arr)


def _write_bytes(path, header, payload):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(header + payload)
    except OSError as exc:
        raise DataIOError(f"cannot write {path}: {exc}") from exc
    return path


def _read_netpbm(path, magic):
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc}") from exc
    tokens, pos = [], 0
    while len(tokens) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end : end + 1].isspace():
            end += 1
        tokens.append(data[pos:end])
        pos = end
    if tokens[0] != magic:
        raise ValidationError(f"{path}: expected {magic.decode()} image")
    width, height, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise ValidationError(f"{path}: only 8-bit images are supported")
    return width, height, data[pos + 1 :]


def emit_heatmap(values, path):
    """Write a scalar grid as 8-bit PGM (P5), min-max scaled.

    The scaling is recorded in a ``<path>.json`` sidecar. A constant field
    renders mid-gray.
    """
    img = np.asarray(_as_image(values), dtype=float)
    if not np.all(np.isfinite(img)):
        raise ValidationError("heatmap values must be finite")
    lo, hi = float(img.min()), float(img.max())
    if hi > lo:
        pixels = np.round(255.0 * (img - lo) / (hi - lo)).astype(np.uint8)
    else:
        pixels = np.full(img.shape, 128, dtype=np.uint8)
    h, w = pixels.shape
    path = _write_bytes(path, f"P5\n{w} {h}\n255\n".encode(), pixels.tobytes())
    write_json(
        Path(str(path) + ".json"),
        {"min": lo, "max": hi, "width": w, "height": h, "row0": "y=1", "constant": hi == lo},
    )
    return path


def read_heatmap(path):
    """Return ``(pixels, scaling)``; pixels are in image orientation."""
    w, h, payload = _read_netpbm(path, b"P5")
    pixels = np.frombuffer(payload[: w * h], dtype=np.uint8).reshape(h, w)
    return pixels, read_json(Path(str(path) + ".json"))


def label_colors(labels):
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < -1 or labels.max() >= MODULUS - 1):
        raise ValidationError("labels out of the encodable range")
    code = ((labels + 1) * MULTIPLIER) % MODULUS
    return np.stack([(code >> 16) & 255, (code >> 8) & 255, code & 255], axis=-1).astype(np.uint8)


def emit_label_image(labeling, path):
    """Write a grid Labeling (or integer grid) as an indexed-colour PPM (P6)."""
    if hasattr(labeling, "image"):
        grid = labeling.image()
    else:
        grid = np.asarray(labeling)
    img = label_colors(_as_image(grid))
    h, w = img.shape[:2]
    return _write_bytes(path, f"P6\n{w} {h}\n255\n".encode(), img.tobytes())


def read_label_image(path):
    """Decode a label PPM back to an integer grid (row index following ``y``)."""
    w, h, payload = _read_netpbm(path, b"P6")
    rgb = np.frombuffer(payload[: 3 * w * h], dtype=np.uint8).reshape(h, w, 3).astype(np.int64)
    code = (rgb[..., 0] << 16) | (rgb[..., 1] << 8) | rgb[..., 2]
    labels = (code * _INVERSE) % MODULUS - 1
    return np.flipud(labels)
