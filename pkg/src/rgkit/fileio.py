"""On-disk formats: layout JSON, feature binaries, embeddings, PGM/PPM.

Everything written here is byte-stable given the same inputs: JSON keys are
sorted, floats are rounded to 9 significant digits before serialization,
binary tensors are explicit little-endian float32, and all writes go through
a temp file plus rename.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
import warnings
from pathlib import Path

import numpy as np

from .layout import BoundingBox, Layout, TokenGrid

FLOAT_SIG_DIGITS = 9

_LAYOUT_KEYS = {"image_size", "caption", "objects"}
_OBJECT_KEYS = {"bbox", "label"}


class LayoutFormatError(ValueError):
    """Raised when a layout file does not match the schema."""


def round_floats(obj):
    """Recursively round floats to the canonical significant-digit budget."""
    if isinstance(obj, float):
        return float(format(obj, f".{FLOAT_SIG_DIGITS}g"))
    if isinstance(obj, dict):
        return {k: round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v) for v in obj]
    return obj


def canonical_json(obj) -> str:
    """Deterministic JSON text: sorted keys, rounded floats, trailing newline."""
    return json.dumps(round_floats(obj), sort_keys=True, indent=2) + "\n"


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


# --- layout files -----------------------------------------------------------

def layout_to_dict(layout: Layout) -> dict:
    """Serializable form; box coordinates are converted back to pixels."""
    w, h = layout.image_width, layout.image_height
    return {
        "image_size": [w, h],
        "caption": layout.caption,
        "objects": [
            {
                "bbox": [obj.box.x1 * w, obj.box.y1 * h, obj.box.x2 * w, obj.box.y2 * h],
                "label": obj.text,
            }
            for obj in layout.objects
        ],
    }


def layout_from_dict(obj: dict, strict: bool = True) -> Layout:
    """Parse the layout schema; pixel boxes are normalized by the image size.

    Unknown fields are rejected in strict mode and warned about otherwise.
    """
    if not isinstance(obj, dict):
        raise LayoutFormatError(f"layout file must hold a JSON object, got {type(obj).__name__}")
    unknown = set(obj) - _LAYOUT_KEYS
    if unknown:
        if strict:
            raise LayoutFormatError(f"unknown layout fields: {sorted(unknown)}")
        warnings.warn(f"ignoring unknown layout fields: {sorted(unknown)}")
    try:
        width, height = (int(v) for v in obj["image_size"])
    except (KeyError, TypeError, ValueError) as exc:
        raise LayoutFormatError(f"bad or missing image_size: {exc}") from None
    if width <= 0 or height <= 0:
        raise LayoutFormatError(f"image_size must be positive, got {width}x{height}")
    caption = obj.get("caption")
    if caption is not None and not isinstance(caption, str):
        raise LayoutFormatError("caption must be a string or null")
    items = []
    for i, entry in enumerate(obj.get("objects", [])):
        if not isinstance(entry, dict):
            raise LayoutFormatError(f"object {i} must be a JSON object")
        unknown = set(entry) - _OBJECT_KEYS
        if unknown:
            if strict:
                raise LayoutFormatError(f"object {i} has unknown fields: {sorted(unknown)}")
            warnings.warn(f"object {i}: ignoring unknown fields {sorted(unknown)}")
        try:
            x1, y1, x2, y2 = (float(v) for v in entry["bbox"])
            label = entry["label"]
        except (KeyError, TypeError, ValueError) as exc:
            raise LayoutFormatError(f"object {i} has bad bbox/label: {exc}") from None
        if not isinstance(label, str):
            raise LayoutFormatError(f"object {i} label must be a string")
        items.append((BoundingBox(x1 / width, y1 / height, x2 / width, y2 / height), label))
    return Layout.build(width, height, items, caption=caption)


def load_layout(path: str | Path, strict: bool = True) -> Layout:
    with open(path, "r", encoding="utf-8") as handle:
        try:
            obj = json.load(handle)
        except json.JSONDecodeError as exc:
            raise LayoutFormatError(f"{path}: invalid JSON: {exc}") from None
    return layout_from_dict(obj, strict=strict)


def save_layout(path: str | Path, layout: Layout) -> None:
    atomic_write_text(path, canonical_json(layout_to_dict(layout)))


# --- feature binaries -------------------------------------------------------

_FEATURE_HEADER = struct.Struct("<III")  # grid height, grid width, channels


def feature_bytes(grid: TokenGrid, data: np.ndarray) -> bytes:
    if data.shape != (grid.n_tokens, data.shape[1]):
        raise ValueError(f"feature shape {data.shape} does not match grid")
    header = _FEATURE_HEADER.pack(grid.height, grid.width, data.shape[1])
    return header + np.ascontiguousarray(data, dtype="<f4").tobytes()


def write_features(path: str | Path, grid: TokenGrid, data: np.ndarray) -> None:
    atomic_write_bytes(path, feature_bytes(grid, data))


def read_features(path: str | Path) -> tuple[TokenGrid, np.ndarray]:
    raw = Path(path).read_bytes()
    if len(raw) < _FEATURE_HEADER.size:
        raise ValueError(f"{path}: truncated feature file")
    height, width, channels = _FEATURE_HEADER.unpack_from(raw)
    grid = TokenGrid(height, width)
    expected = grid.n_tokens * channels * 4
    body = raw[_FEATURE_HEADER.size :]
    if len(body) != expected:
        raise ValueError(
            f"{path}: expected {expected} payload bytes for "
            f"{height}x{width}x{channels}, got {len(body)}"
        )
    data = np.frombuffer(body, dtype="<f4").reshape(grid.n_tokens, channels)
    return grid, data.astype(np.float64)


# --- embedding tables -------------------------------------------------------

def load_embedding_json(path: str | Path) -> dict:
    """Raw JSON map(s) of key -> vector; shape validation happens at use."""
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)


def load_token_embeddings(path: str | Path) -> dict[str, np.ndarray]:
    table = load_embedding_json(path)
    if not isinstance(table, dict):
        raise ValueError(f"{path}: embedding file must hold a JSON object")
    return {str(k): np.asarray(v, dtype=np.float64) for k, v in table.items()}


# --- netpbm rasters ---------------------------------------------------------

def _read_pnm_header(raw: bytes, magic: bytes):
    if not raw.startswith(magic):
        raise ValueError(f"not a {magic.decode()} file")
    fields: list[int] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(raw[start:pos]))
    return fields[0], fields[1], fields[2], pos + 1


def write_pgm(path: str | Path, gray: np.ndarray) -> None:
    """8-bit binary PGM (P5); boolean input maps to 0/255."""
    arr = np.asarray(gray)
    if arr.dtype == bool:
        arr = arr.astype(np.uint8) * 255
    arr = arr.astype(np.uint8)
    height, width = arr.shape
    atomic_write_bytes(path, f"P5\n{width} {height}\n255\n".encode() + arr.tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    width, height, maxval, offset = _read_pnm_header(raw, b"P5")
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit PGM supported")
    body = raw[offset : offset + width * height]
    if len(body) != width * height:
        raise ValueError(f"{path}: truncated PGM payload")
    return np.frombuffer(body, dtype=np.uint8).reshape(height, width).copy()


def mask_from_pgm(path: str | Path) -> np.ndarray:
    return read_pgm(path) > 127


def write_ppm(path: str | Path, rgb: np.ndarray) -> None:
    """8-bit binary PPM (P6)."""
    arr = np.asarray(rgb, dtype=np.uint8)
    height, width, depth = arr.shape
    if depth != 3:
        raise ValueError(f"PPM needs (H, W, 3) data, got {arr.shape}")
    atomic_write_bytes(path, f"P6\n{width} {height}\n255\n".encode() + arr.tobytes())


def read_ppm(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    width, height, maxval, offset = _read_pnm_header(raw, b"P6")
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit PPM supported")
    body = raw[offset : offset + width * height * 3]
    if len(body) != width * height * 3:
        raise ValueError(f"{path}: truncated PPM payload")
    return np.frombuffer(body, dtype=np.uint8).reshape(height, width, 3).copy()
