"""Object-level evaluation pipelines for generated images.

Two scores per object, both reported on a 0..100 scale:

  crop-CLIP   cosine similarity between an embedding of the image cropped to
              the object's box and an embedding of the object's label, so
              surrounding objects cannot interfere with the measurement
  seg-IoU     IoU between the conditioning box and the circumscribed
              rectangle of a segmentation mask extracted within that box

Objects occupying less than ``lower`` or more than ``upper`` of the image
area (strict inequalities, defaults 5% and 50%) are excluded from the means,
since scores on very small or very large objects correlate poorly with human
judgment.  Embedder and segmenter are pluggable: a deterministic content-hash
mock for tests, or file-backed tables holding externally computed vectors and
masks.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .layout import BoundingBox, Layout, box_area_fraction, box_iou

DEFAULT_LOWER = 0.05
DEFAULT_UPPER = 0.50

FILTER_SMALL = "small"
FILTER_LARGE = "large"

METRIC_CROP_CLIP = "cropclip"
METRIC_SAM_IOU = "samiou"


@dataclass(frozen=True, eq=False)
class ImageRaster:
    """An RGB image, or a named reference to one held elsewhere.

    ``pixels`` is (H, W, 3) uint8 when present; file-backed backends only
    need ``ref`` to key their lookups.
    """

    width: int
    height: int
    pixels: np.ndarray | None = None
    ref: str | None = None

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"image dims must be positive, got {self.width}x{self.height}")
        if self.pixels is not None and self.pixels.shape != (self.height, self.width, 3):
            raise ValueError(
                f"pixel array shape {self.pixels.shape} does not match "
                f"{self.height}x{self.width}x3"
            )

    @classmethod
    def random(cls, width: int, height: int, seed: int, ref: str | None = None) -> "ImageRaster":
        rng = np.random.default_rng(seed)
        pixels = rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)
        return cls(width=width, height=height, pixels=pixels, ref=ref)


def _round_px(value: float) -> int:
    # floor(v + 0.5): conventional half-up rounding, no banker's ties
    return int(np.floor(value + 0.5))


def pixel_rect(box: BoundingBox, width: int, height: int) -> tuple[int, int, int, int]:
    """(x_lo, y_lo, x_hi, y_hi) pixel rectangle of a normalized box, >= 1x1."""
    x_lo = min(max(_round_px(box.x1 * width), 0), width)
    x_hi = min(max(_round_px(box.x2 * width), 0), width)
    y_lo = min(max(_round_px(box.y1 * height), 0), height)
    y_hi = min(max(_round_px(box.y2 * height), 0), height)
    if x_hi <= x_lo:
        x_lo = min(x_lo, width - 1)
        x_hi = x_lo + 1
    if y_hi <= y_lo:
        y_lo = min(y_lo, height - 1)
        y_hi = y_lo + 1
    return x_lo, y_lo, x_hi, y_hi


def crop(image: ImageRaster, box: BoundingBox) -> ImageRaster:
    """Crop an image to a normalized box (rounded to pixels, minimum 1x1)."""
    x_lo, y_lo, x_hi, y_hi = pixel_rect(box, image.width, image.height)
    pixels = None
    if image.pixels is not None:
        pixels = np.ascontiguousarray(image.pixels[y_lo:y_hi, x_lo:x_hi])
    return ImageRaster(width=x_hi - x_lo, height=y_hi - y_lo, pixels=pixels, ref=image.ref)


def size_filter(
    box: BoundingBox, lower: float = DEFAULT_LOWER, upper: float = DEFAULT_UPPER
) -> tuple[bool, str | None]:
    """Keep/drop decision by area fraction; strict at both bounds."""
    if not 0.0 <= lower < upper <= 1.0:
        raise ValueError(f"need 0 <= lower < upper <= 1, got {lower}, {upper}")
    area = box_area_fraction(box)
    if area < lower:
        return False, FILTER_SMALL
    if area > upper:
        return False, FILTER_LARGE
    return True, None


class EmbedderBackend:
    """Image-crop and label embeddings sharing one vector space."""

    dim: int

    def embed_image(self, image: ImageRaster, key: str | None = None) -> np.ndarray:
        raise NotImplementedError

    def embed_text(self, label: str, key: str | None = None) -> np.ndarray:
        raise NotImplementedError


class MockEmbedder(EmbedderBackend):
    """Deterministic content-hash embeddings for tests and dry runs.

    Identical crop bytes (or identical labels) map to identical unit vectors,
    so scores depend only on what was actually cropped.
    """

    def __init__(self, dim: int = 64, seed: int = 0):
        self.dim = dim
        self.seed = seed

    def _vector(self, payload: bytes) -> np.ndarray:
        digest = hashlib.sha256(f"{self.seed}:".encode() + payload).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        raw = rng.standard_normal(self.dim)
        return raw / np.linalg.norm(raw)

    def embed_image(self, image: ImageRaster, key: str | None = None) -> np.ndarray:
        if image.pixels is not None:
            payload = b"img:" + image.pixels.tobytes()
        elif image.ref is not None:
            payload = b"ref:" + image.ref.encode("utf-8")
        else:
            raise ValueError("image has neither pixels nor ref")
        return self._vector(payload)

    def embed_text(self, label: str, key: str | None = None) -> np.ndarray:
        return self._vector(b"txt:" + label.encode("utf-8"))


class FileEmbedder(EmbedderBackend):
    """Precomputed embeddings from a flat JSON map {key: vector}.

    Image entries are keyed "image/<sample>/<object-id>", text entries
    "text/<label>" (or "text/<explicit key>"), the same map-of-vectors shape
    used for token embedding files.
    """

    def __init__(self, table: dict):
        vectors = {str(k): np.asarray(v, dtype=np.float64) for k, v in table.items()}
        dims = {v.shape[-1] for v in vectors.values()}
        if len(dims) != 1:
            raise ValueError(f"inconsistent embedding dims: {sorted(dims)}")
        self.dim = dims.pop()
        self._table = vectors

    def _lookup(self, key: str) -> np.ndarray:
        if key not in self._table:
            raise KeyError(f"no embedding for key {key!r}")
        return self._table[key]

    def embed_image(self, image: ImageRaster, key: str | None = None) -> np.ndarray:
        lookup = key if key is not None else image.ref
        if lookup is None:
            raise KeyError("image embedding lookup needs a key or an image ref")
        return self._lookup(f"image/{lookup}")

    def embed_text(self, label: str, key: str | None = None) -> np.ndarray:
        return self._lookup(f"text/{key if key is not None else label}")


class SegmenterBackend:
    """Binary object mask at full image resolution for a box prompt."""

    def mask(self, image: ImageRaster, box: BoundingBox, key: str | None = None) -> np.ndarray:
        raise NotImplementedError


class BoxFillSegmenter(SegmenterBackend):
    """Mock segmenter that returns the box rectangle itself as the mask."""

    def mask(self, image: ImageRaster, box: BoundingBox, key: str | None = None) -> np.ndarray:
        out = np.zeros((image.height, image.width), dtype=bool)
        x_lo, y_lo, x_hi, y_hi = pixel_rect(box, image.width, image.height)
        out[y_lo:y_hi, x_lo:x_hi] = True
        return out


class FileSegmenter(SegmenterBackend):
    """Masks read from per-object files keyed by "<sample>/<object-id>"."""

    def __init__(self, masks: dict[str, np.ndarray]):
        self._masks = {k: np.asarray(v, dtype=bool) for k, v in masks.items()}

    def mask(self, image: ImageRaster, box: BoundingBox, key: str | None = None) -> np.ndarray:
        if key is None or key not in self._masks:
            raise KeyError(f"no mask for key {key!r}")
        mask = self._masks[key]
        if mask.shape != (image.height, image.width):
            raise ValueError(
                f"mask shape {mask.shape} does not match image "
                f"{image.height}x{image.width}"
            )
        return mask


def circumscribed_rectangle(mask: np.ndarray) -> BoundingBox | None:
    """Tightest normalized box containing all true pixels; None when empty."""
    if mask.ndim != 2 or mask.shape[0] <= 0 or mask.shape[1] <= 0:
        raise ValueError(f"mask must be a non-empty 2-d array, got shape {mask.shape}")
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(mask.any(axis=0))
    height, width = mask.shape
    return BoundingBox(
        x1=cols[0] / width,
        y1=rows[0] / height,
        x2=(cols[-1] + 1) / width,
        y2=(rows[-1] + 1) / height,
    )


@dataclass(frozen=True)
class ObjectRecord:
    object_id: int
    label: str
    box: BoundingBox
    area_fraction: float
    filtered: bool
    reason: str | None
    score: float | None


@dataclass(frozen=True)
class MetricReport:
    """Per-object scores for one sample plus the per-sample mean."""

    sample_id: str
    metric: str
    lower: float
    upper: float
    objects: tuple[ObjectRecord, ...]

    @property
    def scored(self) -> list[ObjectRecord]:
        return [o for o in self.objects if not o.filtered and o.score is not None]

    @property
    def n_scored(self) -> int:
        return len(self.scored)

    @property
    def sample_mean(self) -> float | None:
        scored = self.scored
        if not scored:
            return None
        return sum(o.score for o in scored) / len(scored)


def corpus_mean(reports) -> float | None:
    """Mean of per-sample means; samples with nothing scored are excluded."""
    means = [r.sample_mean for r in reports if r.sample_mean is not None]
    if not means:
        return None
    return sum(means) / len(means)


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na < 1e-12 or nb < 1e-12:
        raise ValueError("cosine similarity undefined for zero-norm vectors")
    return float(np.dot(a, b) / (na * nb))


def _object_key(sample_id: str, object_id: int) -> str:
    return f"{sample_id}/{object_id}"


def crop_clip_score(
    image: ImageRaster,
    layout: Layout,
    embedder: EmbedderBackend,
    lower: float = DEFAULT_LOWER,
    upper: float = DEFAULT_UPPER,
    sample_id: str = "",
) -> MetricReport:
    """Crop each kept object and score label alignment as 100 * cosine.

    Backend failures are recorded on the object (flagged, no score) rather
    than aborting the sample.
    """
    records = []
    for obj in layout.objects:
        area = box_area_fraction(obj.box)
        keep, reason = size_filter(obj.box, lower, upper)
        if not keep:
            records.append(
                ObjectRecord(obj.id, obj.text, obj.box, area, True, reason, None)
            )
            continue
        key = _object_key(sample_id, obj.id)
        try:
            cropped = crop(image, obj.box)
            image_vec = embedder.embed_image(cropped, key=key)
            text_vec = embedder.embed_text(obj.text, key=None)
            score = 100.0 * cosine_similarity(image_vec, text_vec)
        except (KeyError, ValueError) as exc:
            records.append(
                ObjectRecord(obj.id, obj.text, obj.box, area, True, f"embed error: {exc}", None)
            )
            continue
        records.append(ObjectRecord(obj.id, obj.text, obj.box, area, False, None, score))
    return MetricReport(sample_id, METRIC_CROP_CLIP, lower, upper, tuple(records))


def sam_iou_score(
    image: ImageRaster,
    layout: Layout,
    segmenter: SegmenterBackend,
    lower: float = DEFAULT_LOWER,
    upper: float = DEFAULT_UPPER,
    sample_id: str = "",
) -> MetricReport:
    """Score layout fidelity as 100 * IoU(box, circumscribed mask rectangle).

    An empty mask means no object was generated in the box and scores 0.
    """
    records = []
    for obj in layout.objects:
        area = box_area_fraction(obj.box)
        keep, reason = size_filter(obj.box, lower, upper)
        if not keep:
            records.append(
                ObjectRecord(obj.id, obj.text, obj.box, area, True, reason, None)
            )
            continue
        key = _object_key(sample_id, obj.id)
        try:
            mask = segmenter.mask(image, obj.box, key=key)
            rect = circumscribed_rectangle(mask)
        except (KeyError, ValueError) as exc:
            records.append(
                ObjectRecord(obj.id, obj.text, obj.box, area, True, f"segment error: {exc}", None)
            )
            continue
        score = 0.0 if rect is None else 100.0 * box_iou(obj.box, rect)
        records.append(ObjectRecord(obj.id, obj.text, obj.box, area, False, None, score))
    return MetricReport(sample_id, METRIC_SAM_IOU, lower, upper, tuple(records))


def pearson(xs, ys) -> float:
    """Product-moment correlation; undefined (error) for zero variance."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("pearson needs two equal-length 1-d sequences")
    if x.size < 2:
        raise ValueError("pearson needs at least two points")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = float(np.sqrt(np.dot(xc, xc)))
    sy = float(np.sqrt(np.dot(yc, yc)))
    if sx == 0.0 or sy == 0.0:
        raise ValueError("pearson undefined for zero-variance input")
    return float(np.dot(xc, yc) / (sx * sy))


def report_to_dict(report: MetricReport) -> dict:
    return {
        "sample_id": report.sample_id,
        "metric": report.metric,
        "lower": report.lower,
        "upper": report.upper,
        "sample_mean": report.sample_mean,
        "n_scored": report.n_scored,
        "objects": [
            {
                "id": o.object_id,
                "label": o.label,
                "bbox": list(o.box.as_tuple()),
                "area_fraction": o.area_fraction,
                "filtered": o.filtered,
                "reason": o.reason,
                "score": o.score,
            }
            for o in report.objects
        ],
    }
