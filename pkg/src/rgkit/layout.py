"""Layout domain types and token-grid geometry.

Boxes live in normalized image coordinates (fractions of width and height);
pixel coordinates appear only at file ingestion.  Token membership uses a
center-in-box rule with half-open intervals that close at the far image edge,
so abutting boxes never claim the same token and a box reaching x2 = 1 or
y2 = 1 owns the border.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

DEFAULT_RETENTION_THRESHOLD = 0.3


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box with coordinates normalized to [0, 1].

    Construction never raises so diagnostics can inspect malformed boxes;
    use :func:`validate_layout` or :meth:`is_valid` before geometry ops.
    """

    x1: float
    y1: float
    x2: float
    y2: float

    def is_valid(self) -> bool:
        return 0.0 <= self.x1 < self.x2 <= 1.0 and 0.0 <= self.y1 < self.y2 <= 1.0

    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    def contains_point(self, x: float, y: float) -> bool:
        """Half-open membership, closed where the box touches the far edge."""
        in_x = (self.x1 <= x < self.x2) or (self.x2 == 1.0 and x == 1.0)
        in_y = (self.y1 <= y < self.y2) or (self.y2 == 1.0 and y == 1.0)
        return in_x and in_y

    def intersect(self, other: "BoundingBox") -> "BoundingBox | None":
        """Overlap rectangle with positive area, or None."""
        x1 = max(self.x1, other.x1)
        y1 = max(self.y1, other.y1)
        x2 = min(self.x2, other.x2)
        y2 = min(self.y2, other.y2)
        if x1 >= x2 or y1 >= y2:
            return None
        return BoundingBox(x1, y1, x2, y2)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)


def box_iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes, in [0, 1]."""
    inter = a.intersect(b)
    if inter is None:
        return 0.0
    ia = inter.area()
    union = a.area() + b.area() - ia
    if union <= 0.0:
        return 0.0
    return ia / union


@dataclass(frozen=True)
class DescriptionTuple:
    """One object: its box, its free-form text, and a stable index."""

    id: int
    box: BoundingBox
    text: str


@dataclass(frozen=True)
class Layout:
    """An image-sized canvas with an ordered set of described objects."""

    image_width: int
    image_height: int
    objects: tuple[DescriptionTuple, ...] = ()
    caption: str | None = None

    @classmethod
    def build(
        cls,
        image_width: int,
        image_height: int,
        items: Iterable[tuple[BoundingBox, str]],
        caption: str | None = None,
    ) -> "Layout":
        """Assemble a layout, assigning contiguous object ids in input order."""
        objects = tuple(
            DescriptionTuple(id=i, box=box, text=text)
            for i, (box, text) in enumerate(items)
        )
        return cls(image_width, image_height, objects, caption)


@dataclass(frozen=True)
class TokenGrid:
    """A height x width grid of visual tokens, indexed row-major."""

    height: int
    width: int

    def __post_init__(self) -> None:
        if self.height <= 0 or self.width <= 0:
            raise ValueError(f"grid dims must be positive, got {self.height}x{self.width}")

    @property
    def n_tokens(self) -> int:
        return self.height * self.width

    def token_index(self, row: int, col: int) -> int:
        if not (0 <= row < self.height and 0 <= col < self.width):
            raise IndexError(f"token ({row},{col}) outside {self.height}x{self.width} grid")
        return row * self.width + col

    def token_rc(self, index: int) -> tuple[int, int]:
        if not (0 <= index < self.n_tokens):
            raise IndexError(f"token index {index} outside grid of {self.n_tokens}")
        return divmod(index, self.width)

    def token_center(self, index: int) -> tuple[float, float]:
        """Normalized (x, y) center of a token."""
        row, col = self.token_rc(index)
        return (col + 0.5) / self.width, (row + 0.5) / self.height

    def col_centers(self) -> np.ndarray:
        return (np.arange(self.width) + 0.5) / self.width

    def row_centers(self) -> np.ndarray:
        return (np.arange(self.height) + 0.5) / self.height


@dataclass(frozen=True)
class Violation:
    """A broken layout invariant; object_id is None for layout-level rules."""

    object_id: int | None
    rule: str


def validate_layout(layout: Layout) -> list[Violation]:
    """Check every layout invariant; empty list means the layout is well formed."""
    out: list[Violation] = []
    if layout.image_width <= 0 or layout.image_height <= 0:
        out.append(Violation(None, "image size positive"))
    ids = [obj.id for obj in layout.objects]
    if len(set(ids)) != len(ids):
        out.append(Violation(None, "ids unique"))
    if sorted(set(ids)) != list(range(len(ids))):
        out.append(Violation(None, "ids contiguous from 0"))
    for obj in layout.objects:
        b = obj.box
        if not b.x1 >= 0.0:
            out.append(Violation(obj.id, "0 <= x1"))
        if not b.x1 < b.x2:
            out.append(Violation(obj.id, "x1 < x2"))
        if not b.x2 <= 1.0:
            out.append(Violation(obj.id, "x2 <= 1"))
        if not b.y1 >= 0.0:
            out.append(Violation(obj.id, "0 <= y1"))
        if not b.y1 < b.y2:
            out.append(Violation(obj.id, "y1 < y2"))
        if not b.y2 <= 1.0:
            out.append(Violation(obj.id, "y2 <= 1"))
        if not obj.text.strip():
            out.append(Violation(obj.id, "text non-empty"))
    return out


def box_token_mask(box: BoundingBox, grid: TokenGrid) -> np.ndarray:
    """Boolean (H, W) mask of tokens whose centers fall inside the box.

    Vectorized form of ``box.contains_point`` applied to every token center;
    the two agree bit for bit because they perform the same comparisons.
    """
    cx = grid.col_centers()
    cy = grid.row_centers()
    in_x = (box.x1 <= cx) & ((cx < box.x2) | ((box.x2 == 1.0) & (cx == 1.0)))
    in_y = (box.y1 <= cy) & ((cy < box.y2) | ((box.y2 == 1.0) & (cy == 1.0)))
    return in_y[:, None] & in_x[None, :]


def rasterize_box(box: BoundingBox, grid: TokenGrid) -> np.ndarray:
    """Sorted token indices covered by the box (may be empty for thin boxes)."""
    return np.flatnonzero(box_token_mask(box, grid).ravel())


def box_area_fraction(box: BoundingBox) -> float:
    """Fraction of the image the box occupies."""
    return box.area()


def crop_layout(
    layout: Layout,
    crop: BoundingBox,
    retention_threshold: float = DEFAULT_RETENTION_THRESHOLD,
) -> Layout:
    """Restrict a layout to a crop window and re-normalize surviving boxes.

    Each box is intersected with the crop; a box whose retained area fraction
    (intersection area over original area) falls below the threshold is
    dropped.  Survivors keep their original order and get fresh contiguous
    ids.  "Size" here means area, not side length.
    """
    if not crop.is_valid():
        raise ValueError(f"crop must be a valid box with positive area, got {crop}")
    if not 0.0 <= retention_threshold <= 1.0:
        raise ValueError(f"retention_threshold must be in [0, 1], got {retention_threshold}")
    cw = crop.x2 - crop.x1
    ch = crop.y2 - crop.y1
    kept: list[DescriptionTuple] = []
    for obj in layout.objects:
        inter = obj.box.intersect(crop)
        if inter is None:
            continue
        retention = inter.area() / obj.box.area()
        if retention < retention_threshold:
            continue
        new_box = BoundingBox(
            min(max((inter.x1 - crop.x1) / cw, 0.0), 1.0),
            min(max((inter.y1 - crop.y1) / ch, 0.0), 1.0),
            min(max((inter.x2 - crop.x1) / cw, 0.0), 1.0),
            min(max((inter.y2 - crop.y1) / ch, 0.0), 1.0),
        )
        kept.append(replace(obj, id=len(kept), box=new_box))
    return Layout(layout.image_width, layout.image_height, tuple(kept), layout.caption)


def covering_ids(layout: Layout, x: float, y: float) -> tuple[int, ...]:
    """Ids of the objects whose boxes contain the point, ascending."""
    return tuple(
        sorted(obj.id for obj in layout.objects if obj.box.contains_point(x, y))
    )


def nonempty_objects(layout: Layout, grid: TokenGrid) -> list[tuple[DescriptionTuple, np.ndarray]]:
    """Objects paired with their token sets, skipping boxes that cover no token."""
    out = []
    for obj in layout.objects:
        toks = rasterize_box(obj.box, grid)
        if toks.size:
            out.append((obj, toks))
    return out
