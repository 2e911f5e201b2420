"""Synthetic layout generation with a bucket-stratified label vocabulary.

The bundled vocabulary is organized by (complexity, length) bucket so a
generated corpus exercises every description regime, from monosyllabic
phrases to long ornate sentences.  Generation is fully determined by the
seed.
"""

from __future__ import annotations

import numpy as np

from .layout import BoundingBox, Layout
from .textstats import (
    COMPLEXITY_EASY,
    COMPLEXITY_HARD,
    COMPLEXITY_MEDIUM,
    LENGTH_LONG,
    LENGTH_PHRASE,
    LENGTH_SHORT,
)

# label vocabulary keyed by (complexity bucket, length bucket); a test pins
# each entry to its declared bucket under the shipped fog/length rules
VOCABULARY: dict[tuple[str, str], tuple[str, ...]] = {
    (COMPLEXITY_EASY, LENGTH_PHRASE): (
        "a red apple on a table",
        "a small wooden chair",
        "two green pears in a bowl",
        "a blue bike near the wall",
        "a black cat on the rug",
    ),
    (COMPLEXITY_MEDIUM, LENGTH_PHRASE): (
        "a wooden chair. a beautiful vase.",
        "an antique clock. a glass jar.",
        "a gigantic mirror. two shiny keys.",
        "a decorated box. a small cup.",
    ),
    (COMPLEXITY_HARD, LENGTH_PHRASE): (
        "a magnificent golden chandelier",
        "an enormous decorative ceramic pot",
        "a futuristic metallic sculpture",
        "a luxurious velvet armchair with embroidery",
    ),
    (COMPLEXITY_EASY, LENGTH_SHORT): (
        "the dog sat on the mat next to the door",
        "a cat sleeps on the warm rug by the fire",
        "a red cup on the shelf. a spoon lies next to it.",
        "two birds sit on a branch near the old barn",
    ),
    (COMPLEXITY_MEDIUM, LENGTH_SHORT): (
        "the tall man walks his brown dog along the quiet street each day",
        "a young girl reads her book under the big oak tree near home",
        "the chef stirs a pot of hot soup in the busy loud kitchen",
        "an old man feeds the gray pigeons beside the quiet fountain at noon",
    ),
    (COMPLEXITY_HARD, LENGTH_SHORT): (
        "an elaborate porcelain teapot decorated with delicate hand painted flowers",
        "the mysterious stranger carries an expensive leather briefcase through the station",
        "a sophisticated professor analyzes complicated equations on the enormous blackboard",
    ),
    (COMPLEXITY_EASY, LENGTH_LONG): (
        "the old dog sits by the fire. the small cat sleeps on the warm red rug.",
        "a boy throws a ball in the park. his friend runs fast to catch it now.",
        "the sun sets low in the west. the sky turns red and gold over the calm sea.",
    ),
    (COMPLEXITY_MEDIUM, LENGTH_LONG): (
        "the farmer leads his horses across the wide green field while the sun sets low behind them",
        "two small children build a tall sand castle on the beach as waves roll in near them",
        "the long train rolls past the small town while people wave from the gates near the tracks",
    ),
    (COMPLEXITY_HARD, LENGTH_LONG): (
        "an extraordinary illuminated carousel with intricately decorated horses spins slowly "
        "beneath the glittering evening sky at the carnival",
        "the ambitious architect presents an innovative design for a magnificent library "
        "featuring enormous windows and a spectacular entrance",
    ),
}

CAPTIONS = (
    "a quiet indoor scene",
    "objects arranged on a city street",
    "a cluttered studio corner",
    "things gathered near a window",
    "an outdoor market stall",
)

_BUCKETS = tuple(sorted(VOCABULARY))


def all_vocabulary_labels() -> list[str]:
    return [label for bucket in _BUCKETS for label in VOCABULARY[bucket]]


def _sample_box(rng: np.random.Generator, anchor: BoundingBox | None) -> BoundingBox:
    w = float(rng.uniform(0.08, 0.55))
    h = float(rng.uniform(0.08, 0.55))
    if anchor is not None:
        # bias the center toward the anchor so boxes actually overlap
        ax = (anchor.x1 + anchor.x2) / 2
        ay = (anchor.y1 + anchor.y2) / 2
        cx = ax + float(rng.normal(0.0, 0.08))
        cy = ay + float(rng.normal(0.0, 0.08))
    else:
        cx = float(rng.uniform(0.0, 1.0))
        cy = float(rng.uniform(0.0, 1.0))
    cx = min(max(cx, w / 2), 1.0 - w / 2)
    cy = min(max(cy, h / 2), 1.0 - h / 2)
    return BoundingBox(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2)


def generate_layouts(
    count: int,
    seed: int,
    min_objects: int = 1,
    max_objects: int = 5,
    overlap_bias: float = 0.35,
    image_sizes: tuple[tuple[int, int], ...] = ((512, 512), (768, 768)),
    vocabulary: dict[tuple[str, str], tuple[str, ...]] | None = None,
) -> list[Layout]:
    """Deterministic corpus of random layouts with bucket-stratified labels."""
    if count < 0:
        raise ValueError("count must be non-negative")
    if not 0 <= min_objects <= max_objects:
        raise ValueError(f"bad object range [{min_objects}, {max_objects}]")
    vocab = VOCABULARY if vocabulary is None else vocabulary
    buckets = tuple(sorted(vocab))
    rng = np.random.default_rng(seed)
    layouts = []
    for _ in range(count):
        width, height = image_sizes[int(rng.integers(len(image_sizes)))]
        n_objects = int(rng.integers(min_objects, max_objects + 1))
        items = []
        boxes: list[BoundingBox] = []
        for _ in range(n_objects):
            anchor = None
            if boxes and rng.random() < overlap_bias:
                anchor = boxes[int(rng.integers(len(boxes)))]
            box = _sample_box(rng, anchor)
            bucket = buckets[int(rng.integers(len(buckets)))]
            phrases = vocab[bucket]
            label = phrases[int(rng.integers(len(phrases)))]
            boxes.append(box)
            items.append((box, label))
        caption = CAPTIONS[int(rng.integers(len(CAPTIONS)))]
        layouts.append(Layout.build(width, height, items, caption=caption))
    return layouts
