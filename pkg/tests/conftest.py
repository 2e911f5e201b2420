import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rgkit import BoundingBox, Layout

settings.register_profile(
    "default",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def two_box_layout() -> Layout:
    """Two overlapping boxes; on an 8x8 grid this yields regions of
    12, 4, 12, and 36 tokens for {0}, {0,1}, {1}, and background."""
    return Layout.build(
        512,
        512,
        [
            (BoundingBox(0.125, 0.125, 0.625, 0.625), "a red apple"),
            (BoundingBox(0.375, 0.375, 0.875, 0.875), "a blue vase"),
        ],
        caption="two overlapping objects",
    )


def random_valid_layout(
    rng: np.random.Generator,
    max_objects: int = 5,
    max_label_words: int = 6,
    image_size: int = 512,
) -> Layout:
    """Seeded random layout satisfying every layout invariant."""
    words = (
        "red blue green tall small round wooden glass shiny old cat dog cup box "
        "tree car bird lamp chair table apple vase clock door"
    ).split()
    n = int(rng.integers(0, max_objects + 1))
    items = []
    for _ in range(n):
        x1 = float(rng.uniform(0.0, 0.9))
        y1 = float(rng.uniform(0.0, 0.9))
        x2 = float(rng.uniform(x1 + 0.02, 1.0))
        y2 = float(rng.uniform(y1 + 0.02, 1.0))
        k = int(rng.integers(1, max_label_words + 1))
        label = " ".join(words[int(i)] for i in rng.integers(0, len(words), size=k))
        items.append((BoundingBox(x1, y1, x2, y2), label))
    return Layout.build(image_size, image_size, items)
