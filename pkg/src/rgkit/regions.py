"""Token-grid region reorganization.

Partitions a token grid into mutually exclusive regions keyed by covering
set: the ascending ids of all objects whose boxes contain a token.  Tokens
with equal covering sets form one region even when spatially disconnected,
since the grounded sequence attended by a region depends only on which
objects cover it.  Region order is canonical (lexicographic by covering set,
background last) so serialized partitions are byte-stable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layout import Layout, TokenGrid, box_token_mask, DescriptionTuple

CoveringSet = tuple[int, ...]


@dataclass(frozen=True, eq=False)
class Region:
    covering: CoveringSet
    tokens: np.ndarray  # sorted token indices, non-empty


@dataclass(frozen=True, eq=False)
class RegionPartition:
    """Mutually exclusive regions that jointly cover every grid token."""

    grid: TokenGrid
    regions: tuple[Region, ...]
    token_to_region: np.ndarray  # (N,) region index per token

    @property
    def n_regions(self) -> int:
        return len(self.regions)

    def background_index(self) -> int | None:
        """Index of the empty-covering region, if any token is uncovered."""
        if self.regions and self.regions[-1].covering == ():
            return len(self.regions) - 1
        return None


def _region_sort_key(covering: CoveringSet) -> tuple:
    # background (empty covering) sorts after every non-empty set
    return (covering == (), covering)


def reorganize(layout: Layout, grid: TokenGrid) -> RegionPartition:
    """Group tokens by identical covering sets into one region each.

    The covering set of a token holds the ids of all objects whose rasterized
    boxes contain it; a background region appears iff some token is covered by
    no object.
    """
    n = grid.n_tokens
    n_obj = len(layout.objects)
    if n_obj == 0:
        regions = (Region(covering=(), tokens=np.arange(n)),)
        return RegionPartition(grid, regions, np.zeros(n, dtype=np.int64))

    hits = np.stack(
        [box_token_mask(obj.box, grid).ravel() for obj in layout.objects], axis=1
    )  # (N, n_obj) bool
    rows, inverse = np.unique(hits, axis=0, return_inverse=True)
    inverse = inverse.ravel()

    ids = [obj.id for obj in layout.objects]
    coverings = [
        tuple(sorted(ids[int(j)] for j in np.flatnonzero(row))) for row in rows
    ]
    order = sorted(range(len(coverings)), key=lambda k: _region_sort_key(coverings[k]))
    rank = np.empty(len(order), dtype=np.int64)
    for new_idx, old_idx in enumerate(order):
        rank[old_idx] = new_idx

    token_to_region = rank[inverse]
    regions = tuple(
        Region(covering=coverings[old_idx], tokens=np.flatnonzero(inverse == old_idx))
        for old_idx in order
    )
    return RegionPartition(grid, regions, token_to_region)


def select_visual(partition: RegionPartition, region_index: int) -> np.ndarray:
    """Token indices belonging to a region."""
    if not 0 <= region_index < partition.n_regions:
        raise IndexError(f"region index {region_index} out of range")
    return partition.regions[region_index].tokens.copy()


def select_descriptions(
    layout: Layout, partition: RegionPartition, region_index: int
) -> list[DescriptionTuple]:
    """Objects overlapping a region, in ascending id order; empty for background."""
    if not 0 <= region_index < partition.n_regions:
        raise IndexError(f"region index {region_index} out of range")
    covering = partition.regions[region_index].covering
    by_id = {obj.id: obj for obj in layout.objects}
    return [by_id[i] for i in covering]


def partition_to_dict(partition: RegionPartition) -> dict:
    """JSON-friendly form of a partition (ints only, canonical region order)."""
    return {
        "grid": {"height": partition.grid.height, "width": partition.grid.width},
        "regions": [
            {
                "covering": [int(i) for i in region.covering],
                "tokens": [int(t) for t in region.tokens],
            }
            for region in partition.regions
        ],
    }


def partition_from_dict(obj: dict) -> RegionPartition:
    grid = TokenGrid(int(obj["grid"]["height"]), int(obj["grid"]["width"]))
    regions = tuple(
        Region(
            covering=tuple(int(i) for i in r["covering"]),
            tokens=np.asarray(sorted(int(t) for t in r["tokens"]), dtype=np.int64),
        )
        for r in obj["regions"]
    )
    token_to_region = np.full(grid.n_tokens, -1, dtype=np.int64)
    for idx, region in enumerate(regions):
        token_to_region[region.tokens] = idx
    return RegionPartition(grid, regions, token_to_region)
