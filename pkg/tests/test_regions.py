"""Region reorganization: partition invariants and selection operations."""

import numpy as np
import pytest
from hypothesis import given, settings

from rgkit import (
    BoundingBox,
    Layout,
    TokenGrid,
    rasterize_box,
    reorganize,
    select_descriptions,
    select_visual,
)
from rgkit.regions import partition_from_dict, partition_to_dict

from conftest import random_valid_layout
from strategies import grids, layouts


def brute_force_covering(layout: Layout, grid: TokenGrid) -> list[tuple[int, ...]]:
    """Per-token covering sets via an independent point-in-box double loop."""
    out = []
    for row in range(grid.height):
        for col in range(grid.width):
            cx = (col + 0.5) / grid.width
            cy = (row + 0.5) / grid.height
            covering = []
            for obj in layout.objects:
                b = obj.box
                in_x = (b.x1 <= cx < b.x2) or (b.x2 == 1.0 and cx == 1.0)
                in_y = (b.y1 <= cy < b.y2) or (b.y2 == 1.0 and cy == 1.0)
                if in_x and in_y:
                    covering.append(obj.id)
            out.append(tuple(covering))
    return out


def assert_partition_invariants(partition):
    n = partition.grid.n_tokens
    seen = np.zeros(n, dtype=int)
    for region in partition.regions:
        assert region.tokens.size > 0
        seen[region.tokens] += 1
    assert (seen == 1).all(), "regions must tile the grid exactly once"
    coverings = [r.covering for r in partition.regions]
    assert len(set(coverings)) == len(coverings), "covering sets must be unique"
    for idx, region in enumerate(partition.regions):
        assert (partition.token_to_region[region.tokens] == idx).all()


class TestReorganize:
    def test_two_overlapping_boxes_give_four_regions(self, two_box_layout):
        partition = reorganize(two_box_layout, TokenGrid(8, 8))
        by_covering = {r.covering: r.tokens.size for r in partition.regions}
        assert by_covering == {(0,): 12, (1,): 12, (0, 1): 4, (): 36}

    def test_empty_layout_single_background_region(self):
        grid = TokenGrid(6, 5)
        partition = reorganize(Layout.build(512, 512, []), grid)
        assert partition.n_regions == 1
        assert partition.regions[0].covering == ()
        assert partition.regions[0].tokens.size == grid.n_tokens

    def test_matches_brute_force_covering(self):
        rng = np.random.default_rng(23)
        for _ in range(30):
            layout = random_valid_layout(rng, max_objects=5)
            grid = TokenGrid(16, 16)
            partition = reorganize(layout, grid)
            expected = brute_force_covering(layout, grid)
            got = [
                partition.regions[partition.token_to_region[t]].covering
                for t in range(grid.n_tokens)
            ]
            assert got == expected

    @given(layouts(max_objects=8), grids(max_side=16))
    @settings(max_examples=200)
    def test_partition_invariants(self, layout, grid):
        partition = reorganize(layout, grid)
        assert_partition_invariants(partition)
        assert partition.n_regions <= min(grid.n_tokens, 2 ** len(layout.objects))

    def test_deterministic_region_order(self, two_box_layout):
        partition = reorganize(two_box_layout, TokenGrid(8, 8))
        coverings = [r.covering for r in partition.regions]
        assert coverings == [(0,), (0, 1), (1,), ()]
        non_background = coverings[:-1]
        assert non_background == sorted(non_background)

    @given(layouts(max_objects=6), grids(max_side=12))
    @settings(max_examples=100)
    def test_permutation_equivariance(self, layout, grid):
        """Reversing object order relabels covering sets but leaves the
        token groupings untouched."""
        reversed_layout = Layout.build(
            layout.image_width,
            layout.image_height,
            [(obj.box, obj.text) for obj in reversed(layout.objects)],
        )
        a = reorganize(layout, grid)
        b = reorganize(reversed_layout, grid)
        n_obj = len(layout.objects)
        remap = lambda cov: tuple(sorted(n_obj - 1 - i for i in cov))
        groups_a = {tuple(r.tokens.tolist()): r.covering for r in a.regions}
        groups_b = {tuple(r.tokens.tolist()): r.covering for r in b.regions}
        assert set(groups_a) == set(groups_b)
        for tokens, covering in groups_a.items():
            assert groups_b[tokens] == remap(covering)

    def test_zero_token_object_absent_from_coverings(self):
        layout = Layout.build(
            512, 512,
            [(BoundingBox(0.3, 0.3, 0.35, 0.35), "tiny"), (BoundingBox(0, 0, 1, 1), "big")],
        )
        partition = reorganize(layout, TokenGrid(2, 2))
        assert all(0 not in r.covering for r in partition.regions)


class TestSelection:
    def test_select_visual_full_cover(self):
        layout = Layout.build(512, 512, [(BoundingBox(0, 0, 1, 1), "everything")])
        grid = TokenGrid(4, 4)
        partition = reorganize(layout, grid)
        assert set(select_visual(partition, 0)) == set(range(16))

    def test_select_visual_overlap_region(self, two_box_layout):
        grid = TokenGrid(8, 8)
        partition = reorganize(two_box_layout, grid)
        overlap_index = [r.covering for r in partition.regions].index((0, 1))
        expected = set(rasterize_box(two_box_layout.objects[0].box, grid)) & set(
            rasterize_box(two_box_layout.objects[1].box, grid)
        )
        assert set(select_visual(partition, overlap_index)) == expected

    def test_select_visual_out_of_range(self, two_box_layout):
        partition = reorganize(two_box_layout, TokenGrid(8, 8))
        with pytest.raises(IndexError):
            select_visual(partition, partition.n_regions)
        with pytest.raises(IndexError):
            select_visual(partition, -1)

    def test_select_descriptions_out_of_range(self, two_box_layout):
        partition = reorganize(two_box_layout, TokenGrid(8, 8))
        with pytest.raises(IndexError):
            select_descriptions(two_box_layout, partition, partition.n_regions)

    @given(layouts(max_objects=6), grids(max_side=12))
    @settings(max_examples=100)
    def test_regions_partition_token_set(self, layout, grid):
        partition = reorganize(layout, grid)
        union = set()
        for idx in range(partition.n_regions):
            tokens = set(select_visual(partition, idx))
            assert union.isdisjoint(tokens)
            union |= tokens
        assert union == set(range(grid.n_tokens))

    def test_background_selects_no_descriptions(self, two_box_layout):
        partition = reorganize(two_box_layout, TokenGrid(8, 8))
        background = [r.covering for r in partition.regions].index(())
        assert select_descriptions(two_box_layout, partition, background) == []

    def test_overlap_selects_both_objects(self, two_box_layout):
        partition = reorganize(two_box_layout, TokenGrid(8, 8))
        overlap = [r.covering for r in partition.regions].index((0, 1))
        selected = select_descriptions(two_box_layout, partition, overlap)
        assert [o.id for o in selected] == [0, 1]

    @given(layouts(max_objects=6), grids(max_side=12))
    @settings(max_examples=100)
    def test_selection_agrees_with_token_intersection(self, layout, grid):
        """An object belongs to a region's descriptions iff its rasterized
        box shares at least one token with the region."""
        partition = reorganize(layout, grid)
        token_sets = {obj.id: set(rasterize_box(obj.box, grid)) for obj in layout.objects}
        for idx in range(partition.n_regions):
            region_tokens = set(select_visual(partition, idx))
            selected = {o.id for o in select_descriptions(layout, partition, idx)}
            expected = {
                oid for oid, toks in token_sets.items() if toks & region_tokens
            }
            assert selected == expected


class TestSerialization:
    def test_round_trip(self, two_box_layout):
        partition = reorganize(two_box_layout, TokenGrid(8, 8))
        clone = partition_from_dict(partition_to_dict(partition))
        assert [r.covering for r in clone.regions] == [r.covering for r in partition.regions]
        for a, b in zip(clone.regions, partition.regions):
            assert np.array_equal(a.tokens, b.tokens)
        assert np.array_equal(clone.token_to_region, partition.token_to_region)

    def test_dict_is_plain_ints(self, two_box_layout):
        payload = partition_to_dict(reorganize(two_box_layout, TokenGrid(4, 4)))
        for region in payload["regions"]:
            assert all(isinstance(v, int) for v in region["covering"])
            assert all(isinstance(v, int) for v in region["tokens"])
