"""File formats: layout schema, feature binaries, canonical JSON, netpbm."""

import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings

from rgkit import BoundingBox, Layout, TokenGrid
from rgkit.fileio import (
    LayoutFormatError,
    atomic_write_text,
    canonical_json,
    feature_bytes,
    layout_from_dict,
    layout_to_dict,
    load_layout,
    mask_from_pgm,
    read_features,
    read_pgm,
    read_ppm,
    save_layout,
    write_features,
    write_pgm,
    write_ppm,
)

from strategies import layouts


class TestLayoutSchema:
    def test_round_trip_precision(self):
        layout = Layout.build(
            640,
            480,
            [
                (BoundingBox(0.1, 0.2, 0.45, 0.85), "a tall green bottle"),
                (BoundingBox(0.3, 0.05, 0.9, 0.5), "an open book"),
            ],
            caption="desk scene",
        )
        clone = layout_from_dict(layout_to_dict(layout))
        assert clone.image_width == 640 and clone.image_height == 480
        assert clone.caption == "desk scene"
        for a, b in zip(clone.objects, layout.objects):
            assert a.text == b.text and a.id == b.id
            for got, want in zip(a.box.as_tuple(), b.box.as_tuple()):
                assert got == pytest.approx(want, abs=1e-9)

    @given(layouts(max_objects=4))
    @settings(max_examples=100)
    def test_round_trip_any_layout(self, layout):
        clone = layout_from_dict(layout_to_dict(layout))
        assert len(clone.objects) == len(layout.objects)
        for a, b in zip(clone.objects, layout.objects):
            for got, want in zip(a.box.as_tuple(), b.box.as_tuple()):
                assert got == pytest.approx(want, abs=1e-9)

    def test_pixel_coordinates_in_files(self):
        layout = Layout.build(200, 100, [(BoundingBox(0.25, 0.5, 0.75, 1.0), "thing")])
        payload = layout_to_dict(layout)
        assert payload["objects"][0]["bbox"] == [50.0, 50.0, 150.0, 100.0]

    def test_unknown_field_strict_rejected(self):
        payload = {"image_size": [100, 100], "objects": [], "extra": 1}
        with pytest.raises(LayoutFormatError):
            layout_from_dict(payload, strict=True)

    def test_unknown_field_lenient_warns(self):
        payload = {"image_size": [100, 100], "objects": [], "extra": 1}
        with pytest.warns(UserWarning, match="unknown layout fields"):
            layout_from_dict(payload, strict=False)

    def test_unknown_object_field_strict_rejected(self):
        payload = {
            "image_size": [100, 100],
            "objects": [{"bbox": [0, 0, 10, 10], "label": "x", "color": "red"}],
        }
        with pytest.raises(LayoutFormatError):
            layout_from_dict(payload, strict=True)

    def test_missing_fields_rejected(self):
        with pytest.raises(LayoutFormatError):
            layout_from_dict({"objects": []})
        with pytest.raises(LayoutFormatError):
            layout_from_dict({"image_size": [100, 100], "objects": [{"label": "x"}]})

    def test_bad_image_size_rejected(self):
        with pytest.raises(LayoutFormatError):
            layout_from_dict({"image_size": [0, 100], "objects": []})

    def test_file_round_trip(self, tmp_path):
        layout = Layout.build(512, 512, [(BoundingBox(0.1, 0.1, 0.9, 0.9), "wide thing")])
        path = tmp_path / "layout.json"
        save_layout(path, layout)
        clone = load_layout(path)
        assert clone.objects[0].text == "wide thing"

    def test_invalid_json_reported(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(LayoutFormatError):
            load_layout(path)


class TestCanonicalJson:
    def test_sorted_keys_and_rounding(self):
        text = canonical_json({"b": 0.123456789123, "a": 1})
        assert text.index('"a"') < text.index('"b"')
        assert "0.123456789" in text and "0.1234567891" not in text

    def test_stable_across_calls(self):
        payload = {"x": [0.1, 0.2, {"y": 3.14159265358979}]}
        assert canonical_json(payload) == canonical_json(payload)

    def test_parseable(self):
        payload = {"scores": [1.0, None, 2.5], "name": "t"}
        assert json.loads(canonical_json(payload)) == {
            "scores": [1.0, None, 2.5],
            "name": "t",
        }


class TestFeatureBinary:
    def test_round_trip(self, tmp_path):
        grid = TokenGrid(3, 5)
        rng = np.random.default_rng(0)
        data = rng.standard_normal((15, 7))
        path = tmp_path / "features.bin"
        write_features(path, grid, data)
        got_grid, got = read_features(path)
        assert (got_grid.height, got_grid.width) == (3, 5)
        assert got.shape == (15, 7)
        assert np.allclose(got, data, atol=1e-6)  # float32 storage

    def test_header_is_little_endian(self):
        grid = TokenGrid(2, 3)
        raw = feature_bytes(grid, np.zeros((6, 4)))
        assert struct.unpack("<III", raw[:12]) == (2, 3, 4)

    def test_truncated_rejected(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(struct.pack("<III", 2, 2, 2) + b"\x00" * 7)
        with pytest.raises(ValueError):
            read_features(path)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            feature_bytes(TokenGrid(2, 2), np.zeros((5, 3)))


class TestNetpbm:
    def test_pgm_round_trip(self, tmp_path):
        mask = np.zeros((6, 9), dtype=bool)
        mask[2:4, 3:7] = True
        path = tmp_path / "mask.pgm"
        write_pgm(path, mask)
        assert np.array_equal(mask_from_pgm(path), mask)
        raw = read_pgm(path)
        assert raw.dtype == np.uint8
        assert set(np.unique(raw)) <= {0, 255}

    def test_ppm_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        rgb = rng.integers(0, 256, size=(5, 7, 3), dtype=np.uint8)
        path = tmp_path / "img.ppm"
        write_ppm(path, rgb)
        assert np.array_equal(read_ppm(path), rgb)

    def test_wrong_magic_rejected(self, tmp_path):
        path = tmp_path / "x.pgm"
        path.write_bytes(b"P6\n1 1\n255\n\x00\x00\x00")
        with pytest.raises(ValueError):
            read_pgm(path)


class TestTokenEmbeddingFile:
    def test_load_and_use(self, tmp_path):
        from rgkit.fileio import load_token_embeddings
        from rgkit.grounding import BOS_MARKER, EOS_MARKER, SEP_MARKER, FileTokenEmbedder

        table = {
            BOS_MARKER: [1.0] + [0.0] * 7,
            EOS_MARKER: [0.0, 1.0] + [0.0] * 6,
            SEP_MARKER: [0.0, 0.0, 1.0] + [0.0] * 5,
            "apple": [0.0] * 7 + [2.0],
        }
        path = tmp_path / "tokens.json"
        path.write_text(json.dumps(table))
        embedder = FileTokenEmbedder(load_token_embeddings(path))
        assert embedder.dim == 8
        assert embedder.embed("apple")[7] == pytest.approx(1.0)  # re-normalized

    def test_non_object_rejected(self, tmp_path):
        from rgkit.fileio import load_token_embeddings

        path = tmp_path / "tokens.json"
        path.write_text(json.dumps([1, 2, 3]))
        with pytest.raises(ValueError):
            load_token_embeddings(path)


class TestAtomicWrite:
    def test_no_partial_files_left(self, tmp_path):
        target = tmp_path / "out.txt"
        atomic_write_text(target, "hello")
        assert target.read_text() == "hello"
        assert [p.name for p in tmp_path.iterdir()] == ["out.txt"]

    def test_overwrites_existing(self, tmp_path):
        target = tmp_path / "out.txt"
        atomic_write_text(target, "one")
        atomic_write_text(target, "two")
        assert target.read_text() == "two"
