"""File format contracts: RFM1 round-trips, rejection cases, JSONL parsing."""

import json
import struct

import numpy as np
import pytest

from relief.geometry import BoxPx, GeometryMeta
from relief.tensor_io import (
    AnnotationFormatError,
    AnnotationRecord,
    AnnotationSet,
    BadMagicError,
    FeatureStack,
    MissingSidecarError,
    NonFiniteValueError,
    ProposalFormatError,
    ProposalSet,
    SidecarFormatError,
    TruncatedPayloadError,
    load_annotations,
    load_feature_stack,
    load_proposals,
    save_annotations,
    save_feature_stack,
    save_proposals,
    sidecar_path,
)

GEOM = GeometryMeta(stride_x=4, stride_y=4, offset_x=0, offset_y=0, image_w=64, image_h=64)


def random_stack(rng, c=3, h=4, w=5, geom=GEOM):
    values = rng.standard_normal((c, h, w)).astype(np.float32)
    return FeatureStack(values, geom)


def stacks_equal(a: FeatureStack, b: FeatureStack) -> bool:
    return (
        a.values.tobytes() == b.values.tobytes()
        and a.values.shape == b.values.shape
        and a.geometry == b.geometry
    )


class TestRFM1:
    def test_round_trip_smallest_stack(self, tmp_path):
        stack = FeatureStack(np.zeros((1, 1, 1), dtype=np.float32), GEOM)
        path = tmp_path / "a.rfm"
        save_feature_stack(stack, path)
        loaded = load_feature_stack(path)
        assert stacks_equal(stack, loaded)
        assert loaded.values[0, 0, 0] == 0.0

    def test_round_trip_random_stacks(self, tmp_path):
        rng = np.random.default_rng(11)
        for i in range(25):
            stack = random_stack(rng)
            path = tmp_path / f"s{i}.rfm"
            save_feature_stack(stack, path)
            assert stacks_equal(stack, load_feature_stack(path))

    def test_payload_layout_matches_hex_dump(self, tmp_path):
        # independent byte-level check: header then little-endian floats
        stack = FeatureStack(
            np.array([[[1.0, 2.0], [3.0, 4.0]]], dtype=np.float32), GEOM
        )
        path = tmp_path / "b.rfm"
        save_feature_stack(stack, path)
        blob = path.read_bytes()
        assert blob[:16] == b"RFM1" + struct.pack("<III", 1, 2, 2)
        assert blob[16:] == struct.pack("<4f", 1.0, 2.0, 3.0, 4.0)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.rfm"
        path.write_bytes(b"NOPE0000")
        with pytest.raises(BadMagicError):
            load_feature_stack(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "short.rfm"
        path.write_bytes(b"RFM1\x01")
        with pytest.raises(BadMagicError):
            load_feature_stack(path)

    @pytest.mark.parametrize("extra", [-4, 4])
    def test_payload_length_mismatch_rejected(self, tmp_path, extra):
        path = tmp_path / "trunc.rfm"
        payload = struct.pack("<4f", 1, 2, 3, 4)
        if extra < 0:
            payload = payload[:extra]
        else:
            payload += b"\x00" * extra
        path.write_bytes(b"RFM1" + struct.pack("<III", 1, 2, 2) + payload)
        with pytest.raises(TruncatedPayloadError):
            load_feature_stack(path)

    def test_non_finite_payload_rejected(self, tmp_path):
        path = tmp_path / "nan.rfm"
        path.write_bytes(b"RFM1" + struct.pack("<III", 1, 1, 1) + struct.pack("<f", float("nan")))
        sidecar_path(path).write_text(
            json.dumps(
                {"stride_x": 4, "stride_y": 4, "offset_x": 0, "offset_y": 0, "image_w": 64, "image_h": 64}
            )
        )
        with pytest.raises(NonFiniteValueError):
            load_feature_stack(path)

    def test_missing_sidecar(self, tmp_path):
        path = tmp_path / "c.rfm"
        path.write_bytes(b"RFM1" + struct.pack("<III", 1, 1, 1) + struct.pack("<f", 0.0))
        with pytest.raises(MissingSidecarError):
            load_feature_stack(path)

    def test_sidecar_missing_field(self, tmp_path):
        path = tmp_path / "d.rfm"
        path.write_bytes(b"RFM1" + struct.pack("<III", 1, 1, 1) + struct.pack("<f", 0.0))
        sidecar_path(path).write_text(json.dumps({"stride_x": 4}))
        with pytest.raises(SidecarFormatError, match="stride_y"):
            load_feature_stack(path)

    def test_save_unwritable_path(self, tmp_path):
        stack = FeatureStack(np.zeros((1, 1, 1), dtype=np.float32), GEOM)
        with pytest.raises(OSError):
            save_feature_stack(stack, tmp_path / "no" / "such" / "dir" / "x.rfm")


class TestFeatureStackValidation:
    def test_rejects_wrong_ndim(self):
        with pytest.raises(ValueError):
            FeatureStack(np.zeros((2, 2), dtype=np.float32), GEOM)

    def test_rejects_nan(self):
        values = np.zeros((1, 2, 2), dtype=np.float32)
        values[0, 0, 0] = np.nan
        with pytest.raises(NonFiniteValueError):
            FeatureStack(values, GEOM)

    def test_rejects_grid_overshooting_image(self):
        # 20 cells of stride 4 = 80 px > 64 + 4
        with pytest.raises(ValueError):
            FeatureStack(np.zeros((1, 4, 20), dtype=np.float32), GEOM)

    def test_geometry_validation(self):
        with pytest.raises(ValueError):
            GeometryMeta(0, 4, 0, 0, 64, 64)
        with pytest.raises(ValueError):
            GeometryMeta(4, 4, -1, 0, 64, 64)
        with pytest.raises(ValueError):
            GeometryMeta(4, 4, 0, 0, 0, 64)


class TestAnnotations:
    def test_single_record(self, tmp_path):
        path = tmp_path / "a.jsonl"
        path.write_text('{"image_id":"a","gt_boxes":[[0,0,9,9]]}\n')
        aset = load_annotations(path)
        assert len(aset.records) == 1
        assert aset.records[0].image_id == "a"
        assert aset.records[0].gt_boxes == (BoxPx(0, 0, 9, 9),)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        assert load_annotations(path).records == ()

    def test_round_trip_random_records(self, tmp_path):
        rng = np.random.default_rng(5)
        records = []
        for i in range(100):
            boxes = []
            for _ in range(int(rng.integers(0, 5))):
                x0, y0 = int(rng.integers(0, 50)), int(rng.integers(0, 50))
                boxes.append(
                    BoxPx(x0, y0, x0 + int(rng.integers(0, 30)), y0 + int(rng.integers(0, 30)))
                )
            records.append(AnnotationRecord(f"img_{i}", tuple(boxes)))
        aset = AnnotationSet(tuple(records))
        path = tmp_path / "r.jsonl"
        save_annotations(aset, path)
        loaded = load_annotations(path)
        assert loaded == aset

    def test_malformed_line_names_line_number(self, tmp_path):
        path = tmp_path / "m.jsonl"
        path.write_text('{"image_id":"a","gt_boxes":[]}\nnot json\n')
        with pytest.raises(AnnotationFormatError, match=":2"):
            load_annotations(path)

    def test_duplicate_ids_rejected(self, tmp_path):
        path = tmp_path / "dup.jsonl"
        path.write_text(
            '{"image_id":"a","gt_boxes":[]}\n{"image_id":"a","gt_boxes":[]}\n'
        )
        with pytest.raises(AnnotationFormatError, match="duplicate"):
            load_annotations(path)

    def test_inverted_box_rejected(self, tmp_path):
        path = tmp_path / "inv.jsonl"
        path.write_text('{"image_id":"a","gt_boxes":[[9,0,0,9]]}\n')
        with pytest.raises(AnnotationFormatError, match=":1"):
            load_annotations(path)

    def test_non_integer_coords_rejected(self, tmp_path):
        path = tmp_path / "f.jsonl"
        path.write_text('{"image_id":"a","gt_boxes":[[0.5,0,9,9]]}\n')
        with pytest.raises(AnnotationFormatError):
            load_annotations(path)


class TestProposals:
    def make_sets(self, rng, n=20):
        sets = []
        for i in range(n):
            boxes = []
            for _ in range(int(rng.integers(1, 6))):
                x0, y0 = int(rng.integers(0, 50)), int(rng.integers(0, 50))
                kind = ("small", "big", "scaled", "refined")[int(rng.integers(0, 4))]
                boxes.append(
                    BoxPx(x0, y0, x0 + int(rng.integers(0, 30)), y0 + int(rng.integers(0, 30)), kind)
                )
            sets.append(ProposalSet(f"img_{i}", tuple(boxes), int(rng.integers(0, 10**9))))
        return sets

    def test_round_trip(self, tmp_path):
        sets = self.make_sets(np.random.default_rng(7))
        path = tmp_path / "p.jsonl"
        save_proposals(sets, path)
        assert load_proposals(path) == sets

    def test_wire_format(self, tmp_path):
        path = tmp_path / "w.jsonl"
        save_proposals([ProposalSet("a", (BoxPx(1, 2, 3, 4, "big"),), 5)], path)
        obj = json.loads(path.read_text())
        assert obj == {
            "image_id": "a",
            "gen_time_ns": 5,
            "boxes": [{"x0": 1, "y0": 2, "x1": 3, "y1": 4, "kind": "big"}],
        }

    def test_malformed_line_names_line_number(self, tmp_path):
        path = tmp_path / "m.jsonl"
        path.write_text('{"image_id":"a","gen_time_ns":0,"boxes":[]}\n{"image_id":3}\n')
        with pytest.raises(ProposalFormatError, match=":2"):
            load_proposals(path)

    def test_negative_gen_time_rejected(self, tmp_path):
        path = tmp_path / "neg.jsonl"
        path.write_text('{"image_id":"a","gen_time_ns":-1,"boxes":[]}\n')
        with pytest.raises(ProposalFormatError):
            load_proposals(path)

    def test_bad_kind_rejected(self, tmp_path):
        path = tmp_path / "kind.jsonl"
        path.write_text(
            '{"image_id":"a","gen_time_ns":0,"boxes":[{"x0":0,"y0":0,"x1":1,"y1":1,"kind":"huge"}]}\n'
        )
        with pytest.raises(ProposalFormatError):
            load_proposals(path)
