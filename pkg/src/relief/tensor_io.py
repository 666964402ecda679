"""Bit-exact file formats for feature stacks, annotations, and proposals.

RFM1 binary layout: magic bytes ``RFM1``, three unsigned 32-bit
little-endian integers C, H, W, then C*H*W 32-bit little-endian floats,
channel-major and row-major within each channel. Geometry lives in a JSON
sidecar named ``<path>.geom.json``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import BoxPx, GeometryMeta

RFM1_MAGIC = b"RFM1"
_HEADER = struct.Struct("<4sIII")

GEOM_SIDECAR_SUFFIX = ".geom.json"
_GEOM_FLOAT_FIELDS = ("stride_x", "stride_y", "offset_x", "offset_y")
_GEOM_INT_FIELDS = ("image_w", "image_h")


class TensorIOError(Exception):
    """Base class for load/save failures in this module."""


class BadMagicError(TensorIOError):
    """File does not start with the RFM1 magic bytes."""


class TruncatedPayloadError(TensorIOError):
    """Declared C*H*W disagrees with the payload actually present."""


class NonFiniteValueError(TensorIOError):
    """Payload contains NaN or infinity."""


class MissingSidecarError(TensorIOError):
    """Geometry sidecar file is absent."""


class SidecarFormatError(TensorIOError):
    """Geometry sidecar is unreadable or missing required fields."""


class AnnotationFormatError(TensorIOError):
    """Annotation JSONL line is malformed; message names the line."""


class ProposalFormatError(TensorIOError):
    """Proposal JSONL line is malformed; message names the line."""


@dataclass(frozen=True)
class FeatureStack:
    """C x H x W activation tensor plus its cell-to-pixel geometry."""

    values: np.ndarray
    geometry: GeometryMeta

    def __post_init__(self) -> None:
        v = self.values
        if v.ndim != 3:
            raise ValueError(f"expected a (C, H, W) array, got shape {v.shape}")
        if any(d < 1 for d in v.shape):
            raise ValueError(f"all dimensions must be >= 1, got shape {v.shape}")
        if v.dtype != np.float32:
            raise ValueError(f"values must be float32, got {v.dtype}")
        if not np.isfinite(v).all():
            raise NonFiniteValueError("feature stack contains non-finite values")
        g = self.geometry
        if g.offset_x + g.stride_x * self.width > g.image_w + g.stride_x:
            raise ValueError("cell grid overshoots image width by more than one stride")
        if g.offset_y + g.stride_y * self.height > g.image_h + g.stride_y:
            raise ValueError("cell grid overshoots image height by more than one stride")

    @property
    def channels(self) -> int:
        return int(self.values.shape[0])

    @property
    def height(self) -> int:
        return int(self.values.shape[1])

    @property
    def width(self) -> int:
        return int(self.values.shape[2])


@dataclass(frozen=True)
class AnnotationRecord:
    image_id: str
    gt_boxes: tuple[BoxPx, ...]


@dataclass(frozen=True)
class AnnotationSet:
    """Ground-truth boxes for a corpus, one record per image."""

    records: tuple[AnnotationRecord, ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for rec in self.records:
            if not rec.image_id:
                raise ValueError("image_id must be nonempty")
            if rec.image_id in seen:
                raise ValueError(f"duplicate image_id {rec.image_id!r}")
            seen.add(rec.image_id)


@dataclass(frozen=True)
class ProposalSet:
    """Proposals for one image plus the wall-clock time spent generating them."""

    image_id: str
    boxes: tuple[BoxPx, ...]
    gen_time_ns: int = 0

    def __post_init__(self) -> None:
        if self.gen_time_ns < 0:
            raise ValueError(f"gen_time_ns must be >= 0, got {self.gen_time_ns}")


def sidecar_path(path: str | Path) -> Path:
    return Path(str(path) + GEOM_SIDECAR_SUFFIX)


def _load_geometry(path: Path) -> GeometryMeta:
    sc = sidecar_path(path)
    if not sc.exists():
        raise MissingSidecarError(f"geometry sidecar not found: {sc}")
    try:
        raw = json.loads(sc.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SidecarFormatError(f"{sc}: {exc}") from exc
    if not isinstance(raw, dict):
        raise SidecarFormatError(f"{sc}: expected a JSON object")
    fields: dict[str, float | int] = {}
    for name in _GEOM_FLOAT_FIELDS + _GEOM_INT_FIELDS:
        if name not in raw:
            raise SidecarFormatError(f"{sc}: missing field {name!r}")
        val = raw[name]
        if not isinstance(val, (int, float)) or isinstance(val, bool):
            raise SidecarFormatError(f"{sc}: field {name!r} must be numeric")
        fields[name] = float(val)
    for name in _GEOM_INT_FIELDS:
        if fields[name] != int(fields[name]):
            raise SidecarFormatError(f"{sc}: field {name!r} must be an integer")
        fields[name] = int(fields[name])
    try:
        return GeometryMeta(**fields)  # type: ignore[arg-type]
    except ValueError as exc:
        raise SidecarFormatError(f"{sc}: {exc}") from exc


def _save_geometry(geom: GeometryMeta, path: Path) -> None:
    payload = {
        "stride_x": geom.stride_x,
        "stride_y": geom.stride_y,
        "offset_x": geom.offset_x,
        "offset_y": geom.offset_y,
        "image_w": geom.image_w,
        "image_h": geom.image_h,
    }
    sidecar_path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_feature_stack(path: str | Path) -> FeatureStack:
    """Read an RFM1 file and its geometry sidecar into a validated stack."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _HEADER.size or blob[:4] != RFM1_MAGIC:
        raise BadMagicError(f"{path}: not an RFM1 file")
    _, c, h, w = _HEADER.unpack_from(blob)
    if c < 1 or h < 1 or w < 1:
        raise TruncatedPayloadError(f"{path}: declared shape {c}x{h}x{w} is invalid")
    expected = c * h * w * 4
    payload = blob[_HEADER.size:]
    if len(payload) != expected:
        raise TruncatedPayloadError(
            f"{path}: declared {c}x{h}x{w} needs {expected} payload bytes, found {len(payload)}"
        )
    values = np.frombuffer(payload, dtype="<f4").reshape(c, h, w).astype(np.float32)
    if not np.isfinite(values).all():
        raise NonFiniteValueError(f"{path}: payload contains non-finite values")
    return FeatureStack(values=values, geometry=_load_geometry(path))


def save_feature_stack(stack: FeatureStack, path: str | Path) -> None:
    """Write the RFM1 binary and its geometry sidecar."""
    path = Path(path)
    header = _HEADER.pack(RFM1_MAGIC, stack.channels, stack.height, stack.width)
    payload = np.ascontiguousarray(stack.values, dtype="<f4").tobytes()
    path.write_bytes(header + payload)
    _save_geometry(stack.geometry, path)


def _parse_box_list(raw: object, where: str) -> tuple[BoxPx, ...]:
    if not isinstance(raw, list):
        raise AnnotationFormatError(f"{where}: gt_boxes must be a list")
    boxes = []
    for entry in raw:
        if not isinstance(entry, list) or len(entry) != 4:
            raise AnnotationFormatError(f"{where}: each box must be [x0, y0, x1, y1]")
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in entry):
            raise AnnotationFormatError(f"{where}: box coordinates must be integers")
        try:
            boxes.append(BoxPx(*entry))
        except ValueError as exc:
            raise AnnotationFormatError(f"{where}: {exc}") from exc
    return tuple(boxes)


def load_annotations(path: str | Path) -> AnnotationSet:
    """Parse annotation JSON lines; errors name the offending line."""
    path = Path(path)
    records = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        where = f"{path}:{lineno}"
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise AnnotationFormatError(f"{where}: {exc}") from exc
        if not isinstance(obj, dict):
            raise AnnotationFormatError(f"{where}: expected a JSON object")
        image_id = obj.get("image_id")
        if not isinstance(image_id, str) or not image_id:
            raise AnnotationFormatError(f"{where}: image_id must be a nonempty string")
        if "gt_boxes" not in obj:
            raise AnnotationFormatError(f"{where}: missing gt_boxes")
        records.append(AnnotationRecord(image_id, _parse_box_list(obj["gt_boxes"], where)))
    try:
        return AnnotationSet(tuple(records))
    except ValueError as exc:
        raise AnnotationFormatError(f"{path}: {exc}") from exc


def save_annotations(annotations: AnnotationSet, path: str | Path) -> None:
    lines = []
    for rec in annotations.records:
        lines.append(
            json.dumps(
                {"image_id": rec.image_id, "gt_boxes": [list(b.coords()) for b in rec.gt_boxes]},
                separators=(",", ":"),
            )
        )
    Path(path).write_text("".join(line + "\n" for line in lines))


def save_proposals(proposals: list[ProposalSet] | tuple[ProposalSet, ...], path: str | Path) -> None:
    """Write proposal sets as JSON lines, one object per image."""
    lines = []
    for ps in proposals:
        obj = {
            "image_id": ps.image_id,
            "gen_time_ns": ps.gen_time_ns,
            "boxes": [
                {"x0": b.x0, "y0": b.y0, "x1": b.x1, "y1": b.y1, "kind": b.kind}
                for b in ps.boxes
            ],
        }
        lines.append(json.dumps(obj, separators=(",", ":")))
    Path(path).write_text("".join(line + "\n" for line in lines))


def load_proposals(path: str | Path) -> list[ProposalSet]:
    """Parse proposal JSON lines; errors name the offending line."""
    path = Path(path)
    out = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        where = f"{path}:{lineno}"
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProposalFormatError(f"{where}: {exc}") from exc
        if not isinstance(obj, dict):
            raise ProposalFormatError(f"{where}: expected a JSON object")
        image_id = obj.get("image_id")
        if not isinstance(image_id, str) or not image_id:
            raise ProposalFormatError(f"{where}: image_id must be a nonempty string")
        gen_time_ns = obj.get("gen_time_ns")
        if not isinstance(gen_time_ns, int) or isinstance(gen_time_ns, bool) or gen_time_ns < 0:
            raise ProposalFormatError(f"{where}: gen_time_ns must be a non-negative integer")
        raw_boxes = obj.get("boxes")
        if not isinstance(raw_boxes, list):
            raise ProposalFormatError(f"{where}: boxes must be a list")
        boxes = []
        for rb in raw_boxes:
            if not isinstance(rb, dict):
                raise ProposalFormatError(f"{where}: each box must be an object")
            try:
                boxes.append(BoxPx(rb["x0"], rb["y0"], rb["x1"], rb["y1"], rb["kind"]))
            except (KeyError, TypeError, ValueError) as exc:
                raise ProposalFormatError(f"{where}: bad box {rb!r}: {exc}") from exc
        out.append(ProposalSet(image_id, tuple(boxes), gen_time_ns))
    return out
