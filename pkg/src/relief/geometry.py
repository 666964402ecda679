"""Pixel-space boxes and the feature-cell to image-pixel mapping."""

from __future__ import annotations

import math
from dataclasses import dataclass

BOX_KINDS = ("small", "big", "scaled", "refined")


class DegenerateBoxError(ValueError):
    """A mapped box lies entirely outside the image."""


def round_half_up(v: float) -> int:
    """Round to the nearest integer, ties away from the floor (0.5 -> 1)."""
    return math.floor(v + 0.5)


@dataclass(frozen=True, slots=True)
class GeometryMeta:
    """Affine mapping from feature-map cells to source-image pixels.

    Each cell is treated as a stride_x by stride_y pixel tile; the top-left
    corner of cell (0, 0) sits at pixel (offset_x, offset_y). Mapped boxes
    may overshoot the image; they are clipped where boxes are built.
    """

    stride_x: float
    stride_y: float
    offset_x: float
    offset_y: float
    image_w: int
    image_h: int

    def __post_init__(self) -> None:
        if self.stride_x <= 0 or self.stride_y <= 0:
            raise ValueError(f"strides must be > 0, got ({self.stride_x}, {self.stride_y})")
        if self.offset_x < 0 or self.offset_y < 0:
            raise ValueError(f"offsets must be >= 0, got ({self.offset_x}, {self.offset_y})")
        if self.image_w <= 0 or self.image_h <= 0:
            raise ValueError(f"image dimensions must be > 0, got {self.image_w}x{self.image_h}")


@dataclass(frozen=True, slots=True)
class BoxPx:
    """Axis-aligned rectangle in pixel coordinates, corners inclusive."""

    x0: int
    y0: int
    x1: int
    y1: int
    kind: str = "small"

    def __post_init__(self) -> None:
        if self.kind not in BOX_KINDS:
            raise ValueError(f"unknown box kind {self.kind!r}")
        if self.x0 < 0 or self.y0 < 0:
            raise ValueError(f"box corners must be >= 0, got ({self.x0}, {self.y0})")
        if self.x0 > self.x1 or self.y0 > self.y1:
            raise ValueError(f"inverted box ({self.x0}, {self.y0}, {self.x1}, {self.y1})")

    @property
    def w(self) -> int:
        return self.x1 - self.x0 + 1

    @property
    def h(self) -> int:
        return self.y1 - self.y0 + 1

    @property
    def area(self) -> int:
        return self.w * self.h

    @property
    def center(self) -> tuple[float, float]:
        return (self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0

    def coords(self) -> tuple[int, int, int, int]:
        return self.x0, self.y0, self.x1, self.y1


def cell_rect_to_box(
    row_min: int,
    row_max: int,
    col_min: int,
    col_max: int,
    geom: GeometryMeta,
    kind: str = "small",
) -> BoxPx:
    """Map an inclusive cell rectangle to pixel coordinates and clip.

    Raises DegenerateBoxError when the mapped rectangle falls entirely
    outside the image.
    """
    floor = math.floor
    x0 = floor(geom.offset_x + col_min * geom.stride_x + 0.5)
    x1 = floor(geom.offset_x + (col_max + 1) * geom.stride_x - 0.5)
    y0 = floor(geom.offset_y + row_min * geom.stride_y + 0.5)
    y1 = floor(geom.offset_y + (row_max + 1) * geom.stride_y - 0.5)
    # sub-pixel strides can round a single cell below 1 px; keep boxes non-empty
    x1 = max(x1, x0)
    y1 = max(y1, y0)
    if x0 > geom.image_w - 1 or x1 < 0 or y0 > geom.image_h - 1 or y1 < 0:
        raise DegenerateBoxError(
            f"cell rect rows {row_min}..{row_max} cols {col_min}..{col_max} maps outside "
            f"{geom.image_w}x{geom.image_h} image"
        )
    return BoxPx(
        max(x0, 0),
        max(y0, 0),
        min(x1, geom.image_w - 1),
        min(y1, geom.image_h - 1),
        kind,
    )


def box_from_center(
    cx: float,
    cy: float,
    w: int,
    h: int,
    geom: GeometryMeta,
    kind: str,
) -> BoxPx:
    """Build a w-by-h box centered at (cx, cy), clipped to the image.

    The realized center stays within 0.5 px of (cx, cy) before clipping
    (integer rounding is the only displacement).
    """
    x0 = round_half_up(cx - (w - 1) / 2.0)
    y0 = round_half_up(cy - (h - 1) / 2.0)
    x1 = x0 + w - 1
    y1 = y0 + h - 1
    x0 = min(max(x0, 0), geom.image_w - 1)
    x1 = min(max(x1, 0), geom.image_w - 1)
    y0 = min(max(y0, 0), geom.image_h - 1)
    y1 = min(max(y1, 0), geom.image_h - 1)
    return BoxPx(x0, y0, x1, y1, kind)
