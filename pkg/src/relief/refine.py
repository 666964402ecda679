"""Closed-loop box refinement: a regressor re-applied to its own output.

No box is ever dropped; each is refined independently until its corners
stop moving or the loop cap is reached.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import BoxPx, GeometryMeta, box_from_center, round_half_up

REGRESSOR_KINDS = ("identity", "affine")


@dataclass(frozen=True)
class RegressorSpec:
    """Pluggable box regressor in the usual delta form.

    dx/dy shift the center by a fraction of the width/height; dw/dh scale
    the dimensions by e**dw and e**dh.
    """

    kind: str = "identity"
    dx: float = 0.0
    dy: float = 0.0
    dw: float = 0.0
    dh: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in REGRESSOR_KINDS:
            raise ValueError(f"unknown regressor kind {self.kind!r}")


@dataclass(frozen=True)
class RefineConfig:
    loops: int = 3
    convergence_eps: float = 0.5

    def __post_init__(self) -> None:
        if self.loops < 0:
            raise ValueError(f"loops must be >= 0, got {self.loops}")
        if self.convergence_eps < 0:
            raise ValueError(f"convergence_eps must be >= 0, got {self.convergence_eps}")


def apply_regressor(spec: RegressorSpec, box: BoxPx, geom: GeometryMeta) -> BoxPx:
    """One regressor application; affine output is rounded, clipped, >= 1 px."""
    if spec.kind == "identity":
        return box
    cx, cy = box.center
    cx += spec.dx * box.w
    cy += spec.dy * box.h
    new_w = max(1, round_half_up(box.w * math.exp(spec.dw)))
    new_h = max(1, round_half_up(box.h * math.exp(spec.dh)))
    return box_from_center(cx, cy, new_w, new_h, geom, "refined")


def recursive_refine(
    spec: RegressorSpec,
    boxes: list[BoxPx] | tuple[BoxPx, ...],
    cfg: RefineConfig,
    geom: GeometryMeta,
) -> list[BoxPx]:
    """Feed each box through the regressor up to cfg.loops times.

    A box stops early once all four corners move less than
    cfg.convergence_eps pixels in one application. Boxes that end up
    exactly where they started keep their original kind; moved boxes come
    back as kind "refined". Output order matches input order and no box
    is dropped.
    """
    out = []
    for box in boxes:
        cur = box
        for _ in range(cfg.loops):
            nxt = apply_regressor(spec, cur, geom)
            moved = max(
                abs(nxt.x0 - cur.x0),
                abs(nxt.y0 - cur.y0),
                abs(nxt.x1 - cur.x1),
                abs(nxt.y1 - cur.y1),
            )
            cur = nxt
            if moved < cfg.convergence_eps:
                break
        if cur.coords() == box.coords():
            out.append(box)
        else:
            out.append(BoxPx(cur.x0, cur.y0, cur.x1, cur.y1, "refined"))
    return out
