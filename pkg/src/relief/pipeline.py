"""Proposal generation from a convolutional feature stack.

The pipeline: sum max-normalized channels into one integrate map, split
its value range into uniform feature levels, take each level's connected
cell clusters as small boxes (plus one big per-level union box), then
optionally add four center-anchored rescales of every box.
"""

from __future__ import annotations

import logging
import math
import time
from collections import deque
from dataclasses import dataclass

import numpy as np

from .geometry import BoxPx, DegenerateBoxError, GeometryMeta, cell_rect_to_box
from .tensor_io import FeatureStack, ProposalSet

logger = logging.getLogger(__name__)


class EmptyLevelError(ValueError):
    """A per-level union box was requested for an empty level."""


@dataclass(frozen=True)
class IntegrateMap:
    """Element-wise sum of max-normalized channels, one value per cell."""

    values: np.ndarray  # (H, W) float64

    @property
    def height(self) -> int:
        return int(self.values.shape[0])

    @property
    def width(self) -> int:
        return int(self.values.shape[1])


@dataclass(frozen=True)
class LevelPartition:
    """Total assignment of integrate-map cells to value-range levels.

    Level i covers [value_min + (i-1)*stride, value_min + i*stride), with
    the last bin closed at value_max so every cell gets exactly one level.
    """

    level_count: int
    stride: float
    value_min: float
    value_max: float
    level_of: np.ndarray  # (H, W) int32, entries in 1..level_count

    def __post_init__(self) -> None:
        if self.level_count < 1:
            raise ValueError(f"level_count must be >= 1, got {self.level_count}")
        expected = (self.value_max - self.value_min) / self.level_count
        if self.stride != expected:
            raise ValueError(f"stride {self.stride} != (max - min) / l = {expected}")


@dataclass(frozen=True)
class Cluster:
    """One connected component of same-level cells."""

    level: int
    cells: frozenset[tuple[int, int]]
    row_min: int
    row_max: int
    col_min: int
    col_max: int

    def __len__(self) -> int:
        return len(self.cells)


@dataclass
class PipelineConfig:
    """Pipeline knobs; defaults are ten levels and 0.8/1.5 rescale ratios."""

    level_count: int = 10
    alpha: float = 0.8
    beta: float = 1.5
    connectivity: int = 8
    local_search_enabled: bool = True
    min_cluster_cells: int = 1
    dedup_exact: bool = True

    def __post_init__(self) -> None:
        if self.level_count < 1:
            raise ValueError(f"level_count must be >= 1, got {self.level_count}")
        if not 0 < self.alpha < 1 < self.beta:
            raise ValueError(f"need 0 < alpha < 1 < beta, got alpha={self.alpha} beta={self.beta}")
        if self.connectivity not in (4, 8):
            raise ValueError(f"connectivity must be 4 or 8, got {self.connectivity}")
        if self.min_cluster_cells < 1:
            raise ValueError(f"min_cluster_cells must be >= 1, got {self.min_cluster_cells}")


def build_integrate_map(stack: FeatureStack) -> IntegrateMap:
    """Divide each channel by its max, then sum channels element-wise.

    Channels whose max is exactly zero contribute nothing.
    """
    vals = stack.values.astype(np.float64)
    maxes = vals.max(axis=(1, 2))
    if (maxes == 0.0).any():
        keep = maxes != 0.0
        if not keep.any():
            return IntegrateMap(np.zeros(vals.shape[1:], dtype=np.float64))
        vals = vals[keep]
        maxes = maxes[keep]
    vals /= maxes[:, None, None]
    return IntegrateMap(vals.sum(axis=0))


def separate_levels(imap: IntegrateMap, level_count: int) -> LevelPartition:
    """Split the map's value range into level_count uniform levels.

    A constant map (zero-width range) puts every cell in level 1.
    """
    if level_count < 1:
        raise ValueError(f"level_count must be >= 1, got {level_count}")
    v = imap.values
    vmin = float(v.min())
    vmax = float(v.max())
    if vmax == vmin:
        return LevelPartition(level_count, 0.0, vmin, vmax, np.ones(v.shape, dtype=np.int32))
    stride = (vmax - vmin) / level_count
    levels = np.floor((v - vmin) / stride).astype(np.int32) + 1
    np.minimum(levels, level_count, out=levels)
    return LevelPartition(level_count, stride, vmin, vmax, levels)


def extract_clusters(part: LevelPartition, level: int, connectivity: int = 8) -> list[Cluster]:
    """Return the level's maximal connected cell components.

    Output is ordered by (row_min, col_min) of each component's bounds,
    with row-major discovery order breaking ties.
    """
    if not 1 <= level <= part.level_count:
        raise ValueError(f"level {level} outside 1..{part.level_count}")
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")

    rows, cols = np.nonzero(part.level_of == level)
    if rows.size == 0:
        return []
    height, width = part.level_of.shape
    # flat integer cells with one sentinel column so +-1 steps never wrap rows
    pitch = width + 1
    flat = (rows.astype(np.int64) * pitch + cols).tolist()
    if connectivity == 8:
        steps = (-pitch - 1, -pitch, -pitch + 1, -1, 1, pitch - 1, pitch, pitch + 1)
    else:
        steps = (-pitch, -1, 1, pitch)

    pending = set(flat)
    clusters = []
    for seed in flat:  # row-major seed order keeps discovery deterministic
        if seed not in pending:
            continue
        pending.discard(seed)
        queue = deque((seed,))
        members = [seed]
        while queue:
            cur = queue.popleft()
            for step in steps:
                nb = cur + step
                if nb in pending:
                    pending.discard(nb)
                    queue.append(nb)
                    members.append(nb)
        cells = []
        rmin = cmin = height + width
        rmax = cmax = -1
        for m in members:
            r, c = divmod(m, pitch)
            cells.append((r, c))
            if r < rmin:
                rmin = r
            if r > rmax:
                rmax = r
            if c < cmin:
                cmin = c
            if c > cmax:
                cmax = c
        clusters.append(Cluster(level, frozenset(cells), rmin, rmax, cmin, cmax))
    clusters.sort(key=lambda cl: (cl.row_min, cl.col_min))
    return clusters


def cluster_to_box(cluster: Cluster, geom: GeometryMeta) -> BoxPx:
    """Map a cluster's cell bounds to a clipped pixel box."""
    return cell_rect_to_box(
        cluster.row_min, cluster.row_max, cluster.col_min, cluster.col_max, geom, kind="small"
    )


def big_roi(small_boxes: list[BoxPx] | tuple[BoxPx, ...]) -> BoxPx:
    """Tight bounding rectangle over one level's small boxes."""
    if not small_boxes:
        raise EmptyLevelError("cannot assemble a big box from an empty level")
    return BoxPx(
        min(b.x0 for b in small_boxes),
        min(b.y0 for b in small_boxes),
        max(b.x1 for b in small_boxes),
        max(b.y1 for b in small_boxes),
        "big",
    )


def local_search(box: BoxPx, alpha: float, beta: float, geom: GeometryMeta) -> list[BoxPx]:
    """Four center-anchored rescales of a box: dimensions scaled by
    (beta, beta), (beta, alpha), (alpha, alpha), (alpha, beta).

    The input box itself is not returned.
    """
    if not 0 < alpha < 1 < beta:
        raise ValueError(f"need 0 < alpha < 1 < beta, got alpha={alpha} beta={beta}")
    floor = math.floor
    w = box.x1 - box.x0 + 1
    h = box.y1 - box.y0 + 1
    cx = (box.x0 + box.x1) / 2.0
    cy = (box.y0 + box.y1) / 2.0
    aw, bw = alpha * w, beta * w
    ah, bh = alpha * h, beta * h
    xmax = geom.image_w - 1
    ymax = geom.image_h - 1
    out = []
    for sw, sh in ((bw, bh), (bw, ah), (aw, ah), (aw, bh)):
        nw = max(1, floor(sw + 0.5))
        nh = max(1, floor(sh + 0.5))
        x0 = floor(cx - (nw - 1) / 2.0 + 0.5)
        y0 = floor(cy - (nh - 1) / 2.0 + 0.5)
        x1 = x0 + nw - 1
        y1 = y0 + nh - 1
        out.append(
            BoxPx(
                min(max(x0, 0), xmax),
                min(max(y0, 0), ymax),
                min(max(x1, 0), xmax),
                min(max(y1, 0), ymax),
                "scaled",
            )
        )
    return out


def _local_search_batch(
    sources: list[BoxPx], alpha: float, beta: float, geom: GeometryMeta
) -> list[tuple[list[int], list[int], list[int], list[int]]]:
    """Vectorized local_search over many boxes; bit-identical to the scalar op.

    Returns per-combo corner columns in the scalar op's combo order.
    """
    corners = np.array([b.coords() for b in sources], dtype=np.float64)
    x0, y0, x1, y1 = corners.T
    w = x1 - x0 + 1
    h = y1 - y0 + 1
    cx = (x0 + x1) / 2.0
    cy = (y0 + y1) / 2.0
    combos = ((beta, beta), (beta, alpha), (alpha, alpha), (alpha, beta))
    out = []
    for rw, rh in combos:
        nw = np.maximum(1.0, np.floor(rw * w + 0.5))
        nh = np.maximum(1.0, np.floor(rh * h + 0.5))
        sx0 = np.floor(cx - (nw - 1) / 2.0 + 0.5)
        sy0 = np.floor(cy - (nh - 1) / 2.0 + 0.5)
        sx1 = sx0 + nw - 1
        sy1 = sy0 + nh - 1
        out.append(
            tuple(
                np.clip(arr, 0, hi).astype(np.int64).tolist()
                for arr, hi in ((sx0, geom.image_w - 1), (sy0, geom.image_h - 1),
                                (sx1, geom.image_w - 1), (sy1, geom.image_h - 1))
            )
        )
    return out


def generate_proposals(stack: FeatureStack, cfg: PipelineConfig, image_id: str = "") -> ProposalSet:
    """Run the whole pipeline on one stack and time it.

    Output order: levels ascending; within a level each small box followed
    by its rescales, then the level's big box and its rescales. Exact
    coordinate duplicates keep their first occurrence when dedup is on.
    """
    t0 = time.perf_counter_ns()
    geom = stack.geometry
    imap = build_integrate_map(stack)
    part = separate_levels(imap, cfg.level_count)

    sources: list[BoxPx] = []
    skipped = 0
    for level in range(1, cfg.level_count + 1):
        level_smalls = []
        for cluster in extract_clusters(part, level, cfg.connectivity):
            if len(cluster) < cfg.min_cluster_cells:
                continue
            try:
                level_smalls.append(cluster_to_box(cluster, geom))
            except DegenerateBoxError:
                skipped += 1
        sources.extend(level_smalls)
        if level_smalls:
            sources.append(big_roi(level_smalls))

    if skipped:
        logger.info("skipped %d degenerate boxes that mapped outside the image", skipped)

    if cfg.local_search_enabled and sources:
        scaled = _local_search_batch(sources, cfg.alpha, cfg.beta, geom)
        boxes: list[BoxPx] = []
        for i, src in enumerate(sources):
            boxes.append(src)
            for sx0, sy0, sx1, sy1 in scaled:
                boxes.append(BoxPx(sx0[i], sy0[i], sx1[i], sy1[i], "scaled"))
    else:
        boxes = sources

    if cfg.dedup_exact:
        seen: set[tuple[int, int, int, int]] = set()
        unique = []
        for box in boxes:
            key = box.coords()
            if key not in seen:
                seen.add(key)
                unique.append(box)
        boxes = unique

    return ProposalSet(image_id, tuple(boxes), time.perf_counter_ns() - t0)
