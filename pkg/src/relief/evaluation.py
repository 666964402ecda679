"""Proposal quality and throughput evaluation.

IoU uses pixel-count semantics: a box's area is (x1-x0+1)*(y1-y0+1).
Corpus recall is micro-averaged by pooling every ground-truth box.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .geometry import BoxPx, GeometryMeta, cell_rect_to_box
from .pipeline import PipelineConfig, generate_proposals
from .tensor_io import AnnotationSet, FeatureStack, ProposalSet

SYNTH_CHANNELS = 3
_PLACEMENT_TRIES = 200


class MissingProposalsError(ValueError):
    """An annotated image has no proposal set; message names the ids."""


class PlacementFailedError(RuntimeError):
    """Non-overlapping blob placement could not be found."""


@dataclass(frozen=True)
class RecallCurve:
    """Recall fraction per ascending IoU threshold."""

    thresholds: tuple[float, ...]
    recall: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.thresholds) != len(self.recall):
            raise ValueError("thresholds and recall must have the same length")


@dataclass(frozen=True)
class BenchReport:
    images: int
    mean_proposals: float
    mean_time_ns: float
    p50_ns: float
    p95_ns: float


@dataclass(frozen=True)
class SynthScene:
    """Feature stack with planted rectangular blobs and their pixel boxes."""

    stack: FeatureStack
    gt_boxes: tuple[BoxPx, ...]
    noise_sigma: float
    seed: int


def iou(a: BoxPx, b: BoxPx) -> float:
    """Intersection over union with inclusive-corner pixel counting."""
    iw = min(a.x1, b.x1) - max(a.x0, b.x0) + 1
    ih = min(a.y1, b.y1) - max(a.y0, b.y0) + 1
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def recall_at(
    gt: list[BoxPx] | tuple[BoxPx, ...],
    props: list[BoxPx] | tuple[BoxPx, ...],
    thr: float,
) -> float:
    """Fraction of gt boxes matched by some proposal at IoU >= thr.

    Empty gt counts as a vacuous 1.0.
    """
    if not 0 <= thr <= 1:
        raise ValueError(f"threshold must be in [0, 1], got {thr}")
    if not gt:
        return 1.0
    matched = sum(1 for g in gt if any(iou(g, p) >= thr for p in props))
    return matched / len(gt)


def _best_ious(
    corpus: AnnotationSet,
    proposals: list[ProposalSet] | tuple[ProposalSet, ...],
    top_k: int | None,
) -> list[float]:
    by_id = {ps.image_id: ps for ps in proposals}
    missing = [rec.image_id for rec in corpus.records if rec.image_id not in by_id]
    if missing:
        raise MissingProposalsError(
            "no proposals for image ids: " + ", ".join(sorted(missing))
        )
    best = []
    for rec in corpus.records:
        boxes = by_id[rec.image_id].boxes
        if top_k is not None:
            boxes = boxes[:top_k]
        for g in rec.gt_boxes:
            best.append(max((iou(g, p) for p in boxes), default=0.0))
    return best


def recall_curve(
    corpus: AnnotationSet,
    proposals: list[ProposalSet] | tuple[ProposalSet, ...],
    thresholds: list[float] | tuple[float, ...],
    top_k: int | None = None,
) -> RecallCurve:
    """Micro-averaged corpus recall at each threshold.

    top_k caps each image's proposals in their generated order; proposals
    carry no scores, so this is the deterministic stand-in for ranking.
    """
    thresholds = tuple(float(t) for t in thresholds)
    if not thresholds:
        raise ValueError("thresholds must be nonempty")
    if any(not 0 <= t <= 1 for t in thresholds):
        raise ValueError(f"thresholds must lie in [0, 1], got {thresholds}")
    if any(a > b for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError("thresholds must be ascending")
    if top_k is not None and top_k < 0:
        raise ValueError(f"top_k must be >= 0, got {top_k}")
    best = _best_ious(corpus, proposals, top_k)
    if not best:
        return RecallCurve(thresholds, tuple(1.0 for _ in thresholds))
    n = len(best)
    return RecallCurve(
        thresholds,
        tuple(sum(1 for b in best if b >= t) / n for t in thresholds),
    )


def synth_scene(
    image_w: int,
    image_h: int,
    geom: GeometryMeta,
    n_objects: int,
    noise_sigma: float,
    seed: int,
) -> SynthScene:
    """Deterministically plant high-activation rectangular blobs.

    Blobs are 2..4 cells per side, value 1.0 pre-noise on a 0.0 background,
    repeated across all channels, separated by at least one empty cell so
    each stays its own cluster. Ground-truth boxes are the blob extents
    mapped through the cell geometry.
    """
    if n_objects < 0:
        raise ValueError(f"n_objects must be >= 0, got {n_objects}")
    if noise_sigma < 0:
        raise ValueError(f"noise_sigma must be >= 0, got {noise_sigma}")
    geometry = replace(geom, image_w=image_w, image_h=image_h)
    grid_h = int((image_h - geometry.offset_y) // geometry.stride_y)
    grid_w = int((image_w - geometry.offset_x) // geometry.stride_x)
    if grid_h < 1 or grid_w < 1:
        raise ValueError(f"geometry leaves no cell grid inside {image_w}x{image_h}")

    rng = np.random.default_rng(seed)
    values = np.zeros((SYNTH_CHANNELS, grid_h, grid_w), dtype=np.float64)
    placed: list[tuple[int, int, int, int]] = []
    max_side = min(4, grid_h, grid_w)
    if n_objects > 0 and max_side < 2:
        raise PlacementFailedError(f"cell grid {grid_h}x{grid_w} cannot hold a 2x2 blob")

    for _ in range(n_objects):
        bh = int(rng.integers(2, max_side + 1))
        bw = int(rng.integers(2, max_side + 1))
        for attempt in range(_PLACEMENT_TRIES):
            r0 = int(rng.integers(0, grid_h - bh + 1))
            c0 = int(rng.integers(0, grid_w - bw + 1))
            r1, c1 = r0 + bh - 1, c0 + bw - 1
            # one-cell margin keeps blobs from touching even diagonally
            clash = any(
                r0 - 1 <= pr1 and pr0 <= r1 + 1 and c0 - 1 <= pc1 and pc0 <= c1 + 1
                for pr0, pc0, pr1, pc1 in placed
            )
            if not clash:
                placed.append((r0, c0, r1, c1))
                values[:, r0 : r1 + 1, c0 : c1 + 1] = 1.0
                break
        else:
            raise PlacementFailedError(
                f"could not place blob {len(placed) + 1} of {n_objects} "
                f"after {_PLACEMENT_TRIES} tries on a {grid_h}x{grid_w} grid"
            )

    values += rng.normal(0.0, noise_sigma, values.shape)
    stack = FeatureStack(values.astype(np.float32), geometry)
    gt = tuple(
        cell_rect_to_box(r0, r1, c0, c1, geometry, kind="small") for r0, c0, r1, c1 in placed
    )
    return SynthScene(stack, gt, noise_sigma, seed)


def bench(
    stacks: list[FeatureStack] | tuple[FeatureStack, ...],
    cfg: PipelineConfig,
    repeats: int,
) -> BenchReport:
    """Per-image generation timing over repeats, one warm-up run excluded."""
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    if not stacks:
        raise ValueError("need at least one stack")
    times = []
    counts = []
    for stack in stacks:
        warmed = generate_proposals(stack, cfg)
        counts.append(len(warmed.boxes))
        for _ in range(repeats):
            times.append(generate_proposals(stack, cfg).gen_time_ns)
    arr = np.asarray(times, dtype=np.float64)
    return BenchReport(
        images=len(stacks),
        mean_proposals=float(np.mean(counts)),
        mean_time_ns=float(arr.mean()),
        p50_ns=float(np.percentile(arr, 50)),
        p95_ns=float(np.percentile(arr, 95)),
    )


def write_recall_csv(curve: RecallCurve, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iou_threshold", "recall"])
        for t, r in zip(curve.thresholds, curve.recall):
            writer.writerow([str(t), str(r)])


def write_bench_csv(report: BenchReport, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["images", "mean_proposals", "mean_time_ns", "p50_ns", "p95_ns"])
        writer.writerow(
            [
                report.images,
                str(report.mean_proposals),
                str(report.mean_time_ns),
                str(report.p50_ns),
                str(report.p95_ns),
            ]
        )
