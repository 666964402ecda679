"""Command-line front end: generate, eval, bench, and synth subcommands.

Settings come from built-in defaults, then an optional JSON config file,
then explicit flags (flags win). RELIEF_LOG=error|info|debug controls
stderr logging verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .evaluation import (
    MissingProposalsError,
    PlacementFailedError,
    bench,
    recall_curve,
    synth_scene,
    write_bench_csv,
    write_recall_csv,
)
from .geometry import DegenerateBoxError, GeometryMeta
from .pipeline import PipelineConfig, generate_proposals
from .refine import RefineConfig, RegressorSpec, recursive_refine
from .tensor_io import (
    AnnotationRecord,
    AnnotationSet,
    ProposalSet,
    TensorIOError,
    load_annotations,
    load_feature_stack,
    load_proposals,
    save_annotations,
    save_feature_stack,
    save_proposals,
)

logger = logging.getLogger(__name__)

_LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}

CONFIG_DEFAULTS: dict[str, object] = {
    # pipeline
    "level_count": 10,
    "alpha": 0.8,
    "beta": 1.5,
    "connectivity": 8,
    "local_search": True,
    "min_cluster_cells": 1,
    "dedup_exact": True,
    # refinement (off unless loops > 0)
    "loops": 0,
    "convergence_eps": 0.5,
    "regressor": "identity",
    "dx": 0.0,
    "dy": 0.0,
    "dw": 0.0,
    "dh": 0.0,
    # I/O and run parameters
    "features": None,
    "out": None,
    "proposals": None,
    "annotations": None,
    "iou_grid": "0.5:1.0:0.05",
    "top_k": None,
    "repeats": 5,
    "jobs": 1,
    # synthetic corpus parameters
    "count": 1,
    "seed": 0,
    "image_w": 256,
    "image_h": 256,
    "stride_x": 8.0,
    "stride_y": 8.0,
    "offset_x": 0.0,
    "offset_y": 0.0,
    "objects": 2,
    "noise_sigma": 0.0,
}


def _load_config_file(path: str) -> dict[str, object]:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValueError(f"config file {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ValueError(f"config file {path}: expected a JSON object")
    unknown = sorted(set(raw) - set(CONFIG_DEFAULTS))
    if unknown:
        raise ValueError(f"config file {path}: unknown keys: {', '.join(unknown)}")
    return raw


def _effective_config(args: argparse.Namespace) -> dict[str, object]:
    merged = dict(CONFIG_DEFAULTS)
    if getattr(args, "config", None):
        merged.update(_load_config_file(args.config))
    for key in CONFIG_DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    return merged


def _pipeline_config(cfg: dict[str, object]) -> PipelineConfig:
    return PipelineConfig(
        level_count=int(cfg["level_count"]),
        alpha=float(cfg["alpha"]),
        beta=float(cfg["beta"]),
        connectivity=int(cfg["connectivity"]),
        local_search_enabled=bool(cfg["local_search"]),
        min_cluster_cells=int(cfg["min_cluster_cells"]),
        dedup_exact=bool(cfg["dedup_exact"]),
    )


def _regressor_spec(cfg: dict[str, object]) -> RegressorSpec:
    return RegressorSpec(
        kind=str(cfg["regressor"]),
        dx=float(cfg["dx"]),
        dy=float(cfg["dy"]),
        dw=float(cfg["dw"]),
        dh=float(cfg["dh"]),
    )


def _dump_config(cfg: dict[str, object], path: str) -> None:
    Path(path).write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")


def _feature_paths(spec: str) -> list[Path]:
    """A single RFM1 file, a directory of them, or a comma-separated list."""
    p = Path(spec)
    if p.is_dir():
        paths = sorted(p.glob("*.rfm"))
        if not paths:
            raise ValueError(f"no .rfm files in directory {p}")
        return paths
    if "," in spec:
        return [Path(part) for part in spec.split(",") if part]
    return [p]


def _parse_iou_grid(grid: str) -> list[float]:
    try:
        lo, hi, step = (float(part) for part in grid.split(":"))
    except ValueError as exc:
        raise ValueError(f"bad --iou-grid {grid!r}, expected lo:hi:step") from exc
    if not (0 <= lo <= hi <= 1) or step <= 0:
        raise ValueError(f"bad --iou-grid {grid!r}: need 0 <= lo <= hi <= 1 and step > 0")
    values = []
    k = 0
    while True:
        v = round(lo + k * step, 10)
        if v > hi + 1e-9:
            break
        values.append(min(v, 1.0))
        k += 1
    return values


def cmd_generate(args: argparse.Namespace) -> int:
    cfg = _effective_config(args)
    if args.dump_config:
        _dump_config(cfg, args.dump_config)
    if not cfg["features"]:
        raise ValueError("--features is required")
    if not cfg["out"]:
        raise ValueError("--out is required")
    pipe_cfg = _pipeline_config(cfg)
    loops = int(cfg["loops"])
    spec = _regressor_spec(cfg)
    refine_cfg = RefineConfig(loops=loops, convergence_eps=float(cfg["convergence_eps"]))

    def process(path: Path) -> ProposalSet:
        stack = load_feature_stack(path)
        ps = generate_proposals(stack, pipe_cfg, image_id=path.stem)
        if loops > 0:
            refined = recursive_refine(spec, ps.boxes, refine_cfg, stack.geometry)
            ps = ProposalSet(ps.image_id, tuple(refined), ps.gen_time_ns)
        return ps

    paths = _feature_paths(str(cfg["features"]))
    jobs = max(1, int(cfg["jobs"]))
    if jobs == 1 or len(paths) == 1:
        results = [process(p) for p in paths]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(process, paths))

    save_proposals(results, str(cfg["out"]))
    total_boxes = sum(len(ps.boxes) for ps in results)
    total_ms = sum(ps.gen_time_ns for ps in results) / 1e6
    print(f"boxes={total_boxes} time_ms={total_ms:.3f}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _effective_config(args)
    if args.dump_config:
        _dump_config(cfg, args.dump_config)
    if not cfg["proposals"] or not cfg["annotations"]:
        raise ValueError("--proposals and --annotations are required")
    if not cfg["out"]:
        raise ValueError("--out is required")
    corpus = load_annotations(str(cfg["annotations"]))
    proposals = load_proposals(str(cfg["proposals"]))
    top_k = cfg["top_k"]
    top_k = int(top_k) if top_k is not None else None
    thresholds = _parse_iou_grid(str(cfg["iou_grid"]))
    curve = recall_curve(corpus, proposals, thresholds, top_k=top_k)
    write_recall_csv(curve, str(cfg["out"]))
    headline = recall_curve(corpus, proposals, [0.5, 0.7], top_k=top_k)
    print(f"recall@0.5={headline.recall[0]:.4f} recall@0.7={headline.recall[1]:.4f}")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = _effective_config(args)
    if args.dump_config:
        _dump_config(cfg, args.dump_config)
    if not cfg["features"]:
        raise ValueError("--features is required")
    if not cfg["out"]:
        raise ValueError("--out is required")
    stacks = [load_feature_stack(p) for p in _feature_paths(str(cfg["features"]))]
    report = bench(stacks, _pipeline_config(cfg), int(cfg["repeats"]))
    write_bench_csv(report, str(cfg["out"]))
    print(
        f"images={report.images} mean_proposals={report.mean_proposals:.2f} "
        f"mean_time_ms={report.mean_time_ns / 1e6:.3f}"
    )
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = _effective_config(args)
    if args.dump_config:
        _dump_config(cfg, args.dump_config)
    if not cfg["out"]:
        raise ValueError("--out is required")
    out_dir = Path(str(cfg["out"]))
    out_dir.mkdir(parents=True, exist_ok=True)
    image_w, image_h = int(cfg["image_w"]), int(cfg["image_h"])
    geom = GeometryMeta(
        stride_x=float(cfg["stride_x"]),
        stride_y=float(cfg["stride_y"]),
        offset_x=float(cfg["offset_x"]),
        offset_y=float(cfg["offset_y"]),
        image_w=image_w,
        image_h=image_h,
    )
    count = int(cfg["count"])
    seed = int(cfg["seed"])
    records = []
    for i in range(count):
        scene = synth_scene(
            image_w,
            image_h,
            geom,
            n_objects=int(cfg["objects"]),
            noise_sigma=float(cfg["noise_sigma"]),
            seed=seed + i,
        )
        image_id = f"img_{i:04d}"
        save_feature_stack(scene.stack, out_dir / f"{image_id}.rfm")
        records.append(AnnotationRecord(image_id, scene.gt_boxes))
    save_annotations(AnnotationSet(tuple(records)), out_dir / "annotations.jsonl")
    print(f"wrote {count} stacks and annotations.jsonl to {out_dir}")
    return 0


def _add_config_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON config file; flags override its values")
    sub.add_argument("--dump-config", help="write the effective config as JSON")


def _add_pipeline_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--level-count", dest="level_count", type=int)
    sub.add_argument("--alpha", type=float)
    sub.add_argument("--beta", type=float)
    sub.add_argument("--connectivity", type=int, choices=(4, 8))
    sub.add_argument(
        "--no-local-search", dest="local_search", action="store_const", const=False
    )
    sub.add_argument("--min-cluster-cells", dest="min_cluster_cells", type=int)
    sub.add_argument("--no-dedup", dest="dedup_exact", action="store_const", const=False)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relief",
        description="Generate and evaluate region proposals from feature-map stacks.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    gen = subs.add_parser("generate", help="proposals from an RFM1 feature stack")
    _add_config_flags(gen)
    _add_pipeline_flags(gen)
    gen.add_argument("--features", help="RFM1 file, directory, or comma-separated list")
    gen.add_argument("--out", help="output proposals JSONL")
    gen.add_argument("--loops", type=int, help="refinement loops (0 disables)")
    gen.add_argument("--convergence-eps", dest="convergence_eps", type=float)
    gen.add_argument("--regressor", choices=("identity", "affine"))
    gen.add_argument("--dx", type=float)
    gen.add_argument("--dy", type=float)
    gen.add_argument("--dw", type=float)
    gen.add_argument("--dh", type=float)
    gen.add_argument("--jobs", type=int, help="parallel workers across images")
    gen.set_defaults(func=cmd_generate)

    ev = subs.add_parser("eval", help="recall-to-IoU curve for saved proposals")
    _add_config_flags(ev)
    ev.add_argument("--proposals", help="proposals JSONL")
    ev.add_argument("--annotations", help="ground-truth JSONL")
    ev.add_argument("--out", help="output curve CSV")
    ev.add_argument("--iou-grid", dest="iou_grid", help="lo:hi:step, default 0.5:1.0:0.05")
    ev.add_argument("--top-k", dest="top_k", type=int, help="cap proposals per image")
    ev.set_defaults(func=cmd_eval)

    be = subs.add_parser("bench", help="generation throughput over a corpus")
    _add_config_flags(be)
    _add_pipeline_flags(be)
    be.add_argument("--features", help="RFM1 file, directory, or comma-separated list")
    be.add_argument("--out", help="output report CSV")
    be.add_argument("--repeats", type=int, help="timed repeats per image")
    be.set_defaults(func=cmd_bench)

    sy = subs.add_parser("synth", help="write a synthetic feature-stack corpus")
    _add_config_flags(sy)
    sy.add_argument("--out", help="output directory")
    sy.add_argument("--count", type=int, help="number of images")
    sy.add_argument("--seed", type=int)
    sy.add_argument("--image-w", dest="image_w", type=int)
    sy.add_argument("--image-h", dest="image_h", type=int)
    sy.add_argument("--stride-x", dest="stride_x", type=float)
    sy.add_argument("--stride-y", dest="stride_y", type=float)
    sy.add_argument("--offset-x", dest="offset_x", type=float)
    sy.add_argument("--offset-y", dest="offset_y", type=float)
    sy.add_argument("--objects", type=int, help="blobs per image")
    sy.add_argument("--noise-sigma", dest="noise_sigma", type=float)
    sy.set_defaults(func=cmd_synth)

    return parser


def _setup_logging() -> None:
    name = os.environ.get("RELIEF_LOG", "error").lower()
    logging.basicConfig(
        stream=sys.stderr,
        level=_LOG_LEVELS.get(name, logging.ERROR),
        format="%(levelname)s %(name)s: %(message)s",
    )


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (
        TensorIOError,
        MissingProposalsError,
        PlacementFailedError,
        DegenerateBoxError,
        OSError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
