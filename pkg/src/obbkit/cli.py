"""``obbkit`` command-line entry point.

Subcommands: ``angle-check``, ``refine-sim``, ``mosaic``, ``eval`` and
``bench``. Every report starts with a config echo so result files are
self-describing; with a fixed ``--seed`` the non-timing reports are
byte-identical across runs.
"""

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .augment import AnnotatedImage, MosaicSpec, draw_rotations, mosaic, read_pnm, write_pnm
from .bench import DEFAULT_RUNS, DEFAULT_WARMUP, KERNELS, run_benchmark
from .checks import run_angle_checks
from .evalio import average_precision, parse_detections, parse_dota, parse_submission, serialize_dota
from .exceptions import ConfigError, ParseError
from .refinement import (
    ACTIVATIONS,
    DECAYS,
    RefineSchedule,
    RefinementTrace,
    seam_crossing_instances,
    simulate_arrays,
    summarize,
)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


def resolve_workers(flag_value):
    env = os.environ.get("OBBKIT_WORKERS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise UsageError(f"OBBKIT_WORKERS must be an integer, got {env!r}") from None
    else:
        value = flag_value
    if value < 1:
        raise UsageError("worker count must be >= 1")
    return value


def _pool_map(fn, items, workers):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---- report rendering ------------------------------------------------------


def render(config, columns, rows, fmt, extra=None):
    """CSV (``#``-prefixed config block, then a table) or JSON."""
    if fmt == "json":
        doc = {"config": config, "rows": [dict(zip(columns, r)) for r in rows]}
        if extra:
            doc.update(extra)
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"
    buf = io.StringIO()
    for key, value in config.items():
        buf.write(f"# {key}={value}\n")
    for key, value in (extra or {}).items():
        buf.write(f"# {key}={json.dumps(value, sort_keys=False)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    return buf.getvalue()


def emit(text, out_path):
    if out_path:
        Path(out_path).write_text(text)
    else:
        sys.stdout.write(text)


# ---- commands --------------------------------------------------------------


def cmd_angle_check(args):
    if args.samples < 1:
        raise UsageError("--samples must be >= 1")
    results = run_angle_checks(args.samples, args.seed)
    rows = [[r.name, r.checked, r.passed, f"{r.max_deviation:.3e}", f"{r.tolerance:.0e}"] for r in results]
    config = {"command": "angle-check", "samples": args.samples, "seed": args.seed}
    emit(render(config, ["check", "checked", "passed", "max_deviation", "tolerance"], rows, args.format), args.out)
    failed = [r for r in results if not r.ok]
    for r in failed:
        print(f"FAILED {r.witness}", file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


def refine_rows(n_instances, schedule, step, max_error_deg, seed, workers=1, chunk=256):
    """Simulate seeded seam-crossing instances; chunks run on the worker pool."""
    init, targets = seam_crossing_instances(n_instances, np.radians(max_error_deg), seed)
    if max_error_deg == 0:
        init = targets.copy()
    bounds = [(i, min(i + chunk, n_instances)) for i in range(0, n_instances, chunk)]
    parts = _pool_map(lambda b: simulate_arrays(init[b[0]:b[1]], targets[b[0]:b[1]], schedule, step), bounds, workers)
    trace = RefinementTrace(*(np.concatenate([getattr(p, f) for p in parts], axis=1) for f in RefinementTrace._fields))
    return summarize(trace)


def delta_violation(rows):
    """First row breaking strict decrease of avg delta over layers >= 1, or None.

    A column that is zero throughout (nothing moved) is not a violation.
    """
    deltas = [r.avg_delta_deg for r in rows[1:]]
    if not any(deltas):
        return None
    for prev, cur in zip(rows[1:], rows[2:]):
        if not cur.avg_delta_deg < prev.avg_delta_deg:
            return cur
    return None


def cmd_refine_sim(args):
    if args.layers < 2:
        raise UsageError("--layers must be >= 2")
    if args.n_instances < 1:
        raise UsageError("--n-instances must be >= 1")
    schedule = RefineSchedule(args.alpha0, args.layers, args.decay, args.activation)
    rows = refine_rows(args.n_instances, schedule, args.step, args.max_init_error_deg, args.seed, args.workers)
    config = {
        "command": "refine-sim",
        "seed": args.seed,
        "n_instances": args.n_instances,
        "layers": args.layers,
        "alpha0": args.alpha0,
        "decay": args.decay,
        "activation": args.activation,
        "step": args.step,
        "max_init_error_deg": args.max_init_error_deg,
    }
    table = [[r.layer, f"{r.avg_error_deg:.6f}", f"{r.avg_delta_deg:.6f}"] for r in rows]
    emit(render(config, ["layer", "avg_error_deg", "avg_delta_deg"], table, args.format), args.out)
    if args.decay == "exponential":
        bad = delta_violation(rows)
        if bad is not None:
            print(f"FAILED avg_delta not strictly decreasing at row {tuple(bad)}", file=sys.stderr)
            return EXIT_FAIL
    return EXIT_OK


def _parse_rotations(text):
    try:
        rots = tuple(int(v) for v in text.split(","))
        return MosaicSpec(rots, 1).quadrant_rotations
    except (ValueError, ConfigError):
        raise UsageError(f"--rotations expects 4 comma-separated values from 0,90,180,270, got {text!r}") from None


def _load_image(ann_path, raster, image_size):
    records = parse_dota(ann_path.read_text(), source=str(ann_path))
    if raster:
        for ext in (".ppm", ".pgm"):
            img_path = ann_path.with_suffix(ext)
            if img_path.exists():
                return AnnotatedImage(records, read_pnm(img_path))
        raise UsageError(f"no .ppm/.pgm raster next to {ann_path}")
    w, h = image_size
    return AnnotatedImage(records, width=w, height=h)


def cmd_mosaic(args):
    in_dir, out_dir = Path(args.input_dir), Path(args.output_dir)
    files = sorted(in_dir.glob("*.txt"))
    if not files:
        raise UsageError(f"no DOTA annotation files in {in_dir}")
    S = args.patch_size
    image_size = tuple(int(v) for v in args.image_size.split(",")) if args.image_size else (S, S)
    if len(image_size) != 2:
        raise UsageError("--image-size expects W,H")
    forced = _parse_rotations(args.rotations) if args.rotations else None

    groups = [files[i:i + 4] for i in range(0, len(files), 4)]
    last = groups[-1]
    groups[-1] = [last[k % len(last)] for k in range(4)]
    rng = np.random.default_rng(args.seed)
    specs = [MosaicSpec(forced or draw_rotations(rng), S, args.seed) for _ in groups]

    out_dir.mkdir(parents=True, exist_ok=True)

    def build(job):
        idx, group, spec = job
        images = [_load_image(p, args.raster, image_size) for p in group]
        result = mosaic(images, spec, args.min_area_fraction)
        stem = f"mosaic_{idx:04d}"
        (out_dir / f"{stem}.txt").write_text(serialize_dota(result.annotations))
        if result.raster is not None:
            ext = ".pgm" if result.raster.ndim == 2 else ".ppm"
            write_pnm(out_dir / f"{stem}{ext}", result.raster)
        return {
            "mosaic": stem,
            "sources": [p.name for p in group],
            "rotations": list(spec.quadrant_rotations),
            "annotations": len(result.annotations),
        }

    entries = _pool_map(build, [(i, g, s) for i, (g, s) in enumerate(zip(groups, specs))], args.workers)
    manifest = {
        "config": {
            "command": "mosaic",
            "seed": args.seed,
            "patch_size": S,
            "raster": bool(args.raster),
            "forced_rotations": list(forced) if forced else None,
            "min_area_fraction": args.min_area_fraction,
        },
        "mosaics": entries,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    total = sum(e["annotations"] for e in entries)
    print(f"wrote {len(entries)} mosaics, {total} annotations to {out_dir}", file=sys.stderr)
    return EXIT_OK


def load_predictions(pred_path):
    """Detections keyed by image id.

    A directory of ``Task1_<category>.txt`` files is read as per-category
    submissions; otherwise each ``<image>.txt`` holds merged detections.
    """
    pred_path = Path(pred_path)
    if pred_path.is_file():
        return {pred_path.stem: parse_detections(pred_path.read_text(), str(pred_path))}
    files = sorted(pred_path.glob("*.txt"))
    task_files = [f for f in files if f.stem.startswith("Task1_")]
    preds = {}
    if task_files:
        for f in task_files:
            category = f.stem[len("Task1_"):]
            for image_id, dets in parse_submission(f.read_text(), category, str(f)).items():
                preds.setdefault(image_id, []).extend(dets)
        return preds
    for f in files:
        preds[f.stem] = parse_detections(f.read_text(), str(f))
    return preds


def cmd_eval(args):
    gt_dir = Path(args.gt_path)
    gt_files = sorted(gt_dir.glob("*.txt")) if gt_dir.is_dir() else []
    if not gt_files:
        raise UsageError(f"no ground-truth annotation files in {gt_dir}")
    workers = args.workers
    gts = dict(zip((f.stem for f in gt_files), _pool_map(lambda f: parse_dota(f.read_text(), str(f)), gt_files, workers)))
    preds = load_predictions(args.pred_path) if Path(args.pred_path).exists() else {}

    thresholds = args.iou_threshold
    results = [average_precision(preds, gts, thr, args.difficult_policy) for thr in thresholds]
    categories = sorted(set().union(*(r.per_category for r in results)))
    columns = ["category"] + [f"AP{round(t * 100)}" for t in thresholds]
    rows = [[c] + [f"{r.per_category.get(c, 0.0):.6f}" for r in results] for c in categories]
    rows.append(["mAP"] + [f"{r.mean:.6f}" for r in results])
    config = {
        "command": "eval",
        "pred_path": str(args.pred_path),
        "gt_path": str(args.gt_path),
        "iou_thresholds": ",".join(str(t) for t in thresholds),
        "difficult_policy": args.difficult_policy,
        "images": len(gts),
    }
    emit(render(config, columns, rows, args.format), args.out)
    return EXIT_OK


def cmd_bench(args):
    if args.runs < 1:
        raise UsageError("--runs must be >= 1")
    r = run_benchmark(args.kernel, args.n, args.warmup, args.runs, args.seed)
    config = {"command": "bench", "kernel": r.kernel, "n": r.n, "warmup": r.warmup, "runs": r.runs, "seed": args.seed}
    row = [r.kernel, r.n, r.runs, f"{r.elapsed_ms:.4f}", f"{r.latency_ms:.6f}", f"{r.fps:.2f}", r.checksum]
    emit(render(config, ["kernel", "n", "runs", "elapsed_ms", "latency_ms", "fps", "checksum"], [row], args.format), args.out)
    return EXIT_OK


# ---- parser ----------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None, help="report path (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--workers", type=int, default=1, help="worker pool size (OBBKIT_WORKERS overrides)")

    parser = argparse.ArgumentParser(prog="obbkit", description="Oriented-box geometry, refinement and evaluation tools")
    parser.add_argument("--version", action="version", version=f"obbkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("angle-check", parents=[common], help="run the periodic-angle property suite")
    p.add_argument("--samples", type=int, default=10000)
    p.set_defaults(func=cmd_angle_check)

    p = sub.add_parser("refine-sim", parents=[common], help="layer-wise angular refinement simulation")
    p.add_argument("--n-instances", type=int, default=1000)
    p.add_argument("--layers", type=int, default=4)
    p.add_argument("--alpha0", type=float, default=1.5)
    p.add_argument("--decay", choices=DECAYS, default="exponential")
    p.add_argument("--activation", choices=ACTIVATIONS, default="tanh")
    p.add_argument("--step", type=float, default=0.01, help="gradient step fed to the activation")
    p.add_argument("--max-init-error-deg", type=float, default=10.0, help="0 starts every instance on its target")
    p.set_defaults(func=cmd_refine_sim)

    p = sub.add_parser("mosaic", parents=[common], help="build oriented 2x2 mosaics from DOTA files")
    p.add_argument("--input-dir", required=True)
    p.add_argument("--output-dir", required=True)
    p.add_argument("--patch-size", type=int, default=1024)
    p.add_argument("--raster", action="store_true", help="also transform .ppm/.pgm images next to each file")
    p.add_argument("--rotations", default=None, help="force a rotation tuple, e.g. 0,90,180,270")
    p.add_argument("--image-size", default=None, help="W,H of annotation-only inputs (default: patch size)")
    p.add_argument("--min-area-fraction", type=float, default=0.25)
    p.set_defaults(func=cmd_mosaic)

    p = sub.add_parser("eval", parents=[common], help="rotated AP of predictions against DOTA ground truth")
    p.add_argument("--pred-path", required=True)
    p.add_argument("--gt-path", required=True)
    p.add_argument("--iou-threshold", type=float, nargs="+", default=[0.5])
    p.add_argument("--difficult-policy", choices=("ignore", "count"), default="ignore")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", parents=[common], help="latency microbenchmark of a CPU kernel")
    p.add_argument("--kernel", choices=KERNELS, required=True)
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--warmup", type=int, default=DEFAULT_WARMUP)
    p.add_argument("--runs", type=int, default=DEFAULT_RUNS)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.workers = resolve_workers(args.workers)
        return args.func(args)
    except UsageError as exc:
        print(f"obbkit {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, ConfigError) as exc:
        print(f"obbkit {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
