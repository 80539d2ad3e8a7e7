"""Latency microbenchmarks for the CPU kernels.

Protocol: ``warmup`` untimed calls, then ``runs`` back-to-back timed calls
under one monotonic clock reading pair. ``latency = elapsed / runs`` and
``fps = 1000 / latency`` (latency in ms).
"""

import hashlib
import time
from typing import Callable, NamedTuple

import numpy as np

from .exceptions import ConfigError
from .validation import check_positive_int

KERNELS = ("iou", "hausdorff", "hungarian", "mosaic", "sp_l1")
DEFAULT_WARMUP = 50
DEFAULT_RUNS = 1000


class BenchResult(NamedTuple):
    kernel: str
    n: int
    warmup: int
    runs: int
    elapsed_ms: float
    latency_ms: float
    fps: float
    checksum: str


def latency_ms(elapsed_ms: float, runs: int) -> float:
    return elapsed_ms / runs


def fps(latency: float) -> float:
    return 1000.0 / latency if latency > 0 else float("inf")


def _digest(value) -> str:
    h = hashlib.sha256()
    if isinstance(value, np.ndarray):
        h.update(np.ascontiguousarray(value).tobytes())
    else:
        h.update(repr(value).encode())
    return h.hexdigest()[:16]


def time_kernel(fn: Callable[[], object], warmup=DEFAULT_WARMUP, runs=DEFAULT_RUNS, clock=time.perf_counter):
    """Return ``(elapsed_ms, last_output)`` for ``runs`` timed calls after ``warmup`` calls."""
    if warmup < 0:
        raise ConfigError("warmup must be >= 0")
    check_positive_int(runs, "runs")
    for _ in range(warmup):
        fn()
    out = None
    start = clock()
    for _ in range(runs):
        out = fn()
    elapsed = (clock() - start) * 1000.0
    return elapsed, out


def make_kernel(name: str, n: int, seed=0) -> Callable[[], object]:
    """Build a zero-argument kernel over fixed seeded inputs of size ``n``."""
    if name not in KERNELS:
        raise ConfigError(f"unknown kernel {name!r}; choose from {KERNELS}")
    check_positive_int(n, "n")
    rng = np.random.default_rng(seed)
    if name == "sp_l1":
        from .losses import sp_l1

        a = rng.uniform(0, np.pi, n)
        b = rng.uniform(0, np.pi, n)
        return lambda: sp_l1(a, b)

    from .obb_core import obb_to_quad

    boxes = np.column_stack(
        [rng.uniform(0, 100, (n, 2)), rng.uniform(5, 40, (n, 2)), rng.uniform(0, np.pi, n)]
    )
    quads = obb_to_quad(boxes)
    if name == "iou":
        from .evalio import rotated_iou

        shifted = quads + rng.normal(0, 3, (n, 1, 2))
        return lambda: np.array([rotated_iou(a, b) for a, b in zip(quads, shifted)])
    if name == "hausdorff":
        from .matching import hausdorff_matrix

        return lambda: hausdorff_matrix(quads, quads[::-1], edge_samples=8)
    if name == "hungarian":
        from .matching import hungarian

        cost = rng.random((n, n))
        return lambda: hungarian(cost)
    from .augment import AnnotatedImage, MosaicSpec, mosaic
    from .evalio import AnnotationRecord

    size = 256
    small = np.column_stack(
        [rng.uniform(40, 216, (n, 2)), rng.uniform(5, 30, (n, 2)), rng.uniform(0, np.pi, n)]
    )
    records = [AnnotationRecord(q, "obj", 0) for q in obb_to_quad(small)]
    images = [AnnotatedImage(records, width=size, height=size)] * 4
    spec = MosaicSpec((0, 90, 180, 270), size)
    return lambda: [a.quad for a in mosaic(images, spec).annotations]


def run_benchmark(name, n=64, warmup=DEFAULT_WARMUP, runs=DEFAULT_RUNS, seed=0, clock=time.perf_counter):
    fn = make_kernel(name, n, seed)
    elapsed, out = time_kernel(fn, warmup, runs, clock)
    lat = latency_ms(elapsed, runs)
    return BenchResult(name, n, warmup, runs, elapsed, lat, fps(lat), _digest(out))
