"""Oriented Dense O2O: four-image mosaics with per-quadrant quarter-turn rotations.

Rotations are counter-clockwise in the image coordinate plane (x right,
y down), i.e. a quarter turn maps ``(x, y) -> (S - y, x)`` inside an
``S x S`` patch. On screen that reads as a clockwise turn. Pixel buffers are
rotated by exact index permutation, so no resampling is involved.
"""

import re
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from sklearn.base import BaseEstimator

from .evalio import AnnotationRecord
from .exceptions import ConfigError, ParseError
from .obb_core import Obb5, wrap_pi
from .polygon import intersection_area, points_in_convex, signed_area
from .validation import check_positive_int, check_random_state

ROTATIONS = (0, 90, 180, 270)


@dataclass(frozen=True)
class MosaicSpec:
    quadrant_rotations: Tuple[int, int, int, int]
    patch_size: int
    seed: Optional[int] = None

    def __post_init__(self):
        rots = tuple(int(r) for r in self.quadrant_rotations)
        if len(rots) != 4 or any(r not in ROTATIONS for r in rots):
            raise ConfigError(f"need 4 rotations from {ROTATIONS}, got {self.quadrant_rotations!r}")
        object.__setattr__(self, "quadrant_rotations", rots)
        check_positive_int(self.patch_size, "patch_size")

    @classmethod
    def random(cls, patch_size, seed=None):
        return cls(draw_rotations(seed), patch_size, seed if isinstance(seed, int) else None)


@dataclass
class AnnotatedImage:
    """Annotations plus an optional ``(H, W)`` or ``(H, W, C)`` pixel buffer.

    Without a raster, ``width`` and ``height`` must be given.
    """

    annotations: List[AnnotationRecord] = field(default_factory=list)
    raster: Optional[np.ndarray] = None
    width: Optional[int] = None
    height: Optional[int] = None

    def __post_init__(self):
        if self.raster is not None:
            self.raster = np.asarray(self.raster)
            self.height, self.width = self.raster.shape[:2]
        if self.width is None or self.height is None:
            raise ConfigError("annotation-only images need width and height")
        for a in self.annotations:
            p = a.points
            if p.min() < 0 or np.any(p[:, 0] > self.width) or np.any(p[:, 1] > self.height):
                raise ConfigError(f"annotation corners outside the {self.width}x{self.height} frame")


def draw_rotations(seed=None) -> Tuple[int, int, int, int]:
    """Four independent uniform draws from {0, 90, 180, 270}."""
    rng = check_random_state(seed)
    return tuple(int(r) * 90 for r in rng.integers(0, 4, size=4))


def _rotate_points(p, rot, size):
    x, y = p[:, 0], p[:, 1]
    k = (rot // 90) % 4
    # each case written out so repeated quarter turns stay exact on dyadic coordinates
    if k == 0:
        out = (x, y)
    elif k == 1:
        out = (size - y, x)
    elif k == 2:
        out = (size - x, size - y)
    else:
        out = (y, size - x)
    return np.column_stack(out)


def _check_rot(rot):
    if rot not in ROTATIONS:
        raise ConfigError(f"rotation must be one of {ROTATIONS}, got {rot!r}")


def rotate_annotation(a: AnnotationRecord, rot: int, size, height=None) -> AnnotationRecord:
    """Rotate corners about the centre of an ``size x size`` frame.

    The box angle moves by ``rot`` degrees (``theta -> wrap_pi(theta + rot)``);
    category and difficulty are unchanged.
    """
    _check_rot(rot)
    if height is not None and height != size:
        raise ConfigError("quarter turns need a square frame")
    return AnnotationRecord(_rotate_points(a.points, rot, size), a.category, a.difficulty)


def rotate_obb(b: Obb5, rot: int, size) -> Obb5:
    """Box-level counterpart of ``rotate_annotation``."""
    _check_rot(rot)
    c = _rotate_points(np.array([[b.cx, b.cy]]), rot, size)[0]
    return Obb5(c[0], c[1], b.w, b.h, wrap_pi(b.theta + np.radians(rot)))


def rotate_raster(raster, rot):
    """Quarter-turn a pixel buffer consistently with ``rotate_annotation``."""
    _check_rot(rot)
    return np.rot90(raster, k=-(rot // 90), axes=(0, 1)).copy()


def fit_to_patch(img: AnnotatedImage, size: int, min_area_fraction=0.25) -> AnnotatedImage:
    """Centre-crop / zero-pad to ``size x size``.

    Boxes whose centre leaves the patch are dropped; boxes cut by the border
    are kept when at least ``min_area_fraction`` of their area remains,
    with corners clamped into the patch.
    """
    dx = (size - img.width) // 2
    dy = (size - img.height) // 2
    raster = None
    if img.raster is not None:
        src = img.raster
        raster = np.zeros((size, size) + src.shape[2:], dtype=src.dtype)
        ys, xs = max(0, -dy), max(0, -dx)
        yd, xd = max(0, dy), max(0, dx)
        h = min(src.shape[0] - ys, size - yd)
        w = min(src.shape[1] - xs, size - xd)
        if h > 0 and w > 0:
            raster[yd:yd + h, xd:xd + w] = src[ys:ys + h, xs:xs + w]
    frame = np.array([[0, 0], [size, 0], [size, size], [0, size]], dtype=float)
    kept = []
    for a in img.annotations:
        p = a.points + np.array([dx, dy], dtype=float)
        if (dx, dy) == (0, 0) and img.width == size and img.height == size:
            kept.append(a)
            continue
        centre = p.mean(axis=0)
        if not points_in_convex(centre[None], frame)[0]:
            continue
        inside = (p >= 0).all() and (p <= size).all()
        if not inside:
            area = abs(signed_area(p))
            if area <= 0 or intersection_area(p, frame) / area < min_area_fraction:
                continue
            p = np.clip(p, 0, size)
        kept.append(AnnotationRecord(p, a.category, a.difficulty))
    return AnnotatedImage(kept, raster, size, size)


def mosaic(images: Sequence[AnnotatedImage], spec: MosaicSpec, min_area_fraction=0.25) -> AnnotatedImage:
    """Stitch four images into a ``2S x 2S`` grid, rotating quadrant ``q`` first.

    Quadrant ``q`` lands at offset ``((q % 2) * S, (q // 2) * S)``.
    """
    if len(images) != 4:
        raise ConfigError(f"mosaic needs exactly 4 images, got {len(images)}")
    S = spec.patch_size
    patches = [fit_to_patch(im, S, min_area_fraction) for im in images]
    with_raster = all(p.raster is not None for p in patches)
    canvas = None
    if with_raster:
        first = patches[0].raster
        canvas = np.zeros((2 * S, 2 * S) + first.shape[2:], dtype=first.dtype)
    out = []
    for q, (patch, rot) in enumerate(zip(patches, spec.quadrant_rotations)):
        ox, oy = (q % 2) * S, (q // 2) * S
        for a in patch.annotations:
            r = rotate_annotation(a, rot, S)
            out.append(AnnotationRecord(r.points + np.array([ox, oy], dtype=float), r.category, r.difficulty))
        if with_raster:
            canvas[oy:oy + S, ox:ox + S] = rotate_raster(patch.raster, rot)
    return AnnotatedImage(out, canvas, 2 * S, 2 * S)


def rasterize_quad(shape, quad, value=255, dtype=np.uint8):
    """Fill pixels whose centres fall inside ``quad``; returns a new ``shape`` buffer."""
    h, w = shape[:2]
    ys, xs = np.mgrid[0:h, 0:w]
    centres = np.column_stack([xs.ravel() + 0.5, ys.ravel() + 0.5])
    inside = points_in_convex(centres, np.asarray(quad, float)).reshape(h, w)
    out = np.zeros(shape, dtype=dtype)
    out[inside] = value
    return out


def raster_centroid(raster):
    """Mean pixel-centre position of non-zero pixels, as ``(x, y)``."""
    mask = np.asarray(raster)
    if mask.ndim == 3:
        mask = mask.any(axis=2)
    ys, xs = np.nonzero(mask)
    return np.array([xs.mean() + 0.5, ys.mean() + 0.5])


class OrientedMosaic(BaseEstimator):
    """Estimator-style wrapper: ``transform`` takes groups of four images.

    ``rotations`` forces a fixed 4-tuple; otherwise rotations are drawn
    from a generator seeded with ``seed`` at the start of every call, so a
    given seed always yields the same sequence. The drawn tuples are kept
    in ``rotations_``.
    """

    def __init__(self, patch_size=1024, seed=None, rotations=None, min_area_fraction=0.25):
        self.patch_size = patch_size
        self.seed = seed
        self.rotations = rotations
        self.min_area_fraction = min_area_fraction

    def fit(self, X=None, y=None):
        return self

    def transform(self, groups):
        rng = np.random.default_rng(self.seed)
        self.rotations_ = []
        out = []
        for group in groups:
            rots = tuple(self.rotations) if self.rotations is not None else draw_rotations(rng)
            spec = MosaicSpec(rots, self.patch_size, self.seed)
            self.rotations_.append(spec.quadrant_rotations)
            out.append(mosaic(group, spec, self.min_area_fraction))
        return out


# ---- PGM / PPM -------------------------------------------------------------

_PNM_HEADER = re.compile(rb"^(P[56])\s+(?:#.*\s+)*(\d+)\s+(?:#.*\s+)*(\d+)\s+(?:#.*\s+)*(\d+)\s", re.M)


def read_pnm(path):
    """Read a binary PGM (P5) or PPM (P6) with maxval <= 255."""
    with open(path, "rb") as fh:
        data = fh.read()
    m = _PNM_HEADER.match(data)
    if not m:
        raise ParseError("not a binary PGM/PPM file", source=str(path))
    magic, w, h, maxval = m.group(1), int(m.group(2)), int(m.group(3)), int(m.group(4))
    if maxval > 255:
        raise ParseError("only 8-bit PNM files are supported", source=str(path))
    channels = 1 if magic == b"P5" else 3
    pixels = np.frombuffer(data, dtype=np.uint8, count=w * h * channels, offset=m.end())
    shape = (h, w) if channels == 1 else (h, w, 3)
    return pixels.reshape(shape).copy()


def write_pnm(path, raster):
    raster = np.asarray(raster, dtype=np.uint8)
    if raster.ndim == 2:
        magic = b"P5"
    elif raster.ndim == 3 and raster.shape[2] == 3:
        magic = b"P6"
    else:
        raise ConfigError("PNM output needs an (H, W) or (H, W, 3) uint8 buffer")
    h, w = raster.shape[:2]
    with open(path, "wb") as fh:
        fh.write(magic + b"\n%d %d\n255\n" % (w, h))
        fh.write(np.ascontiguousarray(raster).tobytes())
