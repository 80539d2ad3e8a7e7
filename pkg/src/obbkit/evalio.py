"""DOTA-format I/O and rotated-box evaluation (IoU, NMS, AP).

Annotation lines are ``x1 y1 x2 y2 x3 y3 x4 y4 category difficulty``.
Detection lines are ``category score x1 ... y4`` (merged) or, in the
per-category submission layout, ``image_id score x1 ... y4``.
"""

import math
import warnings
from dataclasses import dataclass
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import ConfigError, DegenerateGeometryWarning, ParseError
from .polygon import intersection_area, signed_area

HEADER_PREFIXES = ("imagesource", "gsd")
DEGENERATE_AREA = 1e-12

Points = Tuple[Tuple[float, float], ...]


def _as_points(quad) -> Points:
    arr = np.asarray(quad, dtype=float).reshape(4, 2)
    return tuple((float(x), float(y)) for x, y in arr)


def _check_category(category):
    if not category or any(c.isspace() for c in category):
        raise ValueError(f"invalid category token {category!r}")


@dataclass(frozen=True)
class AnnotationRecord:
    quad: Points
    category: str
    difficulty: int = 0

    def __post_init__(self):
        object.__setattr__(self, "quad", _as_points(self.quad))
        _check_category(self.category)
        if self.difficulty not in (0, 1):
            raise ValueError(f"difficulty must be 0 or 1, got {self.difficulty!r}")

    @property
    def points(self):
        return np.array(self.quad)


@dataclass(frozen=True)
class Detection:
    quad: Points
    category: str
    score: float

    def __post_init__(self):
        object.__setattr__(self, "quad", _as_points(self.quad))
        _check_category(self.category)
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must lie in [0, 1], got {self.score!r}")

    @property
    def points(self):
        return np.array(self.quad)


# ---- text formats ----------------------------------------------------------


def format_coord(v: float) -> str:
    """Canonical coordinate text: at most one decimal, no trailing ``.0``."""
    r = round(float(v), 1)
    if r == 0:
        return "0"
    if r == int(r):
        return str(int(r))
    return f"{r:.1f}"


def _parse_coords(tokens, lineno, source):
    try:
        vals = [float(t) for t in tokens]
    except ValueError:
        raise ParseError(f"non-numeric coordinate in {' '.join(tokens)!r}", lineno, source) from None
    if not all(math.isfinite(v) for v in vals):
        raise ParseError("non-finite coordinate", lineno, source)
    return tuple(zip(vals[0::2], vals[1::2]))


def _is_header(line):
    return line.lower().startswith(HEADER_PREFIXES)


def parse_dota(text: str, source: Optional[str] = None) -> List[AnnotationRecord]:
    """Parse a DOTA annotation file. Header and blank lines are skipped."""
    records = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or _is_header(line):
            continue
        tokens = line.split()
        if len(tokens) != 10:
            raise ParseError(f"expected 10 tokens, got {len(tokens)}", lineno, source)
        quad = _parse_coords(tokens[:8], lineno, source)
        if tokens[9] not in ("0", "1"):
            raise ParseError(f"difficulty must be 0 or 1, got {tokens[9]!r}", lineno, source)
        records.append(AnnotationRecord(quad, tokens[8], int(tokens[9])))
    return records


def parse_dota_headers(text: str) -> Dict[str, str]:
    """``imagesource`` / ``gsd`` header values, keyed by lower-case name."""
    headers = {}
    for raw in text.splitlines():
        line = raw.strip()
        if _is_header(line) and ":" in line:
            key, _, value = line.partition(":")
            headers[key.strip().lower()] = value.strip()
    return headers


def serialize_dota(records: Sequence[AnnotationRecord], headers: Optional[Mapping[str, str]] = None) -> str:
    lines = [f"{k}:{v}" for k, v in (headers or {}).items()]
    for r in records:
        coords = " ".join(format_coord(c) for pt in r.quad for c in pt)
        lines.append(f"{coords} {r.category} {r.difficulty}")
    return "".join(line + "\n" for line in lines)


def _parse_scored(text, source):
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) != 10:
            raise ParseError(f"expected 10 tokens, got {len(tokens)}", lineno, source)
        try:
            score = float(tokens[1])
        except ValueError:
            raise ParseError(f"non-numeric score {tokens[1]!r}", lineno, source) from None
        if not 0.0 <= score <= 1.0:
            raise ParseError(f"score {score} outside [0, 1]", lineno, source)
        rows.append((tokens[0], score, _parse_coords(tokens[2:], lineno, source)))
    return rows


def parse_detections(text: str, source: Optional[str] = None) -> List[Detection]:
    """Merged detection file: ``category score x1 y1 ... x4 y4`` per line."""
    return [Detection(q, cat, s) for cat, s, q in _parse_scored(text, source)]


def parse_submission(text: str, category: str, source: Optional[str] = None) -> Dict[str, List[Detection]]:
    """Per-category submission file (``image_id score x1 ... y4``) grouped by image."""
    out: Dict[str, List[Detection]] = {}
    for image_id, s, q in _parse_scored(text, source):
        out.setdefault(image_id, []).append(Detection(q, category, s))
    return out


def serialize_detections(dets: Sequence[Detection]) -> str:
    return "".join(
        f"{d.category} {d.score:.6g} " + " ".join(format_coord(c) for pt in d.quad for c in pt) + "\n"
        for d in dets
    )


# ---- geometry --------------------------------------------------------------


def rotated_iou(a, b) -> float:
    """IoU of two convex quads via Sutherland-Hodgman clipping.

    A zero-area input yields 0.0 and a ``DegenerateGeometryWarning``.
    """
    a = np.asarray(a, dtype=float).reshape(-1, 2)
    b = np.asarray(b, dtype=float).reshape(-1, 2)
    area_a, area_b = abs(signed_area(a)), abs(signed_area(b))
    if area_a <= DEGENERATE_AREA or area_b <= DEGENERATE_AREA:
        warnings.warn("zero-area polygon in rotated_iou", DegenerateGeometryWarning, stacklevel=2)
        return 0.0
    inter = intersection_area(a, b)
    union = area_a + area_b - inter
    return float(min(max(inter / union, 0.0), 1.0))


def _order(dets):
    return sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))


def nms_indices(dets: Sequence[Detection], iou_threshold: float = 0.5) -> List[int]:
    """Indices kept by greedy per-category NMS, ordered by (score desc, index asc)."""
    if not 0.0 < iou_threshold < 1.0:
        raise ConfigError("iou_threshold must lie in (0, 1)")
    kept: List[int] = []
    for i in _order(dets):
        d = dets[i]
        if all(
            dets[k].category != d.category or rotated_iou(dets[k].points, d.points) <= iou_threshold
            for k in kept
        ):
            kept.append(i)
    return kept


def rotated_nms(dets: Sequence[Detection], iou_threshold: float = 0.5) -> List[Detection]:
    return [dets[i] for i in nms_indices(dets, iou_threshold)]


# ---- average precision -----------------------------------------------------


class APResult(NamedTuple):
    per_category: Dict[str, float]
    mean: float


def _by_image(items) -> Dict[str, list]:
    if isinstance(items, Mapping):
        return {str(k): list(v) for k, v in items.items()}
    return {"": list(items)}


def interpolated_ap(recall, precision) -> float:
    """Area under the monotone precision envelope, integrated over every recall step."""
    mrec = np.concatenate([[0.0], recall, [1.0]])
    mpre = np.concatenate([[0.0], precision, [0.0]])
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    idx = np.nonzero(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[idx + 1] - mrec[idx]) * mpre[idx + 1]))


def average_precision(
    detections: Union[Mapping[str, Sequence[Detection]], Sequence[Detection]],
    ground_truth: Union[Mapping[str, Sequence[AnnotationRecord]], Sequence[AnnotationRecord]],
    iou_threshold: float = 0.5,
    difficult_policy: str = "ignore",
) -> APResult:
    """Per-category AP and their mean over every category seen in GT or detections.

    Inputs are either one image's lists or dicts keyed by image id.
    Detections are visited in score order (ties by input order) and matched
    to the highest-IoU unmatched GT of their category with IoU >= threshold.
    With ``difficult_policy="ignore"`` a detection whose best candidate is a
    difficult GT is neither TP nor FP, and difficult GTs are never consumed
    nor counted as misses; ``"count"`` treats them as ordinary GTs.
    """
    if not 0.0 < iou_threshold < 1.0:
        raise ConfigError("iou_threshold must lie in (0, 1)")
    if difficult_policy not in ("ignore", "count"):
        raise ConfigError("difficult_policy must be 'ignore' or 'count'")
    dets = _by_image(detections)
    gts = _by_image(ground_truth)
    categories = sorted(
        {g.category for gl in gts.values() for g in gl} | {d.category for dl in dets.values() for d in dl}
    )
    per_category = {}
    for cat in categories:
        per_category[cat] = _category_ap(dets, gts, cat, iou_threshold, difficult_policy == "ignore")
    mean = float(np.mean(list(per_category.values()))) if per_category else 0.0
    return APResult(per_category, mean)


def _category_ap(dets, gts, cat, thr, ignore_difficult):
    cat_gts = {img: [g for g in gl if g.category == cat] for img, gl in gts.items()}
    n_pos = sum(1 for gl in cat_gts.values() for g in gl if not (ignore_difficult and g.difficulty))
    scored = [
        (d.score, order, img, d)
        for order, (img, d) in enumerate((img, d) for img, dl in dets.items() for d in dl if d.category == cat)
    ]
    scored.sort(key=lambda t: (-t[0], t[1]))
    if n_pos == 0:
        return 0.0
    matched = {img: [False] * len(gl) for img, gl in cat_gts.items()}
    tp, fp = [], []
    for _, _, img, d in scored:
        best, best_iou = None, -1.0
        for k, g in enumerate(cat_gts.get(img, [])):
            difficult = ignore_difficult and g.difficulty
            if matched[img][k] and not difficult:
                continue
            iou = rotated_iou(d.points, g.points)
            if iou >= thr and iou > best_iou:
                best, best_iou = k, iou
        if best is None:
            tp.append(0)
            fp.append(1)
        elif ignore_difficult and cat_gts[img][best].difficulty:
            continue
        else:
            matched[img][best] = True
            tp.append(1)
            fp.append(0)
    if not tp:
        return 0.0
    tp_c = np.cumsum(tp)
    fp_c = np.cumsum(fp)
    recall = tp_c / n_pos
    precision = tp_c / np.maximum(tp_c + fp_c, np.finfo(float).eps)
    return interpolated_ap(recall, precision)
