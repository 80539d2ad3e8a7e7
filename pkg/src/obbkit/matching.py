"""One-to-one matching of predictions to targets.

The matching cost combines a focal classification term, the bounded KLD
loss and a Hausdorff distance between sampled box outlines. All three are
unchanged when a target is rewritten as ``(h, w, theta + pi/2)``, which is
why the Hausdorff term is used instead of an angle-sensitive one.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from sklearn.base import BaseEstimator

from .exceptions import ConfigError, DomainError, ShapeError
from .losses import LossWeights, focal_cost, kld_loss_matrix
from .obb_core import Obb5, obb_to_quad
from .validation import check_finite, check_quad_array


@dataclass(frozen=True)
class CostMatrix:
    values: np.ndarray

    def __post_init__(self):
        v = check_finite(self.values, "cost matrix")
        if v.ndim != 2 or 0 in v.shape:
            raise ShapeError(f"cost matrix must be a non-empty 2-D array, got {v.shape}")
        object.__setattr__(self, "values", v)

    @property
    def n_preds(self):
        return self.values.shape[0]

    @property
    def n_targets(self):
        return self.values.shape[1]


@dataclass(frozen=True)
class Assignment:
    pairs: List[Tuple[int, int]]
    total_cost: float


def outline_points(q, edge_samples=8):
    """Corners plus ``edge_samples`` evenly spaced interior points per edge -> ``(4 (K + 1), 2)``."""
    q = check_quad_array(q)
    if edge_samples < 0:
        raise ConfigError("edge_samples must be >= 0")
    t = np.arange(edge_samples + 1) / (edge_samples + 1)
    nxt = np.roll(q, -1, axis=-2)
    pts = q[..., :, None, :] + t[:, None] * (nxt - q)[..., :, None, :]
    return pts.reshape(q.shape[:-2] + (-1, 2))


def _hausdorff_sets(A, B):
    """Symmetric Hausdorff distance between point sets ``(..., n, 2)`` and ``(..., m, 2)``."""
    d = np.linalg.norm(A[..., :, None, :] - B[..., None, :, :], axis=-1)
    return np.maximum(d.min(axis=-1).max(axis=-1), d.min(axis=-2).max(axis=-1))


def hausdorff_cost(a, b, edge_samples=8):
    """Hausdorff distance between the sampled outlines of two quads."""
    return float(_hausdorff_sets(outline_points(a, edge_samples), outline_points(b, edge_samples)))


def hausdorff_matrix(quads_a, quads_b, edge_samples=8):
    """Pairwise ``(n, m)`` Hausdorff costs between two quad stacks."""
    A = outline_points(np.asarray(quads_a, float).reshape(-1, 4, 2), edge_samples)
    B = outline_points(np.asarray(quads_b, float).reshape(-1, 4, 2), edge_samples)
    return _hausdorff_sets(A[:, None], B[None, :])


def _box_array(boxes):
    return np.stack([b.as_array() if isinstance(b, Obb5) else np.asarray(b, float) for b in boxes])


def build_cost_matrix(
    preds: Sequence,
    targets: Sequence,
    w: LossWeights = LossWeights(),
    alpha=0.25,
    gamma=2.0,
    edge_samples=8,
) -> CostMatrix:
    """Matching cost between ``(box, class_probs)`` predictions and ``(box, label)`` targets.

    ``C[i, j] = w_focal * focal(p_i[label_j]) + w_kld * kld_loss + w_hausdorff * hausdorff``.
    Only the target-class probability enters the focal term.
    """
    if not preds or not targets:
        raise DomainError("need at least one prediction and one target")
    pred_boxes = _box_array([p[0] for p in preds])
    probs = np.stack([check_finite(p[1], "class probabilities") for p in preds])
    if np.any((probs <= 0) | (probs >= 1)):
        raise DomainError("class probabilities must lie in (0, 1)")
    tgt_boxes = _box_array([t[0] for t in targets])
    labels = np.array([int(t[1]) for t in targets])
    if labels.min() < 0 or labels.max() >= probs.shape[1]:
        raise DomainError("target label outside the probability vector")

    cost = np.zeros((len(preds), len(targets)))
    if w.w_focal:
        cost += w.w_focal * focal_cost(probs[:, labels], True, alpha, gamma)
    if w.w_kld:
        cost += w.w_kld * kld_loss_matrix(pred_boxes, tgt_boxes)
    if w.w_hausdorff:
        cost += w.w_hausdorff * hausdorff_matrix(
            obb_to_quad(pred_boxes), obb_to_quad(tgt_boxes), edge_samples
        )
    return CostMatrix(cost)


def _solve_square(a):
    """Shortest-augmenting-path Hungarian method with potentials, O(n^3).

    ``a`` is a square cost array; returns ``col_of_row``.
    """
    n = a.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    row_of_col = np.zeros(n + 1, dtype=int)  # 1-based, 0 = free
    way = np.zeros(n + 1, dtype=int)
    for i in range(1, n + 1):
        row_of_col[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = row_of_col[j0]
            cur = a[i0 - 1] - u[i0] - v[1:]
            free = ~used[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            cand = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(cand)) + 1
            delta = cand[j1 - 1]
            u[row_of_col[used]] += delta
            v[used] -= delta
            minv[1:][free] -= delta
            j0 = j1
            if row_of_col[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            row_of_col[j0] = row_of_col[j1]
            j0 = j1
    col_of_row = np.empty(n, dtype=int)
    for j in range(1, n + 1):
        col_of_row[row_of_col[j] - 1] = j - 1
    return col_of_row


def hungarian(c) -> Assignment:
    """Exact minimum-cost assignment of ``min(N, M)`` pairs.

    Rectangular matrices are padded to square with a constant larger than
    any entry; padded pairs are dropped from the result.
    """
    values = c.values if isinstance(c, CostMatrix) else CostMatrix(c).values
    n, m = values.shape
    size = max(n, m)
    pad = (np.abs(values).max() + 1.0) * min(n, m)
    square = np.full((size, size), pad)
    square[:n, :m] = values
    cols = _solve_square(square)
    pairs = [(i, int(cols[i])) for i in range(n) if cols[i] < m]
    total = float(sum(values[i, j] for i, j in pairs))
    return Assignment(pairs, total)


class HungarianMatcher(BaseEstimator):
    """Focal + KLD + Hausdorff bipartite matcher."""

    def __init__(self, w_focal=1.0, w_kld=5.0, w_hausdorff=5.0, alpha=0.25, gamma=2.0, edge_samples=8):
        self.w_focal = w_focal
        self.w_kld = w_kld
        self.w_hausdorff = w_hausdorff
        self.alpha = alpha
        self.gamma = gamma
        self.edge_samples = edge_samples

    def cost_matrix(self, preds, targets):
        w = LossWeights(w_focal=self.w_focal, w_kld=self.w_kld, w_hausdorff=self.w_hausdorff)
        return build_cost_matrix(preds, targets, w, self.alpha, self.gamma, self.edge_samples)

    def match(self, preds, targets) -> Assignment:
        return hungarian(self.cost_matrix(preds, targets))
