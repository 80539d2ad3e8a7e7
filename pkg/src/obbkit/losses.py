"""Box regression losses and the classification matching cost.

All functions are vectorised over numpy arrays where that is cheap; the
scalar forms return plain floats.
"""

from dataclasses import dataclass, fields

import numpy as np

from .exceptions import ConfigError, NumericalError
from .obb_core import Gauss2, Obb5, delta_pi, obb_to_gauss
from .validation import check_finite, check_obb_array

# Above this the target covariance is treated as singular.
MAX_CONDITION = 1e12
PROB_CLAMP = 1e-8


@dataclass(frozen=True)
class LossWeights:
    """Weights of the loss / matching-cost terms.

    Focal, L1 and KLD defaults are the values used by every model size
    (1, 5, 5). No value is published for the angle and Hausdorff terms;
    5 keeps them on the same footing as the other regression terms.
    """

    w_focal: float = 1.0
    w_l1: float = 5.0
    w_kld: float = 5.0
    w_angle: float = 5.0
    w_hausdorff: float = 5.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not np.isfinite(v) or v < 0:
                raise ConfigError(f"{f.name} must be a finite value >= 0, got {v!r}")

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def sp_l1(theta_pred, theta_tgt):
    """Shortest-path periodic L1: the shorter arc between two angles mod pi."""
    d = np.abs(delta_pi(theta_pred, theta_tgt))
    return float(d) if np.ndim(d) == 0 else d


def sp_l1_grad(theta_pred, theta_tgt):
    """Derivative of ``sp_l1`` w.r.t. ``theta_pred``.

    ``sign(delta_pi)`` with 0 at the minimum. On the ridge, where both arcs
    have length pi/2 and ``delta_pi`` returns ``-pi/2``, the value is +1.
    """
    d = np.asarray(delta_pi(theta_pred, theta_tgt))
    g = np.sign(d)
    g = np.where(d == -0.5 * np.pi, 1.0, g)
    return float(g) if g.ndim == 0 else g


def _inv_det_2x2(S):
    a, b, c, d = S[..., 0, 0], S[..., 0, 1], S[..., 1, 0], S[..., 1, 1]
    det = a * d - b * c
    adj = np.stack([np.stack([d, -b], -1), np.stack([-c, a], -1)], -2)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = adj / det[..., None, None]
    return inv, det


def _condition_2x2(S):
    eig = np.linalg.eigvalsh(S)
    lo, hi = np.abs(eig[..., 0]), np.abs(eig[..., 1])
    with np.errstate(divide="ignore"):
        return np.where(lo > 0, hi / np.where(lo > 0, lo, 1.0), np.inf)


def kld_gauss_arrays(mu_p, sigma_p, mu_t, sigma_t):
    """Broadcasting ``KL(N_p || N_t)`` on stacked means ``(..., 2)`` and covariances ``(..., 2, 2)``."""
    mu_p, sigma_p = np.asarray(mu_p, float), np.asarray(sigma_p, float)
    mu_t, sigma_t = np.asarray(mu_t, float), np.asarray(sigma_t, float)
    inv_t, det_t = _inv_det_2x2(sigma_t)
    _, det_p = _inv_det_2x2(sigma_p)
    cond = _condition_2x2(sigma_t)
    if np.any(det_t <= 0) or np.any(cond > MAX_CONDITION):
        worst = float(np.max(cond))
        raise NumericalError(
            f"target covariance is singular or ill-conditioned (condition number {worst:.3g})",
            condition_number=worst,
        )
    if np.any(det_p <= 0):
        raise NumericalError("predicted covariance is not positive-definite")
    trace = np.einsum("...ij,...ji->...", inv_t, sigma_p)
    dmu = mu_t - mu_p
    maha = np.einsum("...i,...ij,...j->...", dmu, inv_t, dmu)
    kld = 0.5 * (trace + maha - 2.0 + np.log(det_t / det_p))
    # rounding can push D = 0 a few ulps negative
    return np.maximum(kld, 0.0)


def kld_gauss(p: Gauss2, t: Gauss2) -> float:
    """Closed-form KL divergence between two 2-D Gaussians, ``D(p || t)``."""
    return float(kld_gauss_arrays(p.mu, p.sigma, t.mu, t.sigma))


def _kld_bounded(d):
    return 1.0 - 1.0 / (1.0 + np.sqrt(d))


def kld_loss(pred, tgt) -> float:
    """Bounded KLD loss ``1 - 1 / (1 + sqrt(D))`` between two boxes, in [0, 1)."""
    return float(_kld_bounded(kld_gauss(obb_to_gauss(pred), obb_to_gauss(tgt))))


def kld_loss_matrix(preds, targets):
    """Pairwise KLD losses between ``(n, 5)`` predictions and ``(m, 5)`` targets -> ``(n, m)``."""
    gp = obb_to_gauss(check_obb_array(preds, "preds"))
    gt = obb_to_gauss(check_obb_array(targets, "targets"))
    d = kld_gauss_arrays(gp.mu[:, None], gp.sigma[:, None], gt.mu[None], gt.sigma[None])
    return _kld_bounded(d)


def focal_cost(p, is_match=True, alpha=0.25, gamma=2.0):
    """Focal classification cost of probability ``p``.

    With ``is_match`` this is the DETR matching cost
    ``alpha (1-p)^gamma (-ln p) - (1-alpha) p^gamma (-ln(1-p))``, which
    decreases monotonically in ``p``. Without it, only the negative-label
    focal term ``(1-alpha) p^gamma (-ln(1-p))`` is returned. Probabilities
    are clamped to ``[1e-8, 1 - 1e-8]``.
    """
    p = np.clip(check_finite(p, "p"), PROB_CLAMP, 1.0 - PROB_CLAMP)
    neg = (1.0 - alpha) * p**gamma * -np.log(1.0 - p)
    if is_match:
        pos = alpha * (1.0 - p) ** gamma * -np.log(p)
        out = pos - neg
    else:
        out = neg
    return float(out) if out.ndim == 0 else out


def total_box_loss(pred, tgt, w: LossWeights = LossWeights()) -> float:
    """Weighted regression loss: L1 on (cx, cy, w, h) + KLD + periodic angle L1.

    Coordinates are used as given; pass normalised boxes for sigmoid-space
    training and pixel boxes otherwise. The classification term is not part
    of this loss.
    """
    pred = pred if isinstance(pred, Obb5) else Obb5.from_array(pred)
    tgt = tgt if isinstance(tgt, Obb5) else Obb5.from_array(tgt)
    l1 = float(np.sum(np.abs(pred.as_array()[:4] - tgt.as_array()[:4])))
    loss = 0.0
    if w.w_l1:
        loss += w.w_l1 * l1
    if w.w_kld:
        loss += w.w_kld * kld_loss(pred, tgt)
    if w.w_angle:
        loss += w.w_angle * sp_l1(pred.theta, tgt.theta)
    return loss
