"""Randomised property suite for the periodic angle operators.

Each check compares the implementation against an independent reference
(k-enumeration for the shortest difference, central differences for the
gradient) and reports its worst deviation plus a witness on failure.
"""

from typing import List, NamedTuple, Optional

import numpy as np

from .losses import sp_l1, sp_l1_grad
from .obb_core import delta_pi, wrap_pi

FD_STEP = 1e-6
FD_EXCLUSION = 1e-4


class CheckResult(NamedTuple):
    name: str
    checked: int
    passed: int
    max_deviation: float
    tolerance: float
    witness: Optional[str]

    @property
    def ok(self):
        return self.passed == self.checked


def circular_gap(a, b):
    """Distance between two angles on the pi-circle (no wrap-around jump)."""
    d = np.abs(np.asarray(a) - np.asarray(b)) % np.pi
    return np.minimum(d, np.pi - d)


def shortest_delta_oracle(p, t, ks=range(-2, 3)):
    """Signed minimum-magnitude representative of ``p - t + k pi`` over ``ks``."""
    cands = np.stack([p - t + k * np.pi for k in ks])
    return np.take_along_axis(cands, np.argmin(np.abs(cands), axis=0)[None], axis=0)[0]


def _result(name, dev, tol, inputs):
    dev = np.asarray(dev, dtype=float)
    ok = dev <= tol
    witness = None
    if not ok.all():
        i = int(np.argmax(dev))
        witness = f"{name}: inputs={[float(np.asarray(x).ravel()[i]) for x in inputs]} deviation={dev[i]:.3e}"
    return CheckResult(name, int(dev.size), int(ok.sum()), float(dev.max(initial=0.0)), tol, witness)


def run_angle_checks(samples: int, seed=0) -> List[CheckResult]:
    rng = np.random.default_rng(seed)
    u = rng.uniform(-50.0, 50.0, samples)
    k = rng.integers(-1000, 1001, samples)
    p = rng.uniform(0.0, np.pi, samples)
    t = rng.uniform(0.0, np.pi, samples)
    results = []

    w = wrap_pi(u)
    in_range = (w >= 0) & (w < np.pi)
    results.append(_result("wrap_range", (~in_range).astype(float), 0.0, [u]))
    results.append(_result("wrap_idempotent", np.abs(wrap_pi(w) - w), 1e-12, [u]))
    results.append(_result("wrap_periodic", circular_gap(wrap_pi(u + k * np.pi), w), 1e-12, [u, k]))

    d = delta_pi(p, t)
    oracle = shortest_delta_oracle(p, t)
    results.append(_result("delta_shortest", np.abs(np.abs(d) - np.abs(oracle)), 1e-12, [p, t]))
    ridge = np.abs(np.abs(oracle) - np.pi / 2) < 1e-12
    signed = np.where(ridge, 0.0, np.abs(d - oracle))
    results.append(_result("delta_signed", signed, 1e-12, [p, t]))

    diff = np.abs(p - t) % np.pi
    results.append(_result("sp_l1_min_arc", np.abs(sp_l1(p, t) - np.minimum(diff, np.pi - diff)), 1e-12, [p, t]))

    # keep points away from the kinks so central differences are meaningful
    mag = np.abs(d)
    smooth = (mag > FD_EXCLUSION) & (np.pi / 2 - mag > FD_EXCLUSION)
    fd = (sp_l1(p + FD_STEP, t) - sp_l1(p - FD_STEP, t)) / (2 * FD_STEP)
    dev = np.where(smooth, np.abs(sp_l1_grad(p, t) - fd), 0.0)
    results.append(_result("sp_l1_grad_fd", dev, 1e-4, [p, t]))
    return results
