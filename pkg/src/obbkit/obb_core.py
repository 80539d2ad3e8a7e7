"""Oriented-box records, periodic angle operators and conversions.

Angle convention: long-side definition, ``theta`` in ``[0, pi)``, measured
counter-clockwise from the +x axis in the image plane (x right, y down).
Under y-down display a positive angle therefore appears clockwise on screen;
flipping the convention only negates ``theta``.

Corner order for quads is ``center + R(theta) @ (-w/2, -h/2)``,
``(+w/2, -h/2)``, ``(+w/2, +h/2)``, ``(-w/2, +h/2)``, which gives positive
edge cross products (the usual DOTA ordering).
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import DomainError, ShapeError
from .validation import check_finite, check_obb_array, check_quad_array

PI = np.pi
HALF_PI = 0.5 * np.pi

_CORNER_SIGNS = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


def _scalar_or_array(result, like):
    return float(result) if np.ndim(like) == 0 else result


def wrap_pi(u):
    """Map any finite angle into ``[0, pi)`` using ``u - pi * floor(u / pi)``.

    Works element-wise on arrays. Rounding can land a result exactly on
    ``pi`` (or a hair below 0) for inputs adjacent to a multiple of ``pi``;
    those are folded back so the half-open range always holds.
    """
    u = check_finite(u, "angle")
    r = u - PI * np.floor(u / PI)
    r = np.where(r < 0.0, r + PI, r)
    r = np.where(r >= PI, 0.0, r)
    return _scalar_or_array(r, u)


def delta_pi(theta_p, theta_t):
    """Signed shortest difference ``theta_p - theta_t`` on the pi-circle.

    Result lies in ``[-pi/2, pi/2)``.
    """
    theta_p = check_finite(theta_p, "theta_p")
    theta_t = check_finite(theta_t, "theta_t")
    d = wrap_pi(theta_p - theta_t + HALF_PI) - HALF_PI
    return float(d) if theta_p.ndim == 0 and theta_t.ndim == 0 else d


@dataclass(frozen=True)
class Obb5:
    """Five-parameter oriented box. ``theta`` is wrapped into [0, pi) on construction."""

    cx: float
    cy: float
    w: float
    h: float
    theta: float = 0.0

    def __post_init__(self):
        vals = check_finite([self.cx, self.cy, self.w, self.h, self.theta], "Obb5")
        if vals[2] <= 0 or vals[3] <= 0:
            raise DomainError(f"Obb5 needs w > 0 and h > 0, got w={self.w}, h={self.h}")
        for name, v in zip(("cx", "cy", "w", "h"), vals[:4]):
            object.__setattr__(self, name, float(v))
        object.__setattr__(self, "theta", wrap_pi(vals[4]))

    @classmethod
    def from_array(cls, a):
        a = np.asarray(a, dtype=float).reshape(-1)
        if a.shape != (5,):
            raise ShapeError(f"expected 5 values, got {a.shape}")
        return cls(*a.tolist())

    def as_array(self):
        return np.array([self.cx, self.cy, self.w, self.h, self.theta])

    def swapped(self):
        """The same rectangle written as ``(h, w, theta + pi/2)``."""
        return Obb5(self.cx, self.cy, self.h, self.w, self.theta + HALF_PI)

    def canonical(self):
        """Long-side form (w >= h)."""
        return self.swapped() if self.w < self.h else self

    def to_quad(self):
        return obb_to_quad(self)

    def to_gauss(self):
        return obb_to_gauss(self)


class Gauss2(NamedTuple):
    """2-D Gaussian embedding of a box: mean ``mu`` (2,) and covariance ``sigma`` (2, 2)."""

    mu: np.ndarray
    sigma: np.ndarray


def _as_obb_array(b):
    if isinstance(b, Obb5):
        return b.as_array()[None, :], True
    arr = check_obb_array(b, "box")
    return arr, np.ndim(b) == 1


def rotation_matrices(theta):
    """Stack of 2x2 CCW rotation matrices, shape ``theta.shape + (2, 2)``."""
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


def obb_to_quad(b):
    """Corners of one box (-> ``(4, 2)``) or a batch ``(n, 5)`` (-> ``(n, 4, 2)``)."""
    arr, single = _as_obb_array(b)
    half = 0.5 * arr[:, None, 2:4] * _CORNER_SIGNS[None]
    rot = rotation_matrices(arr[:, 4])
    corners = arr[:, None, :2] + np.einsum("nij,nkj->nki", rot, half)
    return corners[0] if single else corners


def quad_area(q):
    """Signed shoelace area; positive for the canonical corner order."""
    q = np.asarray(q, dtype=float)
    x, y = q[..., 0], q[..., 1]
    return 0.5 * np.sum(x * np.roll(y, -1, axis=-1) - np.roll(x, -1, axis=-1) * y, axis=-1)


def is_convex(q, eps=1e-12):
    """True when every consecutive edge pair turns the same way."""
    q = np.asarray(q, dtype=float)
    e = np.roll(q, -1, axis=0) - q
    cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
    scale = max(np.max(np.abs(cross)), eps)
    return bool(np.all(cross >= -eps * scale) or np.all(cross <= eps * scale))


def quad_to_obb(q, tol=1e-6):
    """Fit the long-side ``Obb5`` of a (near-)rectangular quad.

    Opposite edges are averaged, so quads within ``tol`` (relative to the
    longest edge) of a rectangle are snapped onto one. Either winding order
    is accepted.
    """
    q = check_quad_array(q)
    if q.ndim != 2:
        raise ShapeError("quad_to_obb takes a single (4, 2) quad")
    e = np.roll(q, -1, axis=0) - q
    lengths = np.linalg.norm(e, axis=1)
    scale = lengths.max()
    if scale == 0.0 or lengths.min() <= 1e-12 * scale or abs(quad_area(q)) <= 1e-12 * scale**2:
        raise DomainError("degenerate quad (zero area)")
    if (
        np.linalg.norm(e[0] + e[2]) > tol * scale
        or np.linalg.norm(e[1] + e[3]) > tol * scale
        or abs(np.dot(e[0], e[1])) > tol * lengths[0] * lengths[1]
    ):
        raise ShapeError("quad is not a rectangle within tolerance")
    u = 0.5 * (e[0] - e[2])
    v = 0.5 * (e[1] - e[3])
    w, h = np.linalg.norm(u), np.linalg.norm(v)
    if h > w:
        w, h, u = h, w, v
    cx, cy = q.mean(axis=0)
    return Obb5(cx, cy, w, h, np.arctan2(u[1], u[0]))


def obb_to_gauss(b):
    """Gaussian with ``mu = center`` and ``sigma = R diag((w/2)^2, (h/2)^2) R^T``.

    Accepts one box or an ``(n, 5)`` batch; the batch form returns stacked
    arrays inside the ``Gauss2`` tuple.
    """
    arr, single = _as_obb_array(b)
    rot = rotation_matrices(arr[:, 4])
    diag = np.zeros((len(arr), 2, 2))
    diag[:, 0, 0] = (0.5 * arr[:, 2]) ** 2
    diag[:, 1, 1] = (0.5 * arr[:, 3]) ** 2
    sigma = rot @ diag @ np.swapaxes(rot, -1, -2)
    # exact symmetry; the product is symmetric only up to rounding
    sigma = 0.5 * (sigma + np.swapaxes(sigma, -1, -2))
    mu = arr[:, :2].copy()
    if single:
        return Gauss2(mu[0], sigma[0])
    return Gauss2(mu, sigma)
