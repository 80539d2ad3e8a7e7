"""Small convex-polygon toolkit: orientation, point tests and clipping."""

import numpy as np

# inclusive tolerance on the half-plane test, in length units
HALF_PLANE_EPS = 1e-9


def signed_area(poly):
    poly = np.asarray(poly, dtype=float)
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def ccw(poly):
    """Return ``poly`` in counter-clockwise (positive-area) order."""
    poly = np.asarray(poly, dtype=float)
    return poly[::-1].copy() if signed_area(poly) < 0 else poly


def clip_convex(subject, clipper, eps=HALF_PLANE_EPS):
    """Sutherland-Hodgman clip of ``subject`` by the convex polygon ``clipper``.

    Both polygons are reoriented counter-clockwise first. Returns an
    ``(m, 2)`` array, possibly empty.
    """
    out = [tuple(p) for p in ccw(subject)]
    clip = ccw(clipper)
    n = len(clip)
    for i in range(n):
        if not out:
            break
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        norm = np.hypot(ex, ey)
        if norm == 0.0:
            continue
        src, out = out, []

        def dist(p):
            return (ex * (p[1] - ay) - ey * (p[0] - ax)) / norm

        prev = src[-1]
        d_prev = dist(prev)
        for cur in src:
            d_cur = dist(cur)
            if d_cur >= -eps:
                if d_prev < -eps:
                    out.append(_cut(prev, cur, d_prev, d_cur))
                out.append(cur)
            elif d_prev >= -eps:
                out.append(_cut(prev, cur, d_prev, d_cur))
            prev, d_prev = cur, d_cur
    return np.array(out, dtype=float).reshape(-1, 2)


def _cut(p, q, dp, dq):
    t = dp / (dp - dq)
    return (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))


def intersection_area(a, b):
    return abs(signed_area(clip_convex(a, b)))


def points_in_convex(points, poly):
    """Boolean mask of ``(n, 2)`` points inside (or on) a convex polygon."""
    points = np.asarray(points, dtype=float)
    poly = ccw(poly)
    inside = np.ones(len(points), dtype=bool)
    for a, b in zip(poly, np.roll(poly, -1, axis=0)):
        e = b - a
        inside &= e[0] * (points[:, 1] - a[1]) - e[1] * (points[:, 0] - a[0]) >= 0
    return inside
