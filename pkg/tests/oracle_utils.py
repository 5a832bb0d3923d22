"""Independent reference implementations used as test oracles.

These deliberately avoid the code paths they are checking: ray
intersection by zooming grid search, arc-length placement by per-axis
interpolation against the cumulative arc table, and hull area by monotone
chain + shoelace.
"""

import numpy as np


def brute_force_ray_midpoint(o1, d1, o2, d2, t_range=None, rounds=8, grid=121):
    """Minimize distance between points on two lines by zooming grid search.

    Returns (midpoint, min_distance). The initial range widens for
    near-parallel rays, whose closest points sit far out; resolution after
    the final round is far below 1e-6 for desk-scale geometry.
    """
    o1, d1 = np.asarray(o1, float), np.asarray(d1, float)
    o2, d2 = np.asarray(o2, float), np.asarray(d2, float)
    d1 = d1 / np.linalg.norm(d1)
    d2 = d2 / np.linalg.norm(d2)
    if t_range is None:
        sin_angle = max(np.linalg.norm(np.cross(d1, d2)), 1e-6)
        t_range = max(10.0, 5.0 * np.linalg.norm(o1 - o2) / sin_angle)
    c1, c2 = 0.0, 0.0
    half = t_range
    best = None
    for _ in range(rounds):
        t1 = np.linspace(c1 - half, c1 + half, grid)
        t2 = np.linspace(c2 - half, c2 + half, grid)
        p1 = o1 + t1[:, None, None] * d1     # (g, 1, 3)
        p2 = o2 + t2[None, :, None] * d2     # (1, g, 3)
        dist = np.linalg.norm(p1 - p2, axis=-1)
        i, j = np.unravel_index(np.argmin(dist), dist.shape)
        c1, c2 = t1[i], t2[j]
        best = dist[i, j]
        half = 4.0 * (t1[1] - t1[0])
    point = 0.5 * (o1 + c1 * d1 + o2 + c2 * d2)
    return point, float(best)


def brute_force_point_ray_distance(origin, direction, point, t_max=50.0, n=2000001):
    """Min distance from `point` to the half-line {origin + t*dir, t >= 0}."""
    origin = np.asarray(origin, float)
    direction = np.asarray(direction, float)
    direction = direction / np.linalg.norm(direction)
    t = np.linspace(0.0, t_max, n)
    pts = origin + t[:, None] * direction
    return float(np.min(np.linalg.norm(pts - np.asarray(point, float), axis=1)))


def arc_position(points, s):
    """Point at arc length s along a polyline, via per-axis interpolation."""
    points = np.asarray(points, float)
    cum = np.concatenate([[0.0], np.cumsum(
        np.linalg.norm(np.diff(points, axis=0), axis=1))])
    return np.array([np.interp(s, cum, points[:, k]) for k in range(points.shape[1])])


def arc_length(points):
    points = np.asarray(points, float)
    return float(np.sum(np.linalg.norm(np.diff(points, axis=0), axis=1)))


def hull_area_monotone_chain(points):
    """Convex hull area by Andrew's monotone chain plus the shoelace formula."""
    pts = sorted({(float(x), float(y)) for x, y in np.asarray(points, float)})
    if len(pts) < 3:
        return 0.0

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        return 0.0
    area = 0.0
    for i in range(len(hull)):
        x1, y1 = hull[i]
        x2, y2 = hull[(i + 1) % len(hull)]
        area += x1 * y2 - x2 * y1
    return abs(area) / 2.0


def random_camera(rng, intrinsics_cls, camera_cls):
    """Camera at a random pose looking roughly at the origin."""
    from keywarp.geometry import look_at_camera
    intr = intrinsics_cls(fx=float(rng.uniform(200, 800)),
                          fy=float(rng.uniform(200, 800)),
                          cx=float(rng.uniform(200, 440)),
                          cy=float(rng.uniform(140, 340)),
                          width=640, height=480)
    eye = rng.uniform(-2.0, 2.0, 3)
    while np.linalg.norm(eye) < 0.5:
        eye = rng.uniform(-2.0, 2.0, 3)
    target = rng.uniform(-0.2, 0.2, 3)
    return look_at_camera(eye, target, intr)
