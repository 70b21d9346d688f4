"""Low-level planar geometry: areas, containment, rectangle clipping, line traversal."""

from __future__ import annotations

import numpy as np


def shoelace_area(ring) -> float:
    """Signed area of a ring (positive = counter-clockwise)."""
    pts = np.asarray(ring, dtype=np.float64)
    if len(pts) >= 2 and np.allclose(pts[0], pts[-1]):
        pts = pts[:-1]
    if len(pts) < 3:
        return 0.0
    x = pts[:, 0]
    y = pts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def ring_closed(ring) -> bool:
    pts = np.asarray(ring, dtype=np.float64)
    return len(pts) >= 4 and bool(np.all(pts[0] == pts[-1]))


def point_in_ring(px: float, py: float, ring) -> bool:
    """Even-odd ray-casting containment test.

    Half-open edge intervals make boundary points deterministic: for a
    counter-clockwise ring a point exactly on an edge belongs to the ring
    whose interior lies to the left of the edge direction.
    """
    pts = np.asarray(ring, dtype=np.float64)
    if len(pts) >= 2 and np.all(pts[0] == pts[-1]):
        pts = pts[:-1]
    inside = False
    n = len(pts)
    for i in range(n):
        x1, y1 = pts[i]
        x2, y2 = pts[(i + 1) % n]
        if (y1 <= py < y2) or (y2 <= py < y1):
            xcross = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            if xcross > px:
                inside = not inside
    return inside


def points_in_ring(px: np.ndarray, py: np.ndarray, ring) -> np.ndarray:
    """Vectorized even-odd test for many points at once."""
    pts = np.asarray(ring, dtype=np.float64)
    if len(pts) >= 2 and np.all(pts[0] == pts[-1]):
        pts = pts[:-1]
    px = np.asarray(px, dtype=np.float64)
    py = np.asarray(py, dtype=np.float64)
    inside = np.zeros(px.shape, dtype=bool)
    n = len(pts)
    for i in range(n):
        x1, y1 = pts[i]
        x2, y2 = pts[(i + 1) % n]
        if y1 == y2:
            continue
        span = ((y1 <= py) & (py < y2)) | ((y2 <= py) & (py < y1))
        with np.errstate(invalid="ignore"):
            xcross = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
        inside ^= span & (xcross > px)
    return inside


def point_on_ring(px: float, py: float, ring, tol: float = 1e-9) -> bool:
    """True when the point lies within ``tol`` of a ring edge."""
    pts = np.asarray(ring, dtype=np.float64)
    if len(pts) >= 2 and np.all(pts[0] == pts[-1]):
        pts = pts[:-1]
    n = len(pts)
    for i in range(n):
        ax, ay = pts[i]
        bx, by = pts[(i + 1) % n]
        dx, dy = bx - ax, by - ay
        seg2 = dx * dx + dy * dy
        if seg2 == 0.0:
            continue
        t = ((px - ax) * dx + (py - ay) * dy) / seg2
        t = min(1.0, max(0.0, t))
        qx, qy = ax + t * dx, ay + t * dy
        if (px - qx) ** 2 + (py - qy) ** 2 <= tol * tol:
            return True
    return False


def clip_ring_to_rect(ring, xmin, ymin, xmax, ymax) -> np.ndarray:
    """Sutherland-Hodgman clip of a ring against an axis-aligned rectangle.

    Valid because the clip region is convex. Returns the clipped ring's
    vertices (possibly empty).
    """
    pts = np.asarray(ring, dtype=np.float64)
    if len(pts) >= 2 and np.all(pts[0] == pts[-1]):
        pts = pts[:-1]
    poly = [tuple(p) for p in pts]

    # (inside predicate, intersection) per rectangle edge
    def make_edge(axis, bound, keep_less):
        def inside(p):
            return p[axis] <= bound if keep_less else p[axis] >= bound

        def intersect(p, q):
            t = (bound - p[axis]) / (q[axis] - p[axis])
            if axis == 0:
                return (bound, p[1] + t * (q[1] - p[1]))
            return (p[0] + t * (q[0] - p[0]), bound)

        return inside, intersect

    edges = [
        make_edge(0, xmin, False),
        make_edge(0, xmax, True),
        make_edge(1, ymin, False),
        make_edge(1, ymax, True),
    ]
    for inside, intersect in edges:
        if not poly:
            break
        clipped = []
        prev = poly[-1]
        prev_in = inside(prev)
        for cur in poly:
            cur_in = inside(cur)
            if cur_in:
                if not prev_in:
                    clipped.append(intersect(prev, cur))
                clipped.append(cur)
            elif prev_in:
                clipped.append(intersect(prev, cur))
            prev, prev_in = cur, cur_in
        poly = clipped
    return np.asarray(poly, dtype=np.float64).reshape(-1, 2)


def rect_ring_intersection_area(ring, xmin, ymin, xmax, ymax) -> float:
    """Unsigned area of ring-interior intersected with the rectangle."""
    clipped = clip_ring_to_rect(ring, xmin, ymin, xmax, ymax)
    return abs(shoelace_area(clipped))


def supercover_cells(x0, y0, x1, y1, origin_x, origin_y, pixel_size, rows, cols):
    """Grid cells a segment passes through (ground coordinates, row/col grid).

    Returns a set of (row, col) pairs limited to the grid extent. Cells are
    found by cutting the segment at every pixel boundary crossing and
    locating the midpoint of each piece.
    """
    h = pixel_size
    # pixel-space coordinates: u along columns, v along rows (down)
    u0, v0 = (x0 - origin_x) / h, (origin_y - y0) / h
    u1, v1 = (x1 - origin_x) / h, (origin_y - y1) / h
    ts = [0.0, 1.0]
    du, dv = u1 - u0, v1 - v0
    if du != 0.0:
        lo, hi = sorted((u0, u1))
        for b in range(int(np.floor(lo)) + 1, int(np.ceil(hi))):
            ts.append((b - u0) / du)
    if dv != 0.0:
        lo, hi = sorted((v0, v1))
        for b in range(int(np.floor(lo)) + 1, int(np.ceil(hi))):
            ts.append((b - v0) / dv)
    ts = sorted(t for t in ts if 0.0 <= t <= 1.0)
    cells = set()
    for ta, tb in zip(ts[:-1], ts[1:]):
        if tb <= ta:
            continue
        tm = 0.5 * (ta + tb)
        col = int(np.floor(u0 + tm * du))
        row = int(np.floor(v0 + tm * dv))
        if 0 <= row < rows and 0 <= col < cols:
            cells.add((row, col))
    if not ts:
        return cells
    # degenerate zero-length segment
    if du == 0.0 and dv == 0.0:
        col = int(np.floor(u0))
        row = int(np.floor(v0))
        if 0 <= row < rows and 0 <= col < cols:
            cells.add((row, col))
    return cells
