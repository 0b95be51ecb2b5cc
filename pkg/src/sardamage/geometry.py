"""Planar polygon primitives: area, centroid, containment, rectangle clipping.

Polygons are sequences of (x, y) vertex tuples without a repeated closing
vertex. A footprint part is an outer ring plus zero or more hole rings;
areas subtract holes. All routines are pure and CRS-agnostic.
"""

from __future__ import annotations

import math
from collections.abc import Sequence

Ring = Sequence[tuple[float, float]]

EARTH_RADIUS_M = 6371008.8


def signed_area(ring: Ring) -> float:
    """Shoelace area; positive for counter-clockwise rings."""
    n = len(ring)
    acc = 0.0
    for i in range(n):
        x1, y1 = ring[i]
        x2, y2 = ring[(i + 1) % n]
        acc += x1 * y2 - x2 * y1
    return 0.5 * acc


def ring_area(ring: Ring) -> float:
    return abs(signed_area(ring))


def part_area(outer: Ring, holes: Sequence[Ring] = ()) -> float:
    return ring_area(outer) - sum(ring_area(h) for h in holes)


def ring_centroid(ring: Ring) -> tuple[float, float]:
    """Area-weighted centroid; falls back to the vertex mean for degenerate
    (zero-area) rings."""
    a = signed_area(ring)
    if a == 0.0:
        xs = sum(p[0] for p in ring) / len(ring)
        ys = sum(p[1] for p in ring) / len(ring)
        return xs, ys
    cx = cy = 0.0
    n = len(ring)
    for i in range(n):
        x1, y1 = ring[i]
        x2, y2 = ring[(i + 1) % n]
        cross = x1 * y2 - x2 * y1
        cx += (x1 + x2) * cross
        cy += (y1 + y2) * cross
    return cx / (6.0 * a), cy / (6.0 * a)


def parts_centroid(parts: Sequence[tuple[Ring, Sequence[Ring]]]) -> tuple[float, float]:
    """Centroid of a (possibly multi-part, holed) polygon, weighting outer
    rings positively and holes negatively."""
    total = 0.0
    cx = cy = 0.0
    for outer, holes in parts:
        for ring, sign in [(outer, 1.0)] + [(h, -1.0) for h in holes]:
            a = sign * ring_area(ring)
            rx, ry = ring_centroid(ring)
            cx += rx * a
            cy += ry * a
            total += a
    if total == 0.0:
        return ring_centroid(parts[0][0])
    return cx / total, cy / total


def point_in_ring(x: float, y: float, ring: Ring) -> bool:
    """Ray-casting containment test. Points exactly on an edge may land on
    either side; callers must not rely on boundary behaviour."""
    inside = False
    n = len(ring)
    for i in range(n):
        x1, y1 = ring[i]
        x2, y2 = ring[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            x_cross = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < x_cross:
                inside = not inside
    return inside


def point_in_part(x: float, y: float, outer: Ring, holes: Sequence[Ring] = ()) -> bool:
    if not point_in_ring(x, y, outer):
        return False
    return not any(point_in_ring(x, y, h) for h in holes)


def clip_ring_to_rect(
    ring: Ring, xmin: float, ymin: float, xmax: float, ymax: float
) -> list[tuple[float, float]]:
    """Sutherland-Hodgman clip of a ring against an axis-aligned rectangle.

    Concave subjects may come back with degenerate bridging edges; those are
    harmless for area computation, which is the only downstream use.
    """
    #         inside test,              intersection with the clip edge
    edges = (
        (lambda p: p[0] >= xmin, lambda a, b: _x_cross(a, b, xmin)),
        (lambda p: p[0] <= xmax, lambda a, b: _x_cross(a, b, xmax)),
        (lambda p: p[1] >= ymin, lambda a, b: _y_cross(a, b, ymin)),
        (lambda p: p[1] <= ymax, lambda a, b: _y_cross(a, b, ymax)),
    )
    out = list(ring)
    for inside, cross in edges:
        if not out:
            break
        poly, out = out, []
        prev = poly[-1]
        prev_in = inside(prev)
        for cur in poly:
            cur_in = inside(cur)
            if cur_in:
                if not prev_in:
                    out.append(cross(prev, cur))
                out.append(cur)
            elif prev_in:
                out.append(cross(prev, cur))
            prev, prev_in = cur, cur_in
    return out


def _x_cross(a, b, x):
    t = (x - a[0]) / (b[0] - a[0])
    return (x, a[1] + t * (b[1] - a[1]))


def _y_cross(a, b, y):
    t = (y - a[1]) / (b[1] - a[1])
    return (a[0] + t * (b[0] - a[0]), y)


def clipped_part_area(
    outer: Ring,
    holes: Sequence[Ring],
    xmin: float,
    ymin: float,
    xmax: float,
    ymax: float,
) -> float:
    """Exact area of (polygon part) ∩ (rectangle)."""
    clipped = clip_ring_to_rect(outer, xmin, ymin, xmax, ymax)
    if len(clipped) < 3:
        return 0.0
    area = ring_area(clipped)
    for hole in holes:
        hc = clip_ring_to_rect(hole, xmin, ymin, xmax, ymax)
        if len(hc) >= 3:
            area -= ring_area(hc)
    return area


def ring_bbox(ring: Ring) -> tuple[float, float, float, float]:
    xs = [p[0] for p in ring]
    ys = [p[1] for p in ring]
    return min(xs), min(ys), max(xs), max(ys)


def equirectangular_area_m2(
    parts: Sequence[tuple[Ring, Sequence[Ring]]]
) -> float:
    """Approximate metric area of a lon/lat polygon using a local
    equirectangular projection at its centroid. Adequate at building scale."""
    _, lat0 = parts_centroid(parts)
    kx = math.cos(math.radians(lat0)) * EARTH_RADIUS_M * math.pi / 180.0
    ky = EARTH_RADIUS_M * math.pi / 180.0
    total = 0.0
    for outer, holes in parts:
        scaled_outer = [(x * kx, y * ky) for x, y in outer]
        scaled_holes = [[(x * kx, y * ky) for x, y in h] for h in holes]
        total += part_area(scaled_outer, scaled_holes)
    return total
