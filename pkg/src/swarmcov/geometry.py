"""Field polygons, their bounding rectangle, and rasterization onto a cell grid.

Grid convention: row 0 is the northern (max-y) edge of the bounding rectangle and
column 0 the western (min-x) edge, so printing a mask row by row draws the field
the way it looks on a map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import NoVisitableCells, PolygonError
from .gridworld import GridMap

Point = tuple[float, float]


def _orient(a: Point, b: Point, c: Point) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _on_segment(p: Point, a: Point, b: Point) -> bool:
    if _orient(a, b, p) != 0.0:
        return False
    return (min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= p[1] <= max(a[1], b[1]))


def _segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool:
    d1 = _orient(q1, q2, p1)
    d2 = _orient(q1, q2, p2)
    d3 = _orient(p1, p2, q1)
    d4 = _orient(p1, p2, q2)
    if ((d1 > 0 > d2) or (d1 < 0 < d2)) and ((d3 > 0 > d4) or (d3 < 0 < d4)):
        return True
    return (_on_segment(p1, q1, q2) or _on_segment(p2, q1, q2)
            or _on_segment(q1, p1, p2) or _on_segment(q2, p1, p2))


@dataclass(frozen=True)
class Polygon:
    """Simple polygon in planar meters. Closure is implicit; do not repeat the first vertex."""

    vertices: tuple[Point, ...]

    def __init__(self, vertices: Iterable[Sequence[float]]):
        pts = tuple((float(x), float(y)) for x, y in vertices)
        object.__setattr__(self, "vertices", pts)
        self._validate()

    def _validate(self) -> None:
        pts = self.vertices
        n = len(pts)
        if n < 3:
            raise PolygonError(f"polygon needs at least 3 vertices, got {n}")
        for x, y in pts:
            if not (math.isfinite(x) and math.isfinite(y)):
                raise PolygonError("polygon vertices must be finite")
        for i in range(n):
            if pts[i] == pts[(i + 1) % n]:
                raise PolygonError(f"vertices {i} and {(i + 1) % n} coincide")
        for i in range(n):
            a, b, c = pts[i - 1], pts[i], pts[(i + 1) % n]
            folds_back = ((a[0] - b[0]) * (c[0] - b[0]) + (a[1] - b[1]) * (c[1] - b[1])) > 0
            if _orient(a, b, c) == 0.0 and folds_back:
                raise PolygonError(f"edges meeting at vertex {i} overlap")
        edges = [(pts[i], pts[(i + 1) % n]) for i in range(n)]
        for i in range(n):
            for j in range(i + 2, n):
                if i == 0 and j == n - 1:
                    continue
                if _segments_intersect(*edges[i], *edges[j]):
                    raise PolygonError(f"edges {i} and {j} intersect")


@dataclass(frozen=True)
class Mbr:
    min_x: float
    min_y: float
    max_x: float
    max_y: float

    @property
    def width(self) -> float:
        return self.max_x - self.min_x

    @property
    def height(self) -> float:
        return self.max_y - self.min_y

    @property
    def center(self) -> Point:
        return ((self.min_x + self.max_x) / 2.0, (self.min_y + self.max_y) / 2.0)


def compute_mbr(polygon: Polygon) -> Mbr:
    """Axis-aligned bounding rectangle from vertex extrema."""
    xs = [p[0] for p in polygon.vertices]
    ys = [p[1] for p in polygon.vertices]
    mbr = Mbr(min(xs), min(ys), max(xs), max(ys))
    if not (mbr.min_x < mbr.max_x and mbr.min_y < mbr.max_y):
        raise PolygonError("degenerate polygon: zero-area bounding rectangle")
    return mbr


def point_in_polygon(p: Sequence[float], polygon: Polygon) -> bool:
    """Even-odd ray casting. Points on an edge or vertex count as inside."""
    x, y = float(p[0]), float(p[1])
    pts = polygon.vertices
    n = len(pts)
    inside = False
    for i in range(n):
        a = pts[i]
        b = pts[(i + 1) % n]
        if _on_segment((x, y), a, b):
            return True
        (xa, ya), (xb, yb) = a, b
        if (ya > y) != (yb > y):
            x_cross = xa + (y - ya) * (xb - xa) / (yb - ya)
            if x < x_cross:
                inside = not inside
    return inside


def cell_centers(mbr: Mbr, rows: int, cols: int) -> tuple[np.ndarray, np.ndarray]:
    """Center coordinates (xs per column, ys per row) of a rows x cols split of ``mbr``."""
    cw = mbr.width / cols
    ch = mbr.height / rows
    xs = mbr.min_x + (np.arange(cols) + 0.5) * cw
    ys = mbr.max_y - (np.arange(rows) + 0.5) * ch
    return xs, ys


def grid_shape_for_cell_size(mbr: Mbr, cell_size: float) -> tuple[int, int]:
    if not cell_size > 0:
        raise ValueError("cell_size must be positive")
    return math.ceil(mbr.height / cell_size), math.ceil(mbr.width / cell_size)


def rasterize(polygon: Polygon, rows: int | None = None, cols: int | None = None,
              starts: Sequence[tuple[int, int]] | None = None,
              cell_size: float | None = None) -> GridMap:
    """Split the polygon's MBR into equal cells; a cell is visitable iff its center is inside.

    Either ``rows``/``cols`` or ``cell_size`` (meters, rows/cols by ceiling division)
    must be given. Without explicit ``starts`` the first visitable cell in row-major
    order is used.
    """
    mbr = compute_mbr(polygon)
    if cell_size is not None:
        if rows is not None or cols is not None:
            raise ValueError("give either rows/cols or cell_size, not both")
        rows, cols = grid_shape_for_cell_size(mbr, cell_size)
    if rows is None or cols is None:
        raise ValueError("rows and cols are required")
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")

    xs, ys = cell_centers(mbr, rows, cols)
    mask = np.zeros((rows, cols), dtype=bool)
    for r in range(rows):
        for c in range(cols):
            mask[r, c] = point_in_polygon((xs[c], ys[r]), polygon)
    if not mask.any():
        raise NoVisitableCells(f"no cell center of the {rows}x{cols} grid lies inside the polygon")
    if starts is None:
        r, c = np.argwhere(mask)[0]
        starts = [(int(r), int(c))]
    return GridMap(mask, starts)
