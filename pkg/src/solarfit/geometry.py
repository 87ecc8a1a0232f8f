"""Planar polygon primitives for rooftop work.

Everything operates in a locally projected metric frame (east = +x,
north = +y) with plain double precision.  Containment is *closed*: points
within ``CONTAINMENT_TOL`` metres of a ring count as inside, so rectangles
flush with a roof edge are kept instead of flickering on float noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

EARTH_RADIUS_M = 6_371_008.8
CONTAINMENT_TOL = 1e-9  # metres

__all__ = [
    "CONTAINMENT_TOL",
    "EARTH_RADIUS_M",
    "FootprintPolygon",
    "InvalidGeometryError",
    "OrientedRect",
    "Point2",
    "convex_hull",
    "make_footprint",
    "meters_to_lonlat",
    "min_bounding_rect",
    "points_in_polygon",
    "polygon_area",
    "polygon_centroid",
    "project_to_meters",
    "rect_inside_polygon",
    "signed_ring_area",
]


class InvalidGeometryError(ValueError):
    """A ring or polygon violates the geometry invariants."""


class Point2(NamedTuple):
    x: float
    y: float


def _ring_array(ring) -> np.ndarray:
    arr = np.asarray(ring, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InvalidGeometryError(f"ring must be (n, 2) coordinates, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise InvalidGeometryError("ring contains non-finite coordinates")
    return np.ascontiguousarray(arr)


def signed_ring_area(ring) -> float:
    """Shoelace area of an open ring; positive for counter-clockwise order."""
    r = _ring_array(ring)
    x, y = r[:, 0], r[:, 1]
    x2, y2 = np.roll(x, -1), np.roll(y, -1)
    return 0.5 * float(np.dot(x, y2) - np.dot(y, x2))


@dataclass(eq=False)
class FootprintPolygon:
    """One building's rooftop geometry in projected metres.

    ``exterior`` is an open counter-clockwise ring; ``holes`` are open
    clockwise rings.  Use :func:`make_footprint` to build validated,
    canonically oriented instances from raw coordinates.
    """

    id: str
    exterior: np.ndarray
    holes: list[np.ndarray] = field(default_factory=list)

    def rings(self) -> list[np.ndarray]:
        return [self.exterior, *self.holes]


def _strip_closure(ring: np.ndarray) -> np.ndarray:
    if len(ring) >= 2 and ring[0, 0] == ring[-1, 0] and ring[0, 1] == ring[-1, 1]:
        return ring[:-1]
    return ring


def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _on_segment(a, b, p) -> bool:
    # collinearity assumed; checks p within the closed bounding box of ab
    return (
        min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
        and min(a[1], b[1]) <= p[1] <= max(a[1], b[1])
    )


def _segments_touch(p1, p2, p3, p4) -> bool:
    """True if closed segments p1p2 and p3p4 share any point."""
    d1 = _orient(p3, p4, p1)
    d2 = _orient(p3, p4, p2)
    d3 = _orient(p1, p2, p3)
    d4 = _orient(p1, p2, p4)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and (
        (d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)
    ):
        return True
    if d1 == 0 and _on_segment(p3, p4, p1):
        return True
    if d2 == 0 and _on_segment(p3, p4, p2):
        return True
    if d3 == 0 and _on_segment(p1, p2, p3):
        return True
    if d4 == 0 and _on_segment(p1, p2, p4):
        return True
    return False


def _ring_is_simple(ring: np.ndarray) -> bool:
    pts = [tuple(p) for p in ring]
    n = len(pts)
    for i in range(n):
        a1, a2 = pts[i], pts[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue  # adjacent edges legitimately share a vertex
            b1, b2 = pts[j], pts[(j + 1) % n]
            if _segments_touch(a1, a2, b1, b2):
                return False
    return True


def _validate_ring(ring: np.ndarray, what: str) -> None:
    if len(ring) < 3:
        raise InvalidGeometryError(f"{what} has fewer than 3 vertices")
    same = (ring[:, 0] == np.roll(ring[:, 0], -1)) & (ring[:, 1] == np.roll(ring[:, 1], -1))
    if same.any():
        raise InvalidGeometryError(f"{what} has identical consecutive vertices")
    if signed_ring_area(ring) == 0.0:
        raise InvalidGeometryError(f"{what} has zero area")
    if not _ring_is_simple(ring):
        raise InvalidGeometryError(f"{what} is self-intersecting")


def make_footprint(
    fid: str,
    exterior,
    holes: Iterable = (),
    validate: bool = True,
) -> FootprintPolygon:
    """Build a canonical footprint: CCW exterior, CW holes, closure stripped.

    Rings may be given either open or explicitly closed.  Self-intersecting
    rings are rejected, not repaired.
    """
    ext = _strip_closure(_ring_array(exterior))
    hs = [_strip_closure(_ring_array(h)) for h in holes]
    if validate:
        _validate_ring(ext, "exterior ring")
        for i, h in enumerate(hs):
            _validate_ring(h, f"hole ring {i}")
    if signed_ring_area(ext) < 0:
        ext = ext[::-1].copy()
    hs = [h[::-1].copy() if signed_ring_area(h) > 0 else h for h in hs]
    if validate:
        net = abs(signed_ring_area(ext)) - math.fsum(abs(signed_ring_area(h)) for h in hs)
        if net <= 0:
            raise InvalidGeometryError("holes consume the whole exterior area")
    return FootprintPolygon(id=str(fid), exterior=ext, holes=hs)


def polygon_area(poly: FootprintPolygon) -> float:
    """Exterior area minus hole areas, in square metres."""
    if len(poly.exterior) < 3:
        raise InvalidGeometryError("degenerate ring: fewer than 3 vertices")
    area = abs(signed_ring_area(poly.exterior))
    area -= math.fsum(abs(signed_ring_area(h)) for h in poly.holes)
    if area <= 0.0:
        raise InvalidGeometryError("degenerate ring: non-positive area")
    return area


def polygon_centroid(poly: FootprintPolygon) -> Point2:
    """Area centroid of the exterior minus holes."""
    sa = 0.0
    sx = 0.0
    sy = 0.0
    for ring in poly.rings():
        x, y = ring[:, 0], ring[:, 1]
        x2, y2 = np.roll(x, -1), np.roll(y, -1)
        w = x * y2 - x2 * y
        sa += float(w.sum())
        sx += float(((x + x2) * w).sum())
        sy += float(((y + y2) * w).sum())
    if sa == 0.0:
        raise InvalidGeometryError("degenerate ring: zero area centroid")
    return Point2(sx / (3.0 * sa), sy / (3.0 * sa))


def _hull_chain(points: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Andrew monotone chain; CCW, collinear interior points removed."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts
    lower: list[tuple[float, float]] = []
    for p in pts:
        while len(lower) >= 2 and _orient(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[tuple[float, float]] = []
    for p in reversed(pts):
        while len(upper) >= 2 and _orient(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def convex_hull(points: Sequence) -> list[Point2]:
    """Counter-clockwise convex hull of a point set.

    Collinear input collapses to a 2-point segment; a single point yields
    itself.
    """
    raw = [(float(p[0]), float(p[1])) for p in points]
    if not raw:
        raise InvalidGeometryError("convex_hull of empty point set")
    return [Point2(*p) for p in _hull_chain(raw)]


@dataclass(frozen=True)
class OrientedRect:
    """Rotated rectangle: ``axis_angle`` in [0, pi) points along the long side."""

    center: Point2
    axis_angle: float
    length: float
    width: float

    def __post_init__(self) -> None:
        if not (self.length >= self.width > 0.0):
            raise InvalidGeometryError(
                f"rectangle needs length >= width > 0, got {self.length} x {self.width}"
            )
        if not (0.0 <= self.axis_angle < math.pi):
            object.__setattr__(self, "axis_angle", self.axis_angle % math.pi)

    def corners(self) -> list[Point2]:
        """Four corners, CCW, starting at the (-length/2, -width/2) one."""
        c, s = math.cos(self.axis_angle), math.sin(self.axis_angle)
        hl, hw = 0.5 * self.length, 0.5 * self.width
        cx, cy = self.center
        return [
            Point2(cx + u * c - v * s, cy + u * s + v * c)
            for u, v in ((-hl, -hw), (hl, -hw), (hl, hw), (-hl, hw))
        ]

    @property
    def area(self) -> float:
        return self.length * self.width


def min_bounding_rect(poly: FootprintPolygon) -> OrientedRect:
    """Minimum-area rotated rectangle enclosing the exterior ring.

    One side is collinear with a convex-hull edge (rotating calipers).  Ties
    within 1e-12 relative area resolve to the smallest axis_angle in [0, pi).
    """
    hull = _hull_chain([tuple(p) for p in poly.exterior])
    if len(hull) < 3:
        raise InvalidGeometryError("degenerate polygon: hull has fewer than 3 vertices")
    hx = [p[0] for p in hull]
    hy = [p[1] for p in hull]
    n = len(hull)

    candidates = []  # (area, axis_angle, theta, umin, umax, vmin, vmax)
    for i in range(n):
        dx = hx[(i + 1) % n] - hx[i]
        dy = hy[(i + 1) % n] - hy[i]
        theta = math.atan2(dy, dx)
        c, s = math.cos(theta), math.sin(theta)
        umin = umax = hx[0] * c + hy[0] * s
        vmin = vmax = -hx[0] * s + hy[0] * c
        for j in range(1, n):
            u = hx[j] * c + hy[j] * s
            v = -hx[j] * s + hy[j] * c
            if u < umin:
                umin = u
            elif u > umax:
                umax = u
            if v < vmin:
                vmin = v
            elif v > vmax:
                vmax = v
        eu = umax - umin
        ev = vmax - vmin
        angle = theta % math.pi if eu >= ev else (theta + 0.5 * math.pi) % math.pi
        candidates.append((eu * ev, angle, theta, umin, umax, vmin, vmax))

    best_area = min(c[0] for c in candidates)
    finalists = [c for c in candidates if c[0] <= best_area * (1.0 + 1e-12)]
    area, angle, theta, umin, umax, vmin, vmax = min(finalists, key=lambda c: c[1])

    c, s = math.cos(theta), math.sin(theta)
    uc, vc = 0.5 * (umin + umax), 0.5 * (vmin + vmax)
    center = Point2(uc * c - vc * s, uc * s + vc * c)
    eu, ev = umax - umin, vmax - vmin
    if eu <= 0 or ev <= 0:
        raise InvalidGeometryError("degenerate polygon: zero-extent bounding rectangle")
    length, width = (eu, ev) if eu >= ev else (ev, eu)
    return OrientedRect(center=center, axis_angle=angle, length=length, width=width)


# ---------------------------------------------------------------------------
# containment


def _ring_contains(points: np.ndarray, ring: np.ndarray, tol: float):
    """Closed and strict containment masks of points against one ring.

    Returns (closed, strict): ``closed`` treats within-``tol`` boundary
    contact as inside; ``strict`` requires the even-odd interior clear of the
    boundary band.
    """
    a = ring
    b = np.roll(ring, -1, axis=0)
    d = b - a
    l2 = (d * d).sum(axis=1)
    l2 = np.where(l2 == 0.0, 1.0, l2)

    ap = points[:, None, :] - a[None, :, :]
    t = np.clip((ap * d[None, :, :]).sum(axis=2) / l2[None, :], 0.0, 1.0)
    proj = a[None, :, :] + t[:, :, None] * d[None, :, :]
    dist2 = ((points[:, None, :] - proj) ** 2).sum(axis=2).min(axis=1)
    on_boundary = dist2 <= tol * tol

    px = points[:, 0][:, None]
    py = points[:, 1][:, None]
    ay, by = a[:, 1][None, :], b[:, 1][None, :]
    ax, bx = a[:, 0][None, :], b[:, 0][None, :]
    cond = (ay > py) != (by > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_int = ax + (py - ay) * (bx - ax) / (by - ay)
    crossings = (cond & (px < x_int)).sum(axis=1)
    odd = crossings % 2 == 1

    return odd | on_boundary, odd & ~on_boundary


def points_in_polygon(points, poly: FootprintPolygon, tol: float = CONTAINMENT_TOL) -> np.ndarray:
    """Closed containment of many points: inside the exterior, outside every
    open hole interior."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    inside, _ = _ring_contains(pts, poly.exterior, tol)
    for h in poly.holes:
        _, strict = _ring_contains(pts, h, tol)
        inside &= ~strict
    return inside


def _ring_is_convex(ring: np.ndarray) -> bool:
    a = ring
    b = np.roll(ring, -1, axis=0)
    e = b - a
    e2 = np.roll(e, -1, axis=0)
    cross = e[:, 0] * e2[:, 1] - e[:, 1] * e2[:, 0]
    lim = -1e-9 * np.sqrt((e * e).sum(axis=1) * (e2 * e2).sum(axis=1))
    return bool((cross >= lim).all())


class _FramePolygon:
    """A polygon transformed into a rotated local frame.

    Supports testing many axis-aligned cells (in frame coordinates) for
    closed containment at once; this is the single containment predicate
    shared by :func:`rect_inside_polygon` and the panel fitter.
    """

    __slots__ = ("exterior", "holes", "convex", "tol")

    def __init__(self, exterior, holes, convex, tol):
        self.exterior = exterior
        self.holes = holes
        self.convex = convex
        self.tol = tol

    @classmethod
    def from_polygon(
        cls,
        poly: FootprintPolygon,
        origin: tuple[float, float],
        angle: float,
        tol: float = CONTAINMENT_TOL,
    ) -> "_FramePolygon":
        c, s = math.cos(angle), math.sin(angle)
        ox, oy = origin

        def tf(ring: np.ndarray) -> np.ndarray:
            x = ring[:, 0] - ox
            y = ring[:, 1] - oy
            return np.stack([x * c + y * s, -x * s + y * c], axis=1)

        ext = tf(poly.exterior)
        holes = [tf(h) for h in poly.holes]
        convex = not holes and _ring_is_convex(ext)
        return cls(ext, holes, convex, tol)

    def cells_inside(self, u0: np.ndarray, v0: np.ndarray, du: float, dv: float) -> np.ndarray:
        """Closed containment of cells [u0, u0+du] x [v0, v0+dv]; boolean per cell."""
        k = len(u0)
        if k == 0:
            return np.zeros(0, dtype=bool)
        cu = np.stack([u0, u0 + du, u0 + du, u0], axis=1).ravel()
        cv = np.stack([v0, v0, v0 + dv, v0 + dv], axis=1).ravel()
        corners = np.stack([cu, cv], axis=1)

        if self.convex:
            ok = self._points_in_convex(corners)
            return ok.reshape(k, 4).all(axis=1)

        keep, _ = _ring_contains(corners, self.exterior, self.tol)
        out = keep.reshape(k, 4).all(axis=1)
        for h in self.holes:
            _, strict = _ring_contains(corners, h, self.tol)
            out &= ~strict.reshape(k, 4).any(axis=1)
        for ring in (self.exterior, *self.holes):
            np.logical_and(out, ~self._ring_crosses_cells(ring, u0, v0, du, dv), out=out)
            np.logical_and(out, ~self._ring_vertex_in_cells(ring, u0, v0, du, dv), out=out)
        return out

    def _points_in_convex(self, pts: np.ndarray) -> np.ndarray:
        a = self.exterior
        b = np.roll(a, -1, axis=0)
        dx = (b[:, 0] - a[:, 0])[:, None]
        dy = (b[:, 1] - a[:, 1])[:, None]
        cross = dx * (pts[:, 1][None, :] - a[:, 1][:, None]) - dy * (
            pts[:, 0][None, :] - a[:, 0][:, None]
        )
        lim = -self.tol * np.hypot(dx, dy)
        return (cross >= lim).all(axis=0)

    def _ring_crosses_cells(self, ring, u0, v0, du, dv) -> np.ndarray:
        """Proper crossings between ring edges and cell edges (touching is fine)."""
        tol = self.tol
        a = ring
        b = np.roll(ring, -1, axis=0)
        crossed = np.zeros(len(u0), dtype=bool)

        def sweep(ap, bp, aq, bq, lo, hi, lines):
            # lines: per-cell constant coordinate of the cell edge in the p axis
            for line in lines:
                dpa = ap[:, None] - line[None, :]
                dpb = bp[:, None] - line[None, :]
                straddle = ((dpa < -tol) & (dpb > tol)) | ((dpb < -tol) & (dpa > tol))
                if not straddle.any():
                    continue
                with np.errstate(divide="ignore", invalid="ignore"):
                    t = dpa / (dpa - dpb)
                    q_int = aq[:, None] + t * (bq - aq)[:, None]
                hit = straddle & (q_int > lo[None, :] + tol) & (q_int < hi[None, :] - tol)
                crossed_local = hit.any(axis=0)
                np.logical_or(crossed, crossed_local, out=crossed)

        # horizontal cell edges: v = const, u in (u0, u0+du)
        sweep(a[:, 1], b[:, 1], a[:, 0], b[:, 0], u0, u0 + du, (v0, v0 + dv))
        # vertical cell edges: u = const, v in (v0, v0+dv)
        sweep(a[:, 0], b[:, 0], a[:, 1], b[:, 1], v0, v0 + dv, (u0, u0 + du))
        return crossed

    def _ring_vertex_in_cells(self, ring, u0, v0, du, dv) -> np.ndarray:
        tol = self.tol
        vu = ring[:, 0][:, None]
        vv = ring[:, 1][:, None]
        inside = (
            (vu > u0[None, :] + tol)
            & (vu < (u0 + du)[None, :] - tol)
            & (vv > v0[None, :] + tol)
            & (vv < (v0 + dv)[None, :] - tol)
        )
        return inside.any(axis=0)


def rect_inside_polygon(
    rect: OrientedRect, poly: FootprintPolygon, tol: float = CONTAINMENT_TOL
) -> bool:
    """Closed containment of a rotated rectangle in a polygon.

    True iff all four corners are inside (holes excluded), no rectangle edge
    properly crosses a polygon edge, and no ring vertex lies strictly inside
    the rectangle.  Boundary contact within ``tol`` counts as inside.
    """
    origin = rect.corners()[0]
    frame = _FramePolygon.from_polygon(poly, (origin.x, origin.y), rect.axis_angle, tol)
    return bool(
        frame.cells_inside(np.zeros(1), np.zeros(1), rect.length, rect.width)[0]
    )


# ---------------------------------------------------------------------------
# local projection


def project_to_meters(
    lonlat_ring: Sequence[tuple[float, float]], ref: tuple[float, float]
) -> list[Point2]:
    """Local equirectangular projection of (lon, lat) degrees about ``ref``."""
    lon0, lat0 = float(ref[0]), float(ref[1])
    if not -90.0 < lat0 < 90.0:
        raise InvalidGeometryError(f"reference latitude {lat0} out of (-90, 90)")
    kx = EARTH_RADIUS_M * math.cos(math.radians(lat0))
    out = []
    for lon, lat in lonlat_ring:
        if not -90.0 < lat < 90.0:
            raise InvalidGeometryError(f"latitude {lat} out of (-90, 90)")
        out.append(
            Point2(math.radians(lon - lon0) * kx, math.radians(lat - lat0) * EARTH_RADIUS_M)
        )
    return out


def meters_to_lonlat(
    points: Sequence[tuple[float, float]], ref: tuple[float, float]
) -> list[tuple[float, float]]:
    """Inverse of :func:`project_to_meters`."""
    lon0, lat0 = float(ref[0]), float(ref[1])
    kx = EARTH_RADIUS_M * math.cos(math.radians(lat0))
    return [
        (lon0 + math.degrees(x / kx), lat0 + math.degrees(y / EARTH_RADIUS_M))
        for x, y in points
    ]
