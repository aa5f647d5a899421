"""Planar geometric primitives used by the matching criteria.

All angles are signed radians in (-pi, pi], counterclockwise positive.
Coordinates live in a local metric plane (meters); inputs arriving in
geographic lon/lat degrees are first mapped with :func:`local_projection`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

from .errors import DegenerateGeometry, InvalidCoordinate

EARTH_RADIUS_M = 6_371_000.0

TWO_PI = 2.0 * math.pi


class Point(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class DirectedSegment:
    """Oriented segment from ``a`` to ``b``; zero length is rejected."""

    a: Point
    b: Point

    def __post_init__(self):
        if self.a == self.b:
            raise DegenerateGeometry(f"zero-length segment at {self.a}")

    @property
    def dx(self) -> float:
        return self.b.x - self.a.x

    @property
    def dy(self) -> float:
        return self.b.y - self.a.y

    def length(self) -> float:
        return math.hypot(self.dx, self.dy)


@dataclass(frozen=True)
class AngleSequence:
    """Turn angles of a polyline and its link angles against a base segment.

    ``running[i]`` is the signed turn at interior vertex i+1; ``straight[s]``
    is the signed angle of link s against the base direction.  The two are
    coupled: straight[i+1] = straight[i] + running[i] up to wrapping.
    """

    running: tuple[float, ...]
    straight: tuple[float, ...]


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    r = (a + math.pi) % TWO_PI - math.pi
    if r == -math.pi:
        return math.pi
    return r


def euclidean(p: Point | tuple[float, float], q: Point | tuple[float, float]) -> float:
    return math.hypot(q[0] - p[0], q[1] - p[1])


def local_projection(
    origin_lonlat: tuple[float, float],
    points: Iterable[tuple[float, float]],
) -> list[Point]:
    """Project lon/lat degree pairs onto a local metric plane.

    Equirectangular about ``origin_lonlat``: x = R * dlon * cos(lat0),
    y = R * dlat (angles in radians).  Accurate to well under 0.1% for
    city-scale extents, which is all the matching pipeline needs.
    """
    lon0, lat0 = origin_lonlat
    _check_lonlat(lon0, lat0)
    cos_lat0 = math.cos(math.radians(lat0))
    out = []
    for lon, lat in points:
        _check_lonlat(lon, lat)
        x = EARTH_RADIUS_M * math.radians(lon - lon0) * cos_lat0
        y = EARTH_RADIUS_M * math.radians(lat - lat0)
        out.append(Point(x, y))
    return out


def _check_lonlat(lon: float, lat: float) -> None:
    if not (math.isfinite(lon) and math.isfinite(lat)):
        raise InvalidCoordinate(f"non-finite coordinate ({lon}, {lat})")
    if not -180.0 <= lon <= 180.0:
        raise InvalidCoordinate(f"longitude {lon} outside [-180, 180]")
    if not -90.0 <= lat <= 90.0:
        raise InvalidCoordinate(f"latitude {lat} outside [-90, 90]")


def signed_angle(u: DirectedSegment, v: DirectedSegment) -> float:
    """Signed angle in (-pi, pi] rotating the direction of u onto v (CCW > 0)."""
    cross = u.dx * v.dy - u.dy * v.dx
    dot = u.dx * v.dx + u.dy * v.dy
    a = math.atan2(cross, dot)
    if a == -math.pi:
        return math.pi
    return a


def angle_sequence(path: Sequence[Point], base: DirectedSegment) -> AngleSequence:
    """Running and straight-line angles of ``path`` against ``base``.

    For a path of points p_0..p_n there are n links; ``running`` holds the
    n-1 turns at interior vertices and ``straight`` the n link angles
    against the base direction.
    """
    if len(path) < 2:
        raise DegenerateGeometry("path needs at least 2 points")
    links = []
    for p, q in zip(path, path[1:]):
        if p == q:
            raise DegenerateGeometry(f"duplicate consecutive point {p}")
        links.append(DirectedSegment(Point(*p), Point(*q)))
    running = tuple(signed_angle(u, v) for u, v in zip(links, links[1:]))
    straight = tuple(signed_angle(base, link) for link in links)
    return AngleSequence(running=running, straight=straight)


def absolute_area(path: Sequence[Point], base: DirectedSegment) -> float:
    """Unsigned area between a polyline and a base segment.

    Works in the frame where base.a is the origin and the base direction is
    the +x axis; each path point maps to (t, d) with d the signed
    perpendicular offset.  Sums |integral of d dt| per consecutive pair,
    splitting at the d zero crossing when the offsets change sign so
    opposite lobes accumulate instead of cancelling.
    """
    if len(path) < 2:
        raise DegenerateGeometry("path needs at least 2 points")
    blen = base.length()
    ux, uy = base.dx / blen, base.dy / blen
    ts = []
    ds = []
    for p in path:
        rx, ry = p[0] - base.a.x, p[1] - base.a.y
        ts.append(rx * ux + ry * uy)
        ds.append(-rx * uy + ry * ux)
    area = 0.0
    for i in range(len(path) - 1):
        t0, t1 = ts[i], ts[i + 1]
        d0, d1 = ds[i], ds[i + 1]
        if (d0 > 0.0 and d1 < 0.0) or (d0 < 0.0 and d1 > 0.0):
            tau = t0 + (t1 - t0) * d0 / (d0 - d1)
            area += abs(0.5 * d0 * (tau - t0)) + abs(0.5 * d1 * (t1 - tau))
        else:
            area += abs(0.5 * (d0 + d1) * (t1 - t0))
    return area
