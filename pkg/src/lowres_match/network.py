"""Street and measurement network loading, validation, and spatial queries.

The street network H is directed with metric edge lengths; the measurement
network L is undirected, one sensor id per segment.  Input polylines are cut
into simple two-point segments at load time.  Coordinates may arrive either
already projected (meters) or as lon/lat degrees, in which case they are
mapped to a shared local plane.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

from .errors import EmptyNetwork, SchemaError
from .geometry import Point, euclidean, local_projection

# Stored lengths may legitimately sit slightly under the straight-line
# distance (projection rounding); anything below this factor is rejected.
LENGTH_UNDERCUT_FACTOR = 0.99
_LENGTH_EPS = 1e-6


class EdgeRecord(NamedTuple):
    from_node: str
    to_node: str
    length_m: float


class MeasurementSegment(NamedTuple):
    id: str
    sensor_id: str
    a: Point
    b: Point
    length_m: float


@dataclass
class StreetNetwork:
    nodes: dict[str, Point]
    edges: dict[str, EdgeRecord]
    origin_lonlat: tuple[float, float] | None = None
    out_adjacency: dict[str, list[str]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.out_adjacency:
            adj: dict[str, list[str]] = {nid: [] for nid in self.nodes}
            for eid in sorted(self.edges):
                adj[self.edges[eid].from_node].append(eid)
            self.out_adjacency = adj


@dataclass
class MeasurementNetwork:
    segments: dict[str, MeasurementSegment]

    def endpoint_count(self) -> int:
        pts = set()
        for seg in self.segments.values():
            pts.add(seg.a)
            pts.add(seg.b)
        return len(pts)


def build_street_network(
    nodes: dict[str, Point],
    edges: dict[str, EdgeRecord],
    origin_lonlat: tuple[float, float] | None = None,
) -> StreetNetwork:
    """Validate invariants and assemble a StreetNetwork."""
    for eid, e in edges.items():
        if e.from_node not in nodes or e.to_node not in nodes:
            raise SchemaError(f"edge {eid} references unknown node")
        if not (e.length_m > 0.0):
            raise SchemaError(f"edge {eid} has nonpositive length {e.length_m}")
        straight = euclidean(nodes[e.from_node], nodes[e.to_node])
        if e.length_m + _LENGTH_EPS < LENGTH_UNDERCUT_FACTOR * straight:
            raise SchemaError(
                f"edge {eid} length {e.length_m} undercuts straight-line {straight:.3f}"
            )
    return StreetNetwork(nodes=nodes, edges=edges, origin_lonlat=origin_lonlat)


def _project_if_needed(
    coords: list[tuple[float, float]],
    coords_mode: str,
    origin: tuple[float, float] | None,
) -> tuple[list[Point], tuple[float, float] | None]:
    if coords_mode == "metric":
        return [Point(float(x), float(y)) for x, y in coords], None
    if coords_mode != "lonlat":
        raise SchemaError(f"unknown coords mode {coords_mode!r}")
    if origin is None:
        lons = [c[0] for c in coords]
        lats = [c[1] for c in coords]
        origin = ((min(lons) + max(lons)) / 2.0, (min(lats) + max(lats)) / 2.0)
    return local_projection(origin, coords), origin


def load_street_network(
    nodes_file: str,
    edges_file: str,
    coords: str = "metric",
    origin: tuple[float, float] | None = None,
) -> StreetNetwork:
    """Load H from the two CSV files (``node_id,x,y`` / ``edge_id,from,to,length_m``).

    A missing or empty edge length is filled with the straight-line distance
    between its endpoints.
    """
    raw_nodes: list[tuple[str, float, float]] = []
    seen: set[str] = set()
    with open(nodes_file, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        _require_columns(reader, {"node_id", "x", "y"}, nodes_file)
        for row_no, row in enumerate(reader, start=1):
            nid = row["node_id"]
            if nid in seen:
                raise SchemaError(f"duplicate node id {nid!r}", row=row_no)
            seen.add(nid)
            try:
                raw_nodes.append((nid, float(row["x"]), float(row["y"])))
            except (TypeError, ValueError):
                raise SchemaError(f"bad coordinate for node {nid!r}", row=row_no)

    pts, origin_used = _project_if_needed(
        [(x, y) for _, x, y in raw_nodes], coords, origin
    )
    nodes = {nid: pt for (nid, _, _), pt in zip(raw_nodes, pts)}

    edges: dict[str, EdgeRecord] = {}
    with open(edges_file, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        _require_columns(reader, {"edge_id", "from", "to"}, edges_file)
        for row_no, row in enumerate(reader, start=1):
            eid = row["edge_id"]
            if eid in edges:
                raise SchemaError(f"duplicate edge id {eid!r}", row=row_no)
            u, v = row["from"], row["to"]
            if u not in nodes:
                raise SchemaError(f"edge {eid!r} references unknown node {u!r}", row=row_no)
            if v not in nodes:
                raise SchemaError(f"edge {eid!r} references unknown node {v!r}", row=row_no)
            raw_len = (row.get("length_m") or "").strip()
            if raw_len:
                try:
                    length = float(raw_len)
                except ValueError:
                    raise SchemaError(f"bad length for edge {eid!r}", row=row_no)
                if not (length > 0.0):
                    raise SchemaError(
                        f"edge {eid!r} has nonpositive length {length}", row=row_no
                    )
            else:
                length = euclidean(nodes[u], nodes[v])
                if length <= 0.0:
                    raise SchemaError(
                        f"edge {eid!r} joins coincident nodes and carries no length",
                        row=row_no,
                    )
            edges[eid] = EdgeRecord(u, v, length)

    return build_street_network(nodes, edges, origin_lonlat=origin_used)


def _require_columns(reader: csv.DictReader, needed: set[str], path: str) -> None:
    have = set(reader.fieldnames or ())
    missing = needed - have
    if missing:
        raise SchemaError(f"{path}: missing columns {sorted(missing)}")


def load_measurements(
    geo_file: str,
    coords: str = "metric",
    origin: tuple[float, float] | None = None,
) -> MeasurementNetwork:
    """Load L, cutting every input polyline into simple two-point segments.

    Accepts a GeoJSON FeatureCollection of LineStrings carrying a
    ``sensor_id`` property, or the flat CSV alternative
    ``segment_id,sensor_id,ax,ay,bx,by``.
    """
    if geo_file.endswith(".csv"):
        return _load_measurements_csv(geo_file, coords, origin)
    return _load_measurements_geojson(geo_file, coords, origin)


def _load_measurements_geojson(path, coords, origin) -> MeasurementNetwork:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    features = doc.get("features")
    if doc.get("type") != "FeatureCollection" or features is None:
        raise SchemaError(f"{path}: not a GeoJSON FeatureCollection")

    segments: dict[str, MeasurementSegment] = {}
    for idx, feat in enumerate(features):
        geom = feat.get("geometry") or {}
        if geom.get("type") != "LineString":
            raise SchemaError(f"feature {idx}: geometry must be a LineString")
        verts = geom.get("coordinates") or []
        if len(verts) < 2:
            raise SchemaError(f"feature {idx}: LineString needs at least 2 vertices")
        props = feat.get("properties") or {}
        sensor = props.get("sensor_id")
        if sensor is None or str(sensor) == "":
            raise SchemaError(f"feature {idx}: missing sensor_id property")
        fid = str(feat.get("id", idx))
        pts, origin = _project_if_needed(
            [(float(v[0]), float(v[1])) for v in verts], coords, origin
        )
        for i, (a, b) in enumerate(zip(pts, pts[1:])):
            if a == b:
                raise SchemaError(
                    f"feature {idx}: duplicate consecutive vertex at index {i}"
                )
            sid = f"{fid}#{i}"
            if sid in segments:
                raise SchemaError(f"duplicate segment id {sid!r}")
            segments[sid] = MeasurementSegment(sid, str(sensor), a, b, euclidean(a, b))
    return MeasurementNetwork(segments=segments)


def _load_measurements_csv(path, coords, origin) -> MeasurementNetwork:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        _require_columns(
            reader, {"segment_id", "sensor_id", "ax", "ay", "bx", "by"}, path
        )
        for row_no, row in enumerate(reader, start=1):
            sid = row["segment_id"]
            sensor = row["sensor_id"]
            if not sensor:
                raise SchemaError(f"segment {sid!r}: missing sensor_id", row=row_no)
            try:
                a = (float(row["ax"]), float(row["ay"]))
                b = (float(row["bx"]), float(row["by"]))
            except (TypeError, ValueError):
                raise SchemaError(f"segment {sid!r}: bad coordinates", row=row_no)
            rows.append((row_no, sid, sensor, a, b))

    flat = [c for r in rows for c in (r[3], r[4])]
    pts, _ = _project_if_needed(flat, coords, origin)
    segments: dict[str, MeasurementSegment] = {}
    for (row_no, sid, sensor, _, _), a, b in zip(rows, pts[0::2], pts[1::2]):
        if sid in segments:
            raise SchemaError(f"duplicate segment id {sid!r}", row=row_no)
        if a == b:
            raise SchemaError(f"segment {sid!r}: endpoints coincide", row=row_no)
        segments[sid] = MeasurementSegment(sid, sensor, a, b, euclidean(a, b))
    return MeasurementNetwork(segments=segments)


class SpatialIndex:
    """Static kd-tree over street nodes.

    Nodes are held in the lexicographic order of their ids, so the integer
    position doubles as a deterministic tie-break: queries sort by
    (distance, node id).
    """

    __slots__ = ("ids", "xs", "ys", "_tree")

    def __init__(self, ids: list[str], xs: list[float], ys: list[float]):
        self.ids = ids
        self.xs = xs
        self.ys = ys
        self._tree = self._build(list(range(len(ids))), 0)

    @classmethod
    def build(cls, net: StreetNetwork) -> "SpatialIndex":
        ids = sorted(net.nodes)
        xs = [net.nodes[i].x for i in ids]
        ys = [net.nodes[i].y for i in ids]
        return cls(ids, xs, ys)

    # tree node: (point_index, axis, left, right) — leaves have None children
    def _build(self, idxs: list[int], depth: int):
        if not idxs:
            return None
        axis = depth % 2
        coords = self.xs if axis == 0 else self.ys
        idxs.sort(key=lambda i: (coords[i], i))
        mid = len(idxs) // 2
        return (
            idxs[mid],
            axis,
            self._build(idxs[:mid], depth + 1),
            self._build(idxs[mid + 1 :], depth + 1),
        )

    def __len__(self) -> int:
        return len(self.ids)

    def query_idx(self, x: tuple[float, float], k: int) -> list[tuple[int, float]]:
        """k nearest node positions as (internal index, distance)."""
        if k < 1:
            raise ValueError("k must be >= 1")
        if not self.ids:
            raise EmptyNetwork("spatial index over empty street network")
        qx, qy = x[0], x[1]
        # max-heap of the current best k, keyed on (-d2, -idx)
        import heapq

        heap: list[tuple[float, int]] = []

        def visit(node):
            if node is None:
                return
            i, axis, left, right = node
            dx = self.xs[i] - qx
            dy = self.ys[i] - qy
            d2 = dx * dx + dy * dy
            if len(heap) < k:
                heapq.heappush(heap, (-d2, -i))
            elif (d2, i) < (-heap[0][0], -heap[0][1]):
                heapq.heapreplace(heap, (-d2, -i))
            delta = dx if axis == 0 else dy
            near, far = (left, right) if delta > 0 else (right, left)
            visit(near)
            if len(heap) < k or delta * delta <= -heap[0][0]:
                visit(far)

        visit(self._tree)
        best = sorted((-nd2, -ni) for nd2, ni in heap)
        return [(i, math.sqrt(d2)) for d2, i in best]

    def query(self, x: tuple[float, float], k: int) -> list[tuple[str, float]]:
        return [(self.ids[i], d) for i, d in self.query_idx(x, k)]

    def within_idx(self, x: tuple[float, float], radius: float) -> list[int]:
        """All node indices within ``radius`` (inclusive), sorted by index."""
        qx, qy = x[0], x[1]
        r2 = radius * radius
        out: list[int] = []

        def visit(node):
            if node is None:
                return
            i, axis, left, right = node
            dx = self.xs[i] - qx
            dy = self.ys[i] - qy
            if dx * dx + dy * dy <= r2:
                out.append(i)
            delta = dx if axis == 0 else dy
            near, far = (left, right) if delta > 0 else (right, left)
            visit(near)
            if delta * delta <= r2:
                visit(far)

        visit(self._tree)
        out.sort()
        return out


def knn(index: SpatialIndex, x: tuple[float, float], k: int) -> list[tuple[str, float]]:
    """The k street nodes nearest x, sorted by (distance, node id)."""
    return index.query(x, k)


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        # keep the smaller index as root so representatives are deterministic
        if rb < ra:
            ra, rb = rb, ra
        self.parent[rb] = ra


def consolidate(net: StreetNetwork, tolerance: float) -> StreetNetwork:
    """Merge street nodes by single-linkage clustering under ``tolerance``.

    Every cluster collapses to one node at its centroid, keeping the
    lexicographically smallest member id.  Edges are rewired to the cluster
    representatives; self-loops vanish, parallel edges survive.  Stored edge
    lengths are preserved, except that a rewired edge whose length now
    undercuts the new straight-line distance is clamped up to it.
    """
    if tolerance < 0:
        raise ValueError("tolerance must be >= 0")
    if not net.nodes:
        return StreetNetwork(nodes={}, edges={}, origin_lonlat=net.origin_lonlat)

    index = SpatialIndex.build(net)
    ids, xs, ys = index.ids, index.xs, index.ys
    uf = _UnionFind(len(ids))
    for i in range(len(ids)):
        for j in index.within_idx((xs[i], ys[i]), tolerance):
            if j > i:
                uf.union(i, j)

    clusters: dict[int, list[int]] = {}
    for i in range(len(ids)):
        clusters.setdefault(uf.find(i), []).append(i)

    new_nodes: dict[str, Point] = {}
    rep_of: dict[str, str] = {}
    moved: set[str] = set()
    for members in clusters.values():
        rep = ids[min(members)]
        cx = sum(xs[m] for m in members) / len(members)
        cy = sum(ys[m] for m in members) / len(members)
        new_nodes[rep] = Point(cx, cy)
        for m in members:
            rep_of[ids[m]] = rep
        if len(members) > 1:
            moved.add(rep)

    new_edges: dict[str, EdgeRecord] = {}
    for eid, e in net.edges.items():
        u, v = rep_of[e.from_node], rep_of[e.to_node]
        if u == v:
            continue
        length = e.length_m
        if u in moved or v in moved:
            straight = euclidean(new_nodes[u], new_nodes[v])
            if length < straight:
                length = straight
        new_edges[eid] = EdgeRecord(u, v, length)

    return StreetNetwork(
        nodes=new_nodes, edges=new_edges, origin_lonlat=net.origin_lonlat
    )


def weak_component_count(net: StreetNetwork) -> int:
    """Number of weakly connected components of H (direction ignored)."""
    if not net.nodes:
        return 0
    ids = sorted(net.nodes)
    pos = {nid: i for i, nid in enumerate(ids)}
    uf = _UnionFind(len(ids))
    for e in net.edges.values():
        uf.union(pos[e.from_node], pos[e.to_node])
    return len({uf.find(i) for i in range(len(ids))})
