"""Synthetic fixtures with known ground truth for benchmarks and tests.

The grid generator lays out an exact lattice street network and cuts
measurement segments along straight runs of grid edges, displacing each
endpoint outward along the run axis by up to the jitter budget.  Outward
displacement keeps the true terminal node the nearest anchor while the rest
of the run stays out of the anchor sets, so the straight chain is the
uniquely best candidate and the generator can state it as ground truth.
"""

from __future__ import annotations

import json
import os
import random
from dataclasses import dataclass

from .geometry import Point, euclidean
from .network import (
    EdgeRecord,
    MeasurementNetwork,
    MeasurementSegment,
    SpatialIndex,
    StreetNetwork,
    build_street_network,
)
from .runio import write_prepared, write_text_atomic

GROUND_TRUTH_FILENAME = "ground_truth.json"


@dataclass
class GridFixture:
    street: StreetNetwork
    measurements: MeasurementNetwork
    # seg_id -> {"nodes": [...], "edges_forward": [...], "edges_backward": [...]}
    truth: dict[str, dict]


def _node_id(r: int, c: int) -> str:
    return f"n{r:03d}c{c:03d}"


def generate_grid(
    rows: int = 30,
    cols: int = 30,
    spacing: float = 100.0,
    n_segments: int = 500,
    span_min: int = 3,
    span_max: int = 10,
    jitter: float = 10.0,
    seed: int = 0,
) -> GridFixture:
    """Lattice street network plus straight-run measurement segments."""
    if rows < 4 or cols < 4:
        raise ValueError("grid needs at least 4 rows and 4 columns")
    if not (1 <= span_min <= span_max):
        raise ValueError("bad span range")
    if jitter < 0 or jitter >= spacing / 2:
        raise ValueError("jitter must stay well under the grid spacing")

    nodes: dict[str, Point] = {}
    for r in range(rows):
        for c in range(cols):
            nodes[_node_id(r, c)] = Point(c * spacing, r * spacing)

    edges: dict[str, EdgeRecord] = {}
    for r in range(rows):
        for c in range(cols - 1):
            u, v = _node_id(r, c), _node_id(r, c + 1)
            edges[f"h{r:03d}c{c:03d}f"] = EdgeRecord(u, v, spacing)
            edges[f"h{r:03d}c{c:03d}r"] = EdgeRecord(v, u, spacing)
    for r in range(rows - 1):
        for c in range(cols):
            u, v = _node_id(r, c), _node_id(r + 1, c)
            edges[f"v{r:03d}c{c:03d}f"] = EdgeRecord(u, v, spacing)
            edges[f"v{r:03d}c{c:03d}r"] = EdgeRecord(v, u, spacing)

    net = build_street_network(nodes, edges)

    rng = random.Random(seed)
    segments: dict[str, MeasurementSegment] = {}
    truth: dict[str, dict] = {}
    for i in range(n_segments):
        sid = f"s{i:05d}"
        horizontal = rng.random() < 0.5
        # keep one node of margin on every side so the run's own chain is the
        # only straight path whose terminals can enter the anchor sets
        if horizontal:
            span = rng.randint(span_min, min(span_max, cols - 3))
            r = rng.randint(1, rows - 2)
            c = rng.randint(1, cols - 2 - span)
            chain = [(r, c + j) for j in range(span + 1)]
            fwd = [f"h{r:03d}c{c + j:03d}f" for j in range(span)]
            bwd = [f"h{r:03d}c{c + j:03d}r" for j in range(span - 1, -1, -1)]
        else:
            span = rng.randint(span_min, min(span_max, rows - 3))
            c = rng.randint(1, cols - 2)
            r = rng.randint(1, rows - 2 - span)
            chain = [(r + j, c) for j in range(span + 1)]
            fwd = [f"v{r + j:03d}c{c:03d}f" for j in range(span)]
            bwd = [f"v{r + j:03d}c{c:03d}r" for j in range(span - 1, -1, -1)]
        node_ids = [_node_id(rr, cc) for rr, cc in chain]
        p0 = nodes[node_ids[0]]
        p1 = nodes[node_ids[-1]]
        run = euclidean(p0, p1)
        ux, uy = (p1.x - p0.x) / run, (p1.y - p0.y) / run
        ja = rng.uniform(0.0, jitter)
        jb = rng.uniform(0.0, jitter)
        a = Point(p0.x - ux * ja, p0.y - uy * ja)
        b = Point(p1.x + ux * jb, p1.y + uy * jb)
        segments[sid] = MeasurementSegment(sid, f"sensor{i:05d}", a, b, euclidean(a, b))
        truth[sid] = {"nodes": node_ids, "edges_forward": fwd, "edges_backward": bwd}

    return GridFixture(
        street=net, measurements=MeasurementNetwork(segments=segments), truth=truth
    )


def write_fixture(fixture: GridFixture, out_dir: str, meta: dict | None = None) -> None:
    """Write the fixture as a prepared directory plus its ground truth."""
    write_prepared(out_dir, fixture.street, fixture.measurements, meta=meta)
    write_text_atomic(
        os.path.join(out_dir, GROUND_TRUTH_FILENAME),
        json.dumps(fixture.truth, sort_keys=True, separators=(",", ":")) + "\n",
    )


def generate_two_component_fixture(
    gap: float = 5000.0, spacing: float = 100.0
) -> GridFixture:
    """Two small disconnected grids with one segment straddling the gap.

    Every anchor pair of the straddling segment spans the two weak
    components, so no candidate path exists and the segment must come back
    unmatched, mirroring real severed-street failure cases.
    """
    left = generate_grid(rows=5, cols=5, spacing=spacing, n_segments=0, seed=0)
    nodes = dict(left.street.nodes)
    edges = dict(left.street.edges)
    for nid, p in left.street.nodes.items():
        nodes["far_" + nid] = Point(p.x + gap, p.y)
    for eid, e in left.street.edges.items():
        edges["far_" + eid] = EdgeRecord("far_" + e.from_node, "far_" + e.to_node, e.length_m)
    net = build_street_network(nodes, edges)

    mid = 2 * spacing
    a = Point(mid, mid)
    b = Point(mid + gap, mid)
    bridge = MeasurementSegment("bridge", "sensorX", a, b, euclidean(a, b))
    inside = MeasurementSegment(
        "inside",
        "sensorY",
        Point(spacing - 4.0, mid),
        Point(3 * spacing + 4.0, mid),
        euclidean(Point(spacing - 4.0, mid), Point(3 * spacing + 4.0, mid)),
    )
    measurements = MeasurementNetwork(segments={"bridge": bridge, "inside": inside})
    truth = {
        "inside": {
            "nodes": ["n002c001", "n002c002", "n002c003"],
            "edges_forward": ["h002c001f", "h002c002f"],
            "edges_backward": ["h002c002r", "h002c001r"],
        }
    }
    return GridFixture(street=net, measurements=measurements, truth=truth)


def generate_proximity_graph(
    n_nodes: int,
    seed: int,
    side: float | None = None,
    neighbors: int = 3,
    two_way_probability: float = 0.8,
) -> StreetNetwork:
    """Random near-planar street network: points wired to nearby points.

    A share of adjacencies is one-way so direction handling gets exercised;
    the result is not guaranteed connected, which is realistic.
    """
    rng = random.Random(seed)
    if side is None:
        side = 80.0 * (n_nodes**0.5)
    ids = [f"p{i:04d}" for i in range(n_nodes)]
    nodes = {nid: Point(rng.uniform(0, side), rng.uniform(0, side)) for nid in ids}

    index = SpatialIndex(
        sorted(nodes), [nodes[i].x for i in sorted(nodes)], [nodes[i].y for i in sorted(nodes)]
    )
    pairs: set[tuple[str, str]] = set()
    for nid in ids:
        for other, _ in index.query(nodes[nid], min(neighbors + 1, n_nodes)):
            if other == nid:
                continue
            pairs.add((min(nid, other), max(nid, other)))

    edges: dict[str, EdgeRecord] = {}
    counter = 0
    for u, v in sorted(pairs):
        length = euclidean(nodes[u], nodes[v])
        if length <= 0.0:
            continue
        if rng.random() < two_way_probability:
            edges[f"e{counter:05d}"] = EdgeRecord(u, v, length)
            edges[f"e{counter + 1:05d}"] = EdgeRecord(v, u, length)
        elif rng.random() < 0.5:
            edges[f"e{counter:05d}"] = EdgeRecord(u, v, length)
        else:
            edges[f"e{counter:05d}"] = EdgeRecord(v, u, length)
        counter += 2
    return build_street_network(nodes, edges)


def generate_random_segments(
    net: StreetNetwork, n_segments: int, seed: int, max_offset: float = 30.0
) -> MeasurementNetwork:
    """Segments near random node pairs, endpoints nudged off the nodes."""
    rng = random.Random(seed)
    ids = sorted(net.nodes)
    segments: dict[str, MeasurementSegment] = {}
    i = 0
    while len(segments) < n_segments:
        u, v = rng.choice(ids), rng.choice(ids)
        pu, pv = net.nodes[u], net.nodes[v]
        if euclidean(pu, pv) < 50.0:
            continue
        a = Point(pu.x + rng.uniform(-max_offset, max_offset),
                  pu.y + rng.uniform(-max_offset, max_offset))
        b = Point(pv.x + rng.uniform(-max_offset, max_offset),
                  pv.y + rng.uniform(-max_offset, max_offset))
        sid = f"s{i:05d}"
        segments[sid] = MeasurementSegment(sid, f"sensor{i:05d}", a, b, euclidean(a, b))
        i += 1
    return MeasurementNetwork(segments=segments)
