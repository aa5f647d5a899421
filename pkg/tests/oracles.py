"""Independent brute-force oracles the tests check the real code against.

Everything here favors obviousness over speed: full sorts, O(n^2) scans,
full-graph Dijkstra settles.  None of it shares code paths with the package
internals it verifies.
"""

from __future__ import annotations

import heapq
import math

from lowres_match.criteria import CriterionId, score_all
from lowres_match.geometry import Point
from lowres_match.matcher import CandidatePath
from lowres_match.network import StreetNetwork


def knn_bruteforce(nodes: dict[str, Point], query, k: int) -> list[tuple[str, float]]:
    """Full sort by (squared distance, node id), then the first k."""
    ranked = sorted(
        ((p.x - query[0]) ** 2 + (p.y - query[1]) ** 2, nid) for nid, p in nodes.items()
    )
    return [(nid, math.sqrt(d2)) for d2, nid in ranked[:k]]


def cluster_bruteforce(nodes: dict[str, Point], tolerance: float) -> list[frozenset[str]]:
    """Single-linkage clusters via an O(n^2) pairwise union-find."""
    ids = sorted(nodes)
    parent = {nid: nid for nid in ids}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, u in enumerate(ids):
        for v in ids[i + 1 :]:
            du = nodes[u]
            dv = nodes[v]
            if math.hypot(du.x - dv.x, du.y - dv.y) <= tolerance:
                ru, rv = find(u), find(v)
                if ru != rv:
                    parent[max(ru, rv)] = min(ru, rv)

    groups: dict[str, set[str]] = {}
    for nid in ids:
        groups.setdefault(find(nid), set()).add(nid)
    return [frozenset(g) for g in groups.values()]


def dijkstra_pair(
    net: StreetNetwork, source: str, target: str
) -> tuple[float, list[str]] | None:
    """Single-pair shortest path, smallest node-id sequence on ties.

    Settles the whole reachable set; adjacency is rebuilt here from the raw
    edge records, including the parallel-edge reduction.
    """
    best_arc: dict[tuple[str, str], float] = {}
    for eid in sorted(net.edges):
        e = net.edges[eid]
        key = (e.from_node, e.to_node)
        if key not in best_arc or e.length_m < best_arc[key]:
            best_arc[key] = e.length_m
    adj: dict[str, list[tuple[str, float]]] = {}
    for (u, v), length in sorted(best_arc.items()):
        adj.setdefault(u, []).append((v, length))

    heap: list[tuple[float, tuple[str, ...]]] = [(0.0, (source,))]
    settled: dict[str, tuple[float, tuple[str, ...]]] = {}
    while heap:
        dist, path = heapq.heappop(heap)
        u = path[-1]
        if u in settled:
            continue
        settled[u] = (dist, path)
        for v, length in adj.get(u, ()):
            if v not in settled:
                heapq.heappush(heap, (dist + length, path + (v,)))
    if target not in settled:
        return None
    dist, path = settled[target]
    if target == source:
        return None
    return dist, list(path)


def edges_along(net: StreetNetwork, path: list[str]) -> list[str]:
    """Edge ids along a node path: shortest parallel edge, smallest id on ties."""
    out = []
    for u, v in zip(path, path[1:]):
        best = None
        for eid in sorted(net.edges):
            e = net.edges[eid]
            if e.from_node == u and e.to_node == v:
                if best is None or e.length_m < net.edges[best].length_m:
                    best = eid
        out.append(best)
    return out


def match_bruteforce(
    net: StreetNetwork, seg, k: int, criterion: CriterionId
) -> tuple[CandidatePath, object] | None:
    """Exhaustive candidate enumeration and direct argmin selection."""
    near_a = knn_bruteforce(net.nodes, seg.a, k)
    near_b = knn_bruteforce(net.nodes, seg.b, k)
    candidates = []
    for orientation, sources, targets in (("ab", near_a, near_b), ("ba", near_b, near_a)):
        for s, s_gap in sources:
            for t, t_gap in targets:
                if s == t:
                    continue
                hit = dijkstra_pair(net, s, t)
                if hit is None:
                    continue
                dist, path = hit
                candidates.append(
                    CandidatePath(
                        seg_id=seg.id,
                        nodes=tuple(path),
                        edges=tuple(edges_along(net, path)),
                        points=tuple(net.nodes[n] for n in path),
                        path_length_m=dist,
                        orientation=orientation,
                        anchor_start_m=s_gap,
                        anchor_end_m=t_gap,
                    )
                )
    if not candidates:
        return None
    scored = [(c, score_all(c, seg)) for c in candidates]
    return min(
        scored,
        key=lambda cs: (
            cs[1].get(criterion),
            len(cs[0].edges),
            cs[1].lc,
            cs[0].nodes,
            cs[0].orientation,
        ),
    )


def shoelace_closed(points: list[Point]) -> float:
    """Signed area of the closed polygon through ``points``."""
    s = 0.0
    for (x1, y1), (x2, y2) in zip(points, points[1:] + points[:1]):
        s += x1 * y2 - x2 * y1
    return s / 2.0


def haversine_m(lon1, lat1, lon2, lat2, radius=6_371_000.0) -> float:
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * radius * math.asin(math.sqrt(a))
