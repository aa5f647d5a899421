"""Candidate generation and criterion-minimizing matching.

For a measurement segment with endpoints a and b, the candidate set is one
shortest path per ordered anchor pair: from each of the k street nodes
nearest a to each of the k nearest b, and the same in the opposite
direction, skipping pairs that reuse one node.  That caps the set at 2k^2
candidates per segment.  Every candidate is scored under all four criteria;
the configured criterion picks the match.

Everything here is deterministic: shortest-path ties resolve to the
lexicographically smallest node-id sequence, and score ties resolve by
(fewer edges, smaller length score, node sequence, orientation).
"""

from __future__ import annotations

import heapq
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

from .criteria import CriterionId, CriterionScores, score_all
from .geometry import Point
from .network import MeasurementNetwork, MeasurementSegment, SpatialIndex, StreetNetwork

UNMATCHED_NO_PATH = "no_path"


@dataclass(frozen=True)
class CandidatePath:
    """One oriented anchor-to-anchor shortest path for one segment.

    ``orientation`` is "ab" when the path start anchors segment endpoint a,
    "ba" when it anchors b.  Anchor distances are the Euclidean gaps between
    the segment endpoints and the path's terminal nodes.
    """

    seg_id: str
    nodes: tuple[str, ...]
    edges: tuple[str, ...]
    points: tuple[Point, ...]
    path_length_m: float
    orientation: str
    anchor_start_m: float
    anchor_end_m: float


@dataclass(frozen=True)
class MatchResult:
    seg_id: str
    status: str  # "matched" | "unmatched"
    reason: str | None
    criterion_used: CriterionId
    candidates_evaluated: int
    chosen: CandidatePath | None
    scores: CriterionScores | None
    street_edges: tuple[str, ...]

    @property
    def matched(self) -> bool:
        return self.status == "matched"


@dataclass(frozen=True)
class RunSummary:
    total_segments: int
    matched: int
    unmatched: int
    unmatched_reasons: dict[str, int]
    edge_reuse: dict[str, int]

    def reuse_histogram(self) -> dict[int, int]:
        hist: dict[int, int] = {}
        for n in self.edge_reuse.values():
            hist[n] = hist.get(n, 0) + 1
        return dict(sorted(hist.items()))


def _selection_key(candidate: CandidatePath, scores: CriterionScores, criterion: CriterionId):
    # Ties on the configured criterion fall back to the fewest edges, then
    # the smallest length score (the most measurement-consistent candidate),
    # then the node-id sequence, so selection is a pure function of inputs.
    return (
        scores.get(criterion),
        len(candidate.edges),
        scores.lc,
        candidate.nodes,
        candidate.orientation,
    )


class Matcher:
    """Matching engine bound to one street network and spatial index."""

    def __init__(self, net: StreetNetwork, index: SpatialIndex | None = None):
        self.net = net
        self.index = index if index is not None else SpatialIndex.build(net)
        self._ids = self.index.ids
        self._points = [Point(x, y) for x, y in zip(self.index.xs, self.index.ys)]
        self._adj, self._edge_for = self._routing_tables(net, self._ids)

    @staticmethod
    def _routing_tables(net: StreetNetwork, ids: list[str]):
        pos = {nid: i for i, nid in enumerate(ids)}
        # One routing arc per (u, v): the shortest parallel edge, smallest
        # edge id on equal length.  The full edge map stays on the network.
        best: dict[tuple[int, int], tuple[float, str]] = {}
        for eid in sorted(net.edges):
            e = net.edges[eid]
            key = (pos[e.from_node], pos[e.to_node])
            cand = (e.length_m, eid)
            if key not in best or cand < best[key]:
                best[key] = cand
        adj: list[list[tuple[int, float]]] = [[] for _ in ids]
        edge_for: dict[tuple[int, int], str] = {}
        for (u, v), (length, eid) in best.items():
            adj[u].append((v, length))
            edge_for[(u, v)] = eid
        for lst in adj:
            lst.sort()
        return adj, edge_for

    def _shortest_paths(
        self, source: int, targets: set[int]
    ) -> dict[int, tuple[float, tuple[int, ...]]]:
        """Lexicographically-smallest shortest paths from source to targets.

        Heap entries carry the full node sequence so equal-length paths pop
        in node-id order; search stops once every reachable target settles.
        """
        adj = self._adj
        remaining = set(targets)
        remaining.discard(source)
        settled: set[int] = set()
        found: dict[int, tuple[float, tuple[int, ...]]] = {}
        heap: list[tuple[float, tuple[int, ...]]] = [(0.0, (source,))]
        while heap and remaining:
            dist, seq = heapq.heappop(heap)
            u = seq[-1]
            if u in settled:
                continue
            settled.add(u)
            if u in remaining:
                found[u] = (dist, seq)
                remaining.discard(u)
                if not remaining:
                    break
            for v, length in adj[u]:
                if v not in settled:
                    heapq.heappush(heap, (dist + length, seq + (v,)))
        return found

    def generate_candidates(self, seg: MeasurementSegment, k: int) -> list[CandidatePath]:
        """All anchored shortest-path candidates for one segment (<= 2k^2)."""
        if k < 1:
            raise ValueError("k must be >= 1")
        near_a = self.index.query_idx(seg.a, k)
        near_b = self.index.query_idx(seg.b, k)
        out: list[CandidatePath] = []
        for orientation, sources, targets in (
            ("ab", near_a, near_b),
            ("ba", near_b, near_a),
        ):
            target_set = {t for t, _ in targets}
            for s, s_gap in sources:
                found = self._shortest_paths(s, target_set - {s})
                for t, t_gap in targets:
                    hit = found.get(t)
                    if hit is None:
                        continue
                    dist, seq = hit
                    out.append(self._assemble(seg.id, orientation, seq, dist, s_gap, t_gap))
        return out

    def _assemble(self, seg_id, orientation, seq, dist, s_gap, t_gap) -> CandidatePath:
        edge_for = self._edge_for
        return CandidatePath(
            seg_id=seg_id,
            nodes=tuple(self._ids[i] for i in seq),
            edges=tuple(edge_for[(u, v)] for u, v in zip(seq, seq[1:])),
            points=tuple(self._points[i] for i in seq),
            path_length_m=dist,
            orientation=orientation,
            anchor_start_m=s_gap,
            anchor_end_m=t_gap,
        )

    def match_one(
        self, seg: MeasurementSegment, k: int, criterion: CriterionId
    ) -> MatchResult:
        """Score all candidates and keep the criterion minimizer."""
        candidates = self.generate_candidates(seg, k)
        if not candidates:
            return MatchResult(
                seg_id=seg.id,
                status="unmatched",
                reason=UNMATCHED_NO_PATH,
                criterion_used=criterion,
                candidates_evaluated=0,
                chosen=None,
                scores=None,
                street_edges=(),
            )
        scored = [(c, score_all(c, seg)) for c in candidates]
        chosen, scores = min(scored, key=lambda cs: _selection_key(cs[0], cs[1], criterion))
        return MatchResult(
            seg_id=seg.id,
            status="matched",
            reason=None,
            criterion_used=criterion,
            candidates_evaluated=len(candidates),
            chosen=chosen,
            scores=scores,
            street_edges=tuple(sorted(set(chosen.edges))),
        )

    def match_all(
        self,
        measurements: MeasurementNetwork,
        k: int,
        criterion: CriterionId,
        workers: int | None = 1,
    ) -> tuple[list[MatchResult], RunSummary]:
        """Match every segment; results come back sorted by segment id.

        ``workers`` > 1 fans segments out over forked processes; output is
        identical for any worker count.
        """
        seg_ids = sorted(measurements.segments)
        if workers is None:
            workers = os.cpu_count() or 1
        workers = max(1, min(workers, len(seg_ids) or 1))

        if workers == 1:
            results = [
                self.match_one(measurements.segments[sid], k, criterion)
                for sid in seg_ids
            ]
        else:
            results = self._match_parallel(measurements, seg_ids, k, criterion, workers)

        return results, summarize(results)

    def _match_parallel(self, measurements, seg_ids, k, criterion, workers):
        import multiprocessing

        try:
            ctx = multiprocessing.get_context("fork")
        except ValueError:
            results = [
                self.match_one(measurements.segments[sid], k, criterion)
                for sid in seg_ids
            ]
            return results
        global _WORKER_STATE
        _WORKER_STATE = (self, measurements, k, criterion)
        chunks = _chunked(seg_ids, max(1, len(seg_ids) // (workers * 4) or 1))
        try:
            with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
                collected: list[MatchResult] = []
                for part in pool.map(_match_chunk, chunks):
                    collected.extend(part)
        finally:
            _WORKER_STATE = None
        collected.sort(key=lambda r: r.seg_id)
        return collected


_WORKER_STATE = None


def _match_chunk(seg_ids: list[str]) -> list[MatchResult]:
    matcher, measurements, k, criterion = _WORKER_STATE
    return [matcher.match_one(measurements.segments[sid], k, criterion) for sid in seg_ids]


def _chunked(items: Sequence[str], size: int) -> list[list[str]]:
    return [list(items[i : i + size]) for i in range(0, len(items), size)]


def summarize(results: Iterable[MatchResult]) -> RunSummary:
    results = list(results)
    matched = [r for r in results if r.matched]
    reasons: dict[str, int] = {}
    for r in results:
        if not r.matched:
            reasons[r.reason or "unknown"] = reasons.get(r.reason or "unknown", 0) + 1
    reuse: dict[str, int] = {}
    for r in matched:
        for eid in r.street_edges:
            reuse[eid] = reuse.get(eid, 0) + 1
    return RunSummary(
        total_segments=len(results),
        matched=len(matched),
        unmatched=len(results) - len(matched),
        unmatched_reasons=dict(sorted(reasons.items())),
        edge_reuse=dict(sorted(reuse.items())),
    )


# Spec-level convenience wrappers; prefer holding a Matcher for batch work.

def generate_candidates(
    net: StreetNetwork, index: SpatialIndex, seg: MeasurementSegment, k: int
) -> list[CandidatePath]:
    return Matcher(net, index).generate_candidates(seg, k)


def match_one(
    net: StreetNetwork,
    index: SpatialIndex,
    seg: MeasurementSegment,
    k: int,
    criterion: CriterionId,
) -> MatchResult:
    return Matcher(net, index).match_one(seg, k, criterion)


def match_all(
    net: StreetNetwork,
    index: SpatialIndex,
    measurements: MeasurementNetwork,
    k: int,
    criterion: CriterionId,
    workers: int | None = 1,
) -> tuple[list[MatchResult], RunSummary]:
    return Matcher(net, index).match_all(measurements, k, criterion, workers=workers)
