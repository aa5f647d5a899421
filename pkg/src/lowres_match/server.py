"""HTTP/JSON API backing the human review console.

Read endpoints are side-effect free; the only write is the override log,
an append-only JSON-lines file under the run directory.  Candidate sets are
regenerated on demand rather than persisted, which keeps storage small and
continuously exercises matcher determinism.  Single operator on a trusted
host is assumed: there is no auth.
"""

from __future__ import annotations

import os
import socket
import threading
import time
from typing import Any

from fastapi import Body, FastAPI, HTTPException
from fastapi.responses import JSONResponse

from .criteria import CriterionId, score_all
from .matcher import Matcher, MatchResult
from .network import MeasurementNetwork, StreetNetwork
from .report import normalized_scores
from . import runio


def _segment_intersects_bbox(ax, ay, bx, by, minx, miny, maxx, maxy) -> bool:
    if minx <= ax <= maxx and miny <= ay <= maxy:
        return True
    if minx <= bx <= maxx and miny <= by <= maxy:
        return True
    corners = [(minx, miny), (maxx, miny), (maxx, maxy), (minx, maxy)]
    for (px, py), (qx, qy) in zip(corners, corners[1:] + corners[:1]):
        if _segments_cross(ax, ay, bx, by, px, py, qx, qy):
            return True
    return False


def _orient(ox, oy, ax, ay, bx, by) -> float:
    return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox)


def _segments_cross(ax, ay, bx, by, cx, cy, dx, dy) -> bool:
    d1 = _orient(cx, cy, dx, dy, ax, ay)
    d2 = _orient(cx, cy, dx, dy, bx, by)
    d3 = _orient(ax, ay, bx, by, cx, cy)
    d4 = _orient(ax, ay, bx, by, dx, dy)
    if ((d1 > 0) != (d2 > 0) or d1 == 0 or d2 == 0) and (
        (d3 > 0) != (d4 > 0) or d3 == 0 or d4 == 0
    ):
        # conservative on collinear touches: bound the boxes
        return (
            min(ax, bx) <= max(cx, dx)
            and min(cx, dx) <= max(ax, bx)
            and min(ay, by) <= max(cy, dy)
            and min(cy, dy) <= max(ay, by)
        )
    return False


class ReviewStore:
    """Run state shared by the endpoints; override writes are serialized."""

    def __init__(
        self,
        run_dir: str,
        meta: dict,
        results: list[MatchResult],
        net: StreetNetwork,
        measurements: MeasurementNetwork,
    ):
        self.run_dir = run_dir
        self.k = int(meta["k"])
        self.criterion = CriterionId.parse(meta["criterion"])
        self.run_id = meta.get("run_id", "run")
        self.net = net
        self.measurements = measurements
        self.matcher = Matcher(net)
        self.base_results = results
        self._lock = threading.Lock()
        self._log = runio.load_overrides(run_dir)
        self._effective: tuple[list[MatchResult], dict[str, str]] | None = None

    def resolve_candidate(self, seg_id: str, nodes: tuple[str, ...]):
        seg = self.measurements.segments[seg_id]
        for cand in self.matcher.generate_candidates(seg, self.k):
            if cand.nodes == nodes:
                return cand, score_all(cand, seg)
        return None

    def effective(self) -> tuple[list[MatchResult], dict[str, str]]:
        with self._lock:
            if self._effective is None:
                self._effective = runio.apply_overrides(
                    self.base_results, self._log, self.resolve_candidate
                )
            return self._effective

    def add_override(self, override: runio.Override) -> None:
        with self._lock:
            runio.append_override(self.run_dir, override)
            self._log.append(override)
            self._effective = None

    def candidates_payload(self, seg_id: str) -> dict:
        seg = self.measurements.segments[seg_id]
        results, _ = self.effective()
        current = next(r for r in results if r.seg_id == seg_id)
        chosen_nodes = current.chosen.nodes if current.chosen else None
        chosen_orientation = current.chosen.orientation if current.chosen else None
        cands = []
        for cand in self.matcher.generate_candidates(seg, self.k):
            scores = score_all(cand, seg)
            cands.append(
                {
                    "nodes": list(cand.nodes),
                    "edges": list(cand.edges),
                    "geometry": [[p.x, p.y] for p in cand.points],
                    "orientation": cand.orientation,
                    "path_length_m": cand.path_length_m,
                    "anchor_start_m": cand.anchor_start_m,
                    "anchor_end_m": cand.anchor_end_m,
                    "scores": scores.as_dict(),
                    "chosen": cand.nodes == chosen_nodes
                    and cand.orientation == chosen_orientation,
                }
            )
        return {
            "seg_id": seg_id,
            "status": current.status,
            "reason": current.reason,
            "segment": {
                "sensor_id": seg.sensor_id,
                "a": [seg.a.x, seg.a.y],
                "b": [seg.b.x, seg.b.y],
                "length_m": seg.length_m,
            },
            "candidates": cands,
        }


def build_app(
    run_dir: str,
    meta: dict,
    results: list[MatchResult],
    net: StreetNetwork,
    measurements: MeasurementNetwork,
    ui_dir: str | None = None,
) -> FastAPI:
    store = ReviewStore(run_dir, meta, results, net, measurements)
    app = FastAPI(title="lowres-match review API")
    app.state.store = store

    @app.get("/health")
    def health():
        return {"status": "ok", "run_id": store.run_id}

    @app.get("/segments")
    def list_segments(
        sort: str | None = None,
        order: str = "desc",
        page: int = 1,
        page_size: int = 50,
    ):
        try:
            crit = CriterionId.parse(sort) if sort else store.criterion
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        if order not in ("asc", "desc"):
            raise HTTPException(status_code=400, detail="order must be asc or desc")
        if page < 1 or page_size < 1:
            raise HTTPException(status_code=400, detail="page and page_size start at 1")

        effective, flags = store.effective()
        norms = normalized_scores(effective)
        matched = [r for r in effective if r.matched]
        reverse = order == "desc"
        matched.sort(
            key=lambda r: (
                -norms[crit.value][r.seg_id] if reverse else norms[crit.value][r.seg_id],
                r.seg_id,
            )
        )
        unmatched = sorted((r for r in effective if not r.matched), key=lambda r: r.seg_id)
        ordered = matched + unmatched

        start = (page - 1) * page_size
        rows = []
        for r in ordered[start : start + page_size]:
            seg = store.measurements.segments[r.seg_id]
            rows.append(
                {
                    "seg_id": r.seg_id,
                    "sensor_id": seg.sensor_id,
                    "status": r.status,
                    "reason": r.reason,
                    "scores": r.scores.as_dict() if r.scores else None,
                    "normalized": {
                        c.value: norms[c.value].get(r.seg_id) for c in CriterionId
                    }
                    if r.matched
                    else None,
                    "override": flags.get(r.seg_id),
                }
            )
        return {
            "total": len(ordered),
            "page": page,
            "page_size": page_size,
            "sort": crit.value,
            "order": order,
            "segments": rows,
        }

    @app.get("/segments/{seg_id}/candidates")
    def get_candidates(seg_id: str):
        if seg_id not in store.measurements.segments:
            raise HTTPException(status_code=404, detail=f"unknown segment {seg_id!r}")
        return store.candidates_payload(seg_id)

    @app.post("/segments/{seg_id}/override")
    def post_override(seg_id: str, body: dict[str, Any] = Body(...)):
        if seg_id not in store.measurements.segments:
            raise HTTPException(status_code=404, detail=f"unknown segment {seg_id!r}")
        decision = body.get("decision")
        if decision not in runio.DECISIONS:
            raise HTTPException(
                status_code=422,
                detail=f"decision must be one of {', '.join(runio.DECISIONS)}",
            )
        nodes = None
        if decision == runio.DECISION_PICK:
            raw_nodes = body.get("nodes")
            if not raw_nodes or not isinstance(raw_nodes, list):
                raise HTTPException(status_code=422, detail="pick_candidate needs nodes")
            nodes = tuple(str(n) for n in raw_nodes)
            if store.resolve_candidate(seg_id, nodes) is None:
                raise HTTPException(
                    status_code=422,
                    detail="fingerprint does not identify a regenerable candidate",
                )
        if decision == runio.DECISION_ACCEPT:
            results, _ = store.effective()
            current = next(r for r in results if r.seg_id == seg_id)
            if not current.matched:
                raise HTTPException(
                    status_code=422, detail="segment has no chosen path to accept"
                )
        override = runio.Override(
            seg_id=seg_id,
            decision=decision,
            nodes=nodes,
            note=str(body.get("note", "")),
            ts=int(time.time()),
        )
        store.add_override(override)
        return {"ok": True, "seg_id": seg_id, "decision": decision, "ts": override.ts}

    @app.get("/layers")
    def get_layers(bbox: str):
        try:
            parts = [float(p) for p in bbox.split(",")]
            if len(parts) != 4:
                raise ValueError
            minx, miny, maxx, maxy = parts
            if minx > maxx or miny > maxy:
                raise ValueError
        except ValueError:
            raise HTTPException(
                status_code=400, detail="bbox must be minx,miny,maxx,maxy with min <= max"
            )
        streets = []
        for eid in sorted(store.net.edges):
            e = store.net.edges[eid]
            pa, pb = store.net.nodes[e.from_node], store.net.nodes[e.to_node]
            if _segment_intersects_bbox(pa.x, pa.y, pb.x, pb.y, minx, miny, maxx, maxy):
                streets.append(
                    {
                        "type": "Feature",
                        "geometry": {
                            "type": "LineString",
                            "coordinates": [[pa.x, pa.y], [pb.x, pb.y]],
                        },
                        "properties": {"edge_id": eid, "length_m": e.length_m},
                    }
                )
        meas = []
        for sid in sorted(store.measurements.segments):
            s = store.measurements.segments[sid]
            if _segment_intersects_bbox(s.a.x, s.a.y, s.b.x, s.b.y, minx, miny, maxx, maxy):
                meas.append(
                    {
                        "type": "Feature",
                        "geometry": {
                            "type": "LineString",
                            "coordinates": [[s.a.x, s.a.y], [s.b.x, s.b.y]],
                        },
                        "properties": {"seg_id": sid, "sensor_id": s.sensor_id},
                    }
                )
        return {
            "streets": {"type": "FeatureCollection", "features": streets},
            "measurements": {"type": "FeatureCollection", "features": meas},
        }

    if ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


def run_server(app: FastAPI, host: str = "127.0.0.1", port: int = 8008) -> int:
    import uvicorn

    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((host, port))
    except OSError as exc:
        print(f"error: cannot bind {host}:{port}: {exc}")
        return 2
    finally:
        probe.close()
    uvicorn.run(app, host=host, port=port, log_level="warning")
    return 0
