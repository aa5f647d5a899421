"""Run-directory persistence: results, summaries, and the override log.

Overrides are an append-only JSON-lines file; the effective state is the
last record per segment, and replaying the log over a fresh results set
always lands in the same place.  Files are written to a temp name and
renamed so an interrupted command never leaves partial output.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from typing import Callable, Sequence

from .criteria import CriterionId, CriterionScores
from .errors import IoError
from .geometry import Point
from .matcher import CandidatePath, MatchResult, RunSummary
from .network import (
    MeasurementNetwork,
    StreetNetwork,
    load_measurements,
    load_street_network,
)

OVERRIDES_FILENAME = "overrides.jsonl"

PREPARED_NODES = "street.nodes.csv"
PREPARED_EDGES = "street.edges.csv"
PREPARED_MEASUREMENTS = "measurements.csv"
PREPARED_META = "meta.json"

DECISION_ACCEPT = "accept_chosen"
DECISION_PICK = "pick_candidate"
DECISION_UNMATCHABLE = "mark_unmatchable"
DECISIONS = (DECISION_ACCEPT, DECISION_PICK, DECISION_UNMATCHABLE)


def write_text_atomic(path: str, text: str) -> None:
    """Write via temp file + rename; partial files never land at ``path``."""
    directory = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(directory, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# prepared network directories (canonical metric CSV, shared by ingest/synth)


def write_prepared(
    out_dir: str,
    net: StreetNetwork,
    measurements: MeasurementNetwork,
    meta: dict | None = None,
) -> None:
    lines = ["node_id,x,y"]
    for nid in sorted(net.nodes):
        p = net.nodes[nid]
        lines.append(f"{nid},{p.x!r},{p.y!r}")
    write_text_atomic(os.path.join(out_dir, PREPARED_NODES), "\n".join(lines) + "\n")

    lines = ["edge_id,from,to,length_m"]
    for eid in sorted(net.edges):
        e = net.edges[eid]
        lines.append(f"{eid},{e.from_node},{e.to_node},{e.length_m!r}")
    write_text_atomic(os.path.join(out_dir, PREPARED_EDGES), "\n".join(lines) + "\n")

    lines = ["segment_id,sensor_id,ax,ay,bx,by"]
    for sid in sorted(measurements.segments):
        s = measurements.segments[sid]
        lines.append(f"{sid},{s.sensor_id},{s.a.x!r},{s.a.y!r},{s.b.x!r},{s.b.y!r}")
    write_text_atomic(
        os.path.join(out_dir, PREPARED_MEASUREMENTS), "\n".join(lines) + "\n"
    )

    doc = {"coords": "metric"}
    doc.update(meta or {})
    write_text_atomic(
        os.path.join(out_dir, PREPARED_META),
        json.dumps(doc, sort_keys=True, indent=2) + "\n",
    )


def load_prepared(prepared_dir: str) -> tuple[StreetNetwork, MeasurementNetwork, dict]:
    net = load_street_network(
        os.path.join(prepared_dir, PREPARED_NODES),
        os.path.join(prepared_dir, PREPARED_EDGES),
        coords="metric",
    )
    measurements = load_measurements(
        os.path.join(prepared_dir, PREPARED_MEASUREMENTS), coords="metric"
    )
    meta_path = os.path.join(prepared_dir, PREPARED_META)
    meta = {}
    if os.path.exists(meta_path):
        with open(meta_path, encoding="utf-8") as fh:
            meta = json.load(fh)
    return net, measurements, meta


# ---------------------------------------------------------------------------
# results.json


def candidate_to_dict(c: CandidatePath) -> dict:
    return {
        "nodes": list(c.nodes),
        "edges": list(c.edges),
        "points": [[p.x, p.y] for p in c.points],
        "path_length_m": c.path_length_m,
        "orientation": c.orientation,
        "anchor_start_m": c.anchor_start_m,
        "anchor_end_m": c.anchor_end_m,
    }


def candidate_from_dict(seg_id: str, d: dict) -> CandidatePath:
    return CandidatePath(
        seg_id=seg_id,
        nodes=tuple(d["nodes"]),
        edges=tuple(d["edges"]),
        points=tuple(Point(x, y) for x, y in d["points"]),
        path_length_m=d["path_length_m"],
        orientation=d["orientation"],
        anchor_start_m=d["anchor_start_m"],
        anchor_end_m=d["anchor_end_m"],
    )


def result_to_dict(r: MatchResult) -> dict:
    return {
        "seg_id": r.seg_id,
        "status": r.status,
        "reason": r.reason,
        "criterion_used": r.criterion_used.value,
        "candidates_evaluated": r.candidates_evaluated,
        "chosen": candidate_to_dict(r.chosen) if r.chosen else None,
        "scores": r.scores.as_dict() if r.scores else None,
        "street_edges": list(r.street_edges),
    }


def result_from_dict(d: dict) -> MatchResult:
    scores = d.get("scores")
    return MatchResult(
        seg_id=d["seg_id"],
        status=d["status"],
        reason=d.get("reason"),
        criterion_used=CriterionId.parse(d["criterion_used"]),
        candidates_evaluated=d["candidates_evaluated"],
        chosen=candidate_from_dict(d["seg_id"], d["chosen"]) if d.get("chosen") else None,
        scores=CriterionScores(**scores) if scores else None,
        street_edges=tuple(d.get("street_edges", ())),
    )


def save_results(path: str, meta: dict, results: Sequence[MatchResult]) -> None:
    doc = dict(meta)
    doc["results"] = [result_to_dict(r) for r in sorted(results, key=lambda r: r.seg_id)]
    write_text_atomic(path, json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n")


def load_results(path: str) -> tuple[dict, list[MatchResult]]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    results = [result_from_dict(d) for d in doc.pop("results")]
    return doc, results


def summary_to_dict(summary: RunSummary) -> dict:
    return {
        "total_segments": summary.total_segments,
        "matched": summary.matched,
        "unmatched": summary.unmatched,
        "unmatched_reasons": summary.unmatched_reasons,
        "edge_reuse_histogram": {str(k): v for k, v in summary.reuse_histogram().items()},
        "reused_edges": {e: n for e, n in summary.edge_reuse.items() if n >= 2},
    }


# ---------------------------------------------------------------------------
# overrides


@dataclass(frozen=True)
class Override:
    seg_id: str
    decision: str
    nodes: tuple[str, ...] | None  # candidate fingerprint for pick_candidate
    note: str
    ts: int

    def to_dict(self) -> dict:
        d = {"seg_id": self.seg_id, "decision": self.decision, "note": self.note, "ts": self.ts}
        if self.nodes is not None:
            d["nodes"] = list(self.nodes)
        return d


def override_from_dict(d: dict) -> Override:
    decision = d["decision"]
    if decision not in DECISIONS:
        raise ValueError(f"unknown override decision {decision!r}")
    nodes = d.get("nodes")
    return Override(
        seg_id=d["seg_id"],
        decision=decision,
        nodes=tuple(nodes) if nodes is not None else None,
        note=d.get("note", ""),
        ts=int(d.get("ts", 0)),
    )


def append_override(run_dir: str, override: Override) -> None:
    path = os.path.join(run_dir, OVERRIDES_FILENAME)
    try:
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(override.to_dict(), sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
    except OSError as exc:
        raise IoError(f"cannot append override: {exc}") from exc


def load_overrides(run_dir: str) -> list[Override]:
    path = os.path.join(run_dir, OVERRIDES_FILENAME)
    if not os.path.exists(path):
        return []
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(override_from_dict(json.loads(line)))
    return out


def effective_overrides(log: Sequence[Override]) -> dict[str, Override]:
    """Last write wins per segment; the full log remains the history."""
    state: dict[str, Override] = {}
    for ov in log:
        state[ov.seg_id] = ov
    return state


CandidateResolver = Callable[[str, tuple[str, ...]], "tuple[CandidatePath, CriterionScores] | None"]


def apply_overrides(
    results: Sequence[MatchResult],
    log: Sequence[Override],
    resolve_candidate: CandidateResolver | None = None,
) -> tuple[list[MatchResult], dict[str, str]]:
    """Fold the override log into a results list.

    ``resolve_candidate(seg_id, nodes)`` must regenerate the picked candidate
    for pick_candidate records; it is only required when such records exist.
    Returns the effective results plus a seg_id -> decision flag map.
    """
    state = effective_overrides(log)
    flags = {sid: ov.decision for sid, ov in state.items()}
    out: list[MatchResult] = []
    for r in results:
        ov = state.get(r.seg_id)
        if ov is None or ov.decision == DECISION_ACCEPT:
            out.append(r)
            continue
        if ov.decision == DECISION_UNMATCHABLE:
            out.append(
                MatchResult(
                    seg_id=r.seg_id,
                    status="unmatched",
                    reason="marked_unmatchable",
                    criterion_used=r.criterion_used,
                    candidates_evaluated=r.candidates_evaluated,
                    chosen=None,
                    scores=None,
                    street_edges=(),
                )
            )
            continue
        # pick_candidate
        if resolve_candidate is None:
            raise ValueError(
                f"override for {r.seg_id} picks a candidate but no resolver was supplied"
            )
        resolved = resolve_candidate(r.seg_id, ov.nodes or ())
        if resolved is None:
            raise ValueError(
                f"override for {r.seg_id} names a candidate the matcher cannot regenerate"
            )
        chosen, scores = resolved
        out.append(
            MatchResult(
                seg_id=r.seg_id,
                status="matched",
                reason=None,
                criterion_used=r.criterion_used,
                candidates_evaluated=r.candidates_evaluated,
                chosen=chosen,
                scores=scores,
                street_edges=tuple(sorted(set(chosen.edges))),
            )
        )
    return out, flags
