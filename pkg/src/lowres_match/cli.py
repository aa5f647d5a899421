"""Command-line driver: ingest, match, report, serve, synth.

Flags beat config-file entries, which beat defaults.  The config file is a
flat ``key = value`` text file (keys: k, criterion, tolerance, coords,
workers, worst_lc, worst_rc, worst_sc, worst_ac).  The pipeline has no
randomness, so identical invocations produce identical output bytes; wall
time is reported on stderr, never inside output files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field

from .criteria import CriterionId
from .errors import LowresMatchError
from .matcher import Matcher
from .network import (
    SpatialIndex,
    consolidate,
    load_measurements,
    load_street_network,
    weak_component_count,
)
from . import report as report_mod
from . import runio
from . import synth as synth_mod

ENV_THREADS = "LOWRES_MATCH_THREADS"

EXIT_OK = 0
EXIT_INPUT_ERROR = 2


@dataclass
class RunConfig:
    k: int = 4
    criterion: CriterionId = CriterionId.RC
    consolidation_tolerance: float = 4.0
    coords: str = "metric"
    workers: int | None = 1  # None = auto
    worst_n: dict = field(
        default_factory=lambda: dict(report_mod.DEFAULT_WORST_N)
    )

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.consolidation_tolerance < 0:
            raise ValueError("tolerance must be >= 0")


def parse_config_file(path: str) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise LowresMatchError(f"config line not 'key = value': {raw.strip()!r}")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def _resolve(flag, file_value, default, convert):
    if flag is not None:
        return flag
    if file_value is not None:
        return convert(file_value)
    return default


def build_config(args: argparse.Namespace) -> RunConfig:
    file_cfg = parse_config_file(args.config) if getattr(args, "config", None) else {}
    defaults = RunConfig()
    workers = _resolve(
        getattr(args, "workers", None),
        file_cfg.get("workers"),
        defaults.workers,
        lambda s: None if s == "auto" else int(s),
    )
    env_threads = os.environ.get(ENV_THREADS)
    if env_threads:
        workers = None if env_threads == "auto" else int(env_threads)
    worst = dict(defaults.worst_n)
    for crit in CriterionId:
        value = _resolve(
            getattr(args, f"worst_{crit.value}", None),
            file_cfg.get(f"worst_{crit.value}"),
            worst[crit],
            int,
        )
        worst[crit] = value
    return RunConfig(
        k=_resolve(getattr(args, "k", None), file_cfg.get("k"), defaults.k, int),
        criterion=_resolve(
            getattr(args, "criterion", None),
            file_cfg.get("criterion"),
            defaults.criterion,
            CriterionId.parse,
        ),
        consolidation_tolerance=_resolve(
            getattr(args, "tolerance", None),
            file_cfg.get("tolerance"),
            defaults.consolidation_tolerance,
            float,
        ),
        coords=_resolve(
            getattr(args, "coords", None), file_cfg.get("coords"), defaults.coords, str
        ),
        workers=workers,
        worst_n=worst,
    )


# ---------------------------------------------------------------------------
# subcommands


def cmd_ingest(args) -> int:
    cfg = build_config(args)
    net = load_street_network(args.street_nodes, args.street_edges, coords=cfg.coords)
    before_nodes, before_edges = len(net.nodes), len(net.edges)
    net = consolidate(net, cfg.consolidation_tolerance)
    measurements = load_measurements(
        args.measurements, coords=cfg.coords, origin=net.origin_lonlat
    )
    meta = {
        "coords": "metric",
        "origin_lonlat": list(net.origin_lonlat) if net.origin_lonlat else None,
        "consolidation_tolerance": cfg.consolidation_tolerance,
    }
    runio.write_prepared(args.out_dir, net, measurements, meta=meta)
    ingest_report = {
        "street_nodes_before": before_nodes,
        "street_nodes_after": len(net.nodes),
        "street_edges_before": before_edges,
        "street_edges_after": len(net.edges),
        "weak_components": weak_component_count(net),
        "measurement_segments": len(measurements.segments),
        "measurement_endpoints": measurements.endpoint_count(),
    }
    runio.write_text_atomic(
        os.path.join(args.out_dir, "ingest_report.json"),
        json.dumps(ingest_report, sort_keys=True, indent=2) + "\n",
    )
    print(json.dumps(ingest_report, sort_keys=True, indent=2))
    return EXIT_OK


def cmd_match(args) -> int:
    cfg = build_config(args)
    net, measurements, _ = runio.load_prepared(args.prepared)
    if not net.nodes:
        raise LowresMatchError("street network is empty")
    run_id = args.run_id
    started = time.monotonic()
    matcher = Matcher(net)
    results, summary = matcher.match_all(
        measurements, cfg.k, cfg.criterion, workers=cfg.workers
    )
    elapsed = time.monotonic() - started

    out_dir = args.out_dir
    runio.save_results(
        os.path.join(out_dir, "results.json"),
        {
            "run_id": run_id,
            "k": cfg.k,
            "criterion": cfg.criterion.value,
            "prepared_dir": os.path.abspath(args.prepared),
        },
        results,
    )
    report_mod.export(results, measurements, out_dir, run_id, fmt="both")
    runio.write_text_atomic(
        os.path.join(out_dir, "summary.json"),
        json.dumps(runio.summary_to_dict(summary), sort_keys=True, indent=2) + "\n",
    )
    print(
        f"matched {summary.matched}/{summary.total_segments} segments "
        f"(wall time {elapsed:.2f}s)",
        file=sys.stderr,
    )
    return EXIT_OK


def _load_run(run_dir: str, prepared_override: str | None):
    meta, results = runio.load_results(os.path.join(run_dir, "results.json"))
    prepared = prepared_override or meta.get("prepared_dir")
    net, measurements, _ = runio.load_prepared(prepared)
    return meta, results, net, measurements


def cmd_report(args) -> int:
    cfg = build_config(args)
    meta, results, net, measurements = _load_run(args.run_dir, args.prepared)
    run_id = meta["run_id"]
    used = CriterionId.parse(meta["criterion"])
    overrides = runio.load_overrides(args.run_dir)
    flags: dict[str, str] = {}
    if overrides:
        matcher = Matcher(net)
        k = int(meta["k"])

        def resolver(seg_id, nodes):
            seg = measurements.segments[seg_id]
            for cand in matcher.generate_candidates(seg, k):
                if cand.nodes == nodes:
                    from .criteria import score_all

                    return cand, score_all(cand, seg)
            return None

        results, flags = runio.apply_overrides(results, overrides, resolver)
        report_mod.export(
            results, measurements, args.run_dir, run_id, fmt="both", override_flags=flags
        )
    report_mod.export_analytics(
        results, measurements, args.run_dir, run_id, used, worst_defaults=cfg.worst_n
    )
    return EXIT_OK


def cmd_serve(args) -> int:
    from .server import build_app, run_server

    meta, results, net, measurements = _load_run(args.run_dir, args.prepared)
    app = build_app(
        run_dir=args.run_dir,
        meta=meta,
        results=results,
        net=net,
        measurements=measurements,
        ui_dir=args.ui_dir,
    )
    return run_server(app, host=args.host, port=args.port)


def cmd_synth(args) -> int:
    fixture = synth_mod.generate_grid(
        rows=args.rows,
        cols=args.cols,
        spacing=args.spacing,
        n_segments=args.segments,
        span_min=args.span_min,
        span_max=args.span_max,
        jitter=args.jitter,
        seed=args.seed,
    )
    synth_mod.write_fixture(fixture, args.out_dir)
    print(
        f"wrote grid fixture: {len(fixture.street.nodes)} nodes, "
        f"{len(fixture.street.edges)} edges, "
        f"{len(fixture.measurements.segments)} segments"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lowres-match",
        description="Match low-resolution measurement segments onto a street network.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--k", type=int, help="anchor neighbors per endpoint (default 4)")
        p.add_argument("--criterion", help="lc|rc|sc|ac (default rc)")
        p.add_argument("--tolerance", type=float, help="consolidation tolerance, m (default 4)")
        p.add_argument("--coords", choices=("metric", "lonlat"), help="input coordinate mode")
        p.add_argument("--workers", type=lambda s: None if s == "auto" else int(s),
                       help="matching parallelism (count or 'auto')")
        for crit in ("lc", "rc", "sc", "ac"):
            p.add_argument(f"--worst-{crit}", dest=f"worst_{crit}", type=int,
                           help=f"worst-N size for {crit}")

    p = sub.add_parser("ingest", help="validate, consolidate, and write prepared inputs")
    p.add_argument("--street-nodes", required=True)
    p.add_argument("--street-edges", required=True)
    p.add_argument("--measurements", required=True)
    p.add_argument("--out-dir", required=True)
    add_common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("match", help="match every measurement segment")
    p.add_argument("--prepared", required=True, help="directory written by ingest/synth")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--run-id", default="run")
    add_common(p)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("report", help="write analytics for an existing run")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--prepared", help="override the prepared dir recorded in the run")
    add_common(p)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="serve the review console API and UI")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--prepared", help="override the prepared dir recorded in the run")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8008)
    p.add_argument("--ui-dir", help="static review UI bundle to serve at /")
    add_common(p)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("synth", help="generate a grid benchmark fixture")
    p.add_argument("--rows", type=int, default=30)
    p.add_argument("--cols", type=int, default=30)
    p.add_argument("--spacing", type=float, default=100.0)
    p.add_argument("--segments", type=int, default=500)
    p.add_argument("--span-min", type=int, default=3)
    p.add_argument("--span-max", type=int, default=10)
    p.add_argument("--jitter", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except LowresMatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
