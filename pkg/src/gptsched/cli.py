"""Command-line entry point: gptsched gen|schedule|simulate|compare.

gen       write a seeded synthetic workload trace (JSON Lines)
schedule  run one algorithm over a trace, write outcome + report
simulate  replay a timed trace through the event-loop simulator,
          write a report and a snapshot CSV into an output directory
compare   run all three algorithms from identical initial clusters,
          write the comparison table

Exit codes: 0 success, 2 usage/validation/configuration error, 3 run
completed but some requests were unallocated. Diagnostics go to stderr
(verbosity via GPTSCHED_LOG=error|info|debug); data goes to files.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from .config import ExperimentConfig, default_config, load_cluster_config
from .metrics import Report
from .model import GptSchedError, Node, Threshold
from .reportio import (
    canonical_json,
    write_comparison,
    write_outcome_document,
    write_report,
)
from .simulator import run_batch, run_timeline
from .workload import generate_synthetic, load_trace, write_trace

logger = logging.getLogger(__name__)

_ALGORITHM_NAMES = ("max-util", "load-balance", "power")


def _configure_logging() -> None:
    raw = os.environ.get("GPTSCHED_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    level = levels.get(raw)
    if level is None:
        print(f"gptsched: ignoring unknown GPTSCHED_LOG value {raw!r}", file=sys.stderr)
        level = logging.ERROR
    logging.basicConfig(
        level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )


def _add_common_flags(parser: argparse.ArgumentParser, *, algorithm: bool) -> None:
    parser.add_argument("--workload", required=True, help="workload trace path (JSON Lines)")
    parser.add_argument("--config", help="experiment config path (JSON)")
    if algorithm:
        parser.add_argument(
            "--algorithm", required=True, choices=_ALGORITHM_NAMES, help="scheduling algorithm"
        )
    parser.add_argument("--threshold", type=float, help="override scheduler threshold (0, 1]")
    parser.add_argument(
        "--autoscale", choices=("on", "off"), help="override autoscale (on uses the config template)"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gptsched",
        description="Deterministic resource allocation and cluster simulation for GPT inference requests.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic workload trace")
    gen.add_argument("--config", help="experiment config path (generator section)")
    gen.add_argument("--count", type=int, help="number of requests")
    gen.add_argument("--seed", type=int, help="generator seed (unsigned 64-bit)")
    gen.add_argument("--out", required=True, help="output trace path")
    gen.set_defaults(handler=cmd_gen)

    schedule = sub.add_parser("schedule", help="run one algorithm over a workload")
    _add_common_flags(schedule, algorithm=True)
    schedule.add_argument("--out", required=True, help="output report path")
    schedule.add_argument("--format", choices=("json", "csv"), default="json")
    schedule.set_defaults(handler=cmd_schedule)

    simulate = sub.add_parser("simulate", help="replay a timed workload event by event")
    _add_common_flags(simulate, algorithm=True)
    simulate.add_argument(
        "--snapshot-interval", type=float, default=60.0, help="snapshot grid in seconds (> 0)"
    )
    simulate.add_argument("--out", required=True, help="output directory")
    simulate.add_argument("--format", choices=("json", "csv"), default="json")
    simulate.set_defaults(handler=cmd_simulate)

    compare = sub.add_parser("compare", help="run all three algorithms side by side")
    _add_common_flags(compare, algorithm=False)
    compare.add_argument("--out", required=True, help="output table path")
    compare.add_argument("--format", choices=("json", "csv"), default="csv")
    compare.set_defaults(handler=cmd_compare)
    return parser


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    config = load_cluster_config(args.config) if args.config else default_config()
    scheduler = config.scheduler
    if getattr(args, "threshold", None) is not None:
        scheduler = replace(scheduler, threshold=Threshold(args.threshold))
    autoscale = getattr(args, "autoscale", None)
    if autoscale == "off":
        scheduler = replace(scheduler, autoscale_template=None)
    elif autoscale == "on" and scheduler.autoscale_template is None:
        scheduler = replace(scheduler, autoscale_template=config.initial_nodes[0].template)
    if scheduler is not config.scheduler:
        config = replace(config, scheduler=scheduler)
    return config


def cmd_gen(args: argparse.Namespace) -> int:
    config = load_cluster_config(args.config) if args.config else default_config()
    spec = config.generator
    overrides = {}
    if args.count is not None:
        overrides["request_count"] = args.count
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        spec = replace(spec, **overrides)
    requests = generate_synthetic(spec)
    write_trace(requests, args.out)
    logger.info("wrote %d requests to %s", len(requests), args.out)
    return 0


def cmd_schedule(args: argparse.Namespace) -> int:
    config = _load_config(args)
    workload = load_trace(args.workload)
    nodes = config.fresh_nodes()
    outcome, report = run_batch(
        workload, nodes, args.algorithm, config.scheduler, coeffs=config.coefficients
    )
    if args.format == "json":
        write_outcome_document(args.algorithm, outcome, report, args.out)
    else:
        write_report(report, "csv", args.out, algorithm=args.algorithm)
    logger.info("schedule %s: wrote %s", args.algorithm, args.out)
    return 3 if report.unallocated_count else 0


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _load_config(args)
    workload = load_trace(args.workload)
    result = run_timeline(
        workload,
        config.initial_nodes,
        args.algorithm,
        config.scheduler,
        config.adaptor,
        args.snapshot_interval,
        coeffs=config.coefficients,
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / ("report.json" if args.format == "json" else "report.csv")
    write_report(result.report, args.format, report_path, algorithm=args.algorithm)
    write_report(result.snapshots, "csv", out_dir / "snapshots.csv")
    logger.info(
        "simulate %s: %d snapshots, %.6f Wh, wrote %s",
        args.algorithm,
        len(result.snapshots),
        result.report.energy_wh or 0.0,
        out_dir,
    )
    return 3 if result.report.unallocated_count else 0


def _nodes_fingerprint(nodes: Sequence[Node]) -> str:
    doc = [
        {
            "id": node.id,
            "capacity": [node.capacity.compute, node.capacity.memory_gib, node.capacity.storage_gib],
            "p_idle_w": node.template.p_idle_w,
            "p_max_w": node.template.p_max_w,
            "utilization": list(node.utilization.as_tuple()),
            "allocated": sorted(node.allocated),
        }
        for node in nodes
    ]
    return canonical_json(doc)


def cmd_compare(args: argparse.Namespace) -> int:
    config = _load_config(args)
    workload = load_trace(args.workload)
    baseline = _nodes_fingerprint(config.fresh_nodes())
    results: List[Tuple[str, Report]] = []
    worst = 0
    for name in _ALGORITHM_NAMES:
        nodes = config.fresh_nodes()
        if _nodes_fingerprint(nodes) != baseline:
            raise GptSchedError("initial cluster states diverged between comparison runs")
        _, report = run_batch(workload, nodes, name, config.scheduler, coeffs=config.coefficients)
        results.append((name, report))
        if report.unallocated_count:
            worst = 3
    write_comparison(results, args.format, args.out)
    logger.info("compare: wrote %s", args.out)
    return worst


def main(argv: Optional[Sequence[str]] = None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except GptSchedError as exc:
        print(f"gptsched: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"gptsched: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
