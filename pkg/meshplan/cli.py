#!/usr/bin/env python3
"""
Command Line Interface for meshplan.

Provides one command per planning phase plus batch and utility commands:
    meshplan gen --config <preset|file> --seed S         - Generate a topology
    meshplan select --topology <json> --k K               - Select active links
    meshplan route --active <json>                        - Build routing trees
    meshplan tsgen --active <json> --routing <json>       - Transmission sets
    meshplan schedule --tss <json> --routing <json>       - Optimize set order
    meshplan plan --topology <json> --strategy FS         - All phases + feedback
    meshplan experiment --seeds 0-15 --out DIR            - Seeds x strategies grid
    meshplan runs --out DIR [--status failed]             - List experiment runs
    meshplan logs RUN_ID --out DIR [--tail N]             - Show a run log
    meshplan rm RUN_ID... --out DIR                       - Remove runs
    meshplan fixture diamond                              - Canonical test network
    meshplan check --topology|--config <json>             - Validators and oracles
    meshplan version                                      - Version information

Every artifact is JSON; commands write to --out or to stdout. Failures
print {"error": <class>, "message": <text>} on stderr and exit with 1
(2 for invalid arguments).
"""

import argparse
import json
import sys
from typing import List, NoReturn, Optional

from meshplan import __version__
from meshplan.utils import dumps_json, write_json


class UsageError(Exception):
    """Invalid command line arguments."""


def _print_error(kind: str, message: str) -> None:
    print(
        json.dumps({"error": kind, "message": message}, sort_keys=True), file=sys.stderr
    )


class JsonErrorParser(argparse.ArgumentParser):
    """ArgumentParser reporting usage errors as JSON objects."""

    def error(self, message: str) -> NoReturn:
        _print_error(UsageError.__name__, message)
        sys.exit(2)


def parse_fanout(value: str):
    """--k value: a positive integer or "auto"."""
    if value == "auto":
        return value
    try:
        k = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected a positive integer or 'auto', got '{value}'"
        )
    if k < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {k}")
    return k


def _strategy(value: str) -> str:
    return value.strip().upper()


def _add_out(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", "-o", help="Output file (default: stdout)")


def _add_anneal(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="Annealing random seed")
    parser.add_argument("--anneal-steps", type=int, help="Annealing steps per restart")
    parser.add_argument("--restarts", type=int, help="Annealing restarts")
    parser.add_argument(
        "--brute-force-limit",
        type=int,
        help="Largest |TSS| searched exhaustively (default: 8)",
    )


def create_parser() -> argparse.ArgumentParser:
    """Create argument parser with all commands and options."""
    parser = JsonErrorParser(
        prog="meshplan",
        description="meshplan: link selection, routing and TDMA scheduling for "
        "sectorized wireless mesh backhaul networks",
    )

    # Global options
    parser.add_argument(
        "--version", "-v", action="version", version=f"meshplan {__version__}"
    )
    parser.add_argument("--debug", action="store_true", help="Enable debug output")

    subparsers = parser.add_subparsers(dest="command", help="Commands")

    # =========================================================================
    # gen command
    # =========================================================================
    gen_parser = subparsers.add_parser("gen", help="Generate a candidate topology")
    gen_parser.add_argument(
        "--config",
        "-c",
        default="dense-urban",
        help="Generator config file or preset name (default: dense-urban)",
    )
    gen_parser.add_argument("--seed", type=int, help="Override the config seed")
    _add_out(gen_parser)

    # =========================================================================
    # select command
    # =========================================================================
    select_parser = subparsers.add_parser("select", help="Select active links")
    select_parser.add_argument("--topology", "-t", required=True, help="Topology JSON")
    select_parser.add_argument(
        "--k",
        type=parse_fanout,
        default=2,
        help="Links per sector, or 'auto' (default: 2)",
    )
    select_parser.add_argument(
        "--bipartite", action="store_true", help="Keep the active topology bipartite"
    )
    select_parser.add_argument("--avoid", help="Avoid list JSON")
    select_parser.add_argument(
        "--max-k-escalation",
        type=int,
        default=2,
        help="Times k may grow to reconnect nodes (default: 2)",
    )
    _add_out(select_parser)

    # =========================================================================
    # route command
    # =========================================================================
    route_parser = subparsers.add_parser("route", help="Build disjoint routing trees")
    route_parser.add_argument(
        "--active", "-a", required=True, help="Active topology JSON"
    )
    route_parser.add_argument("--max-trees", type=int, help="Keep the N heaviest stems")
    _add_out(route_parser)

    # =========================================================================
    # tsgen command
    # =========================================================================
    tsgen_parser = subparsers.add_parser("tsgen", help="Build transmission sets")
    tsgen_parser.add_argument(
        "--active", "-a", required=True, help="Active topology JSON"
    )
    tsgen_parser.add_argument("--routing", "-r", required=True, help="Routing JSON")
    tsgen_parser.add_argument(
        "--fill-sectors",
        action="store_true",
        help="Fill every free sector of a node once its mode is fixed",
    )
    tsgen_parser.add_argument(
        "--threshold",
        type=int,
        help="Report no troublesome links when |TSS| is at most this",
    )
    _add_out(tsgen_parser)

    # =========================================================================
    # schedule command
    # =========================================================================
    schedule_parser = subparsers.add_parser("schedule", help="Optimize the set order")
    schedule_parser.add_argument("--tss", required=True, help="Transmission sets JSON")
    schedule_parser.add_argument("--routing", "-r", required=True, help="Routing JSON")
    _add_anneal(schedule_parser)
    schedule_parser.add_argument(
        "--force-anneal", action="store_true", help="Anneal even for short schedules"
    )
    schedule_parser.add_argument(
        "--alternatives",
        action="store_true",
        help="Also report delays of non-primary tree paths",
    )
    _add_out(schedule_parser)

    # =========================================================================
    # plan command
    # =========================================================================
    plan_parser = subparsers.add_parser("plan", help="Run every phase with feedback")
    plan_parser.add_argument("--topology", "-t", required=True, help="Topology JSON")
    plan_parser.add_argument(
        "--strategy",
        "-s",
        type=_strategy,
        choices=["BS", "BA", "FS", "FA"],
        default="FS",
        help="Selection shape and set filling rule (default: FS)",
    )
    plan_parser.add_argument(
        "--k", type=parse_fanout, default=2, help="Links per sector"
    )
    plan_parser.add_argument(
        "--threshold", type=int, default=8, help="|TSS| above which feedback runs"
    )
    plan_parser.add_argument(
        "--max-rounds", type=int, default=8, help="Feedback round limit (default: 8)"
    )
    plan_parser.add_argument("--max-trees", type=int, help="Keep the N heaviest stems")
    plan_parser.add_argument(
        "--diagnostics",
        action="store_true",
        help="Optimize every feedback round and record delay changes",
    )
    _add_anneal(plan_parser)
    _add_out(plan_parser)

    # =========================================================================
    # experiment command
    # =========================================================================
    exp_parser = subparsers.add_parser(
        "experiment", help="Run a seeds x strategies grid"
    )
    exp_parser.add_argument(
        "--config",
        "-c",
        default="dense-urban",
        help="Generator config file or preset name (default: dense-urban)",
    )
    exp_parser.add_argument("--seeds", default="0-15", help="Seed list (default: 0-15)")
    exp_parser.add_argument(
        "--strategies", default="BS,BA,FS,FA", help="Strategy list (default: all four)"
    )
    exp_parser.add_argument("--out", "-o", required=True, help="Output directory")
    exp_parser.add_argument(
        "--k", type=parse_fanout, default=2, help="Links per sector"
    )
    exp_parser.add_argument(
        "--threshold", type=int, default=8, help="Feedback threshold"
    )
    exp_parser.add_argument("--max-rounds", type=int, default=8, help="Feedback limit")
    exp_parser.add_argument(
        "--diagnostics", action="store_true", help="Feedback diagnostics"
    )
    exp_parser.add_argument(
        "--anneal-steps", type=int, help="Annealing steps per restart"
    )
    exp_parser.add_argument("--restarts", type=int, help="Annealing restarts")
    exp_parser.add_argument("--threads", type=int, help="Worker processes")
    exp_parser.add_argument(
        "--no-resume", action="store_true", help="Recompute runs already complete"
    )
    exp_parser.add_argument(
        "--no-alternatives",
        action="store_true",
        help="Skip delay evaluation of non-primary paths",
    )

    # =========================================================================
    # runs, logs and rm commands
    # =========================================================================
    runs_parser = subparsers.add_parser("runs", help="List the runs of an experiment")
    runs_parser.add_argument("--out", "-o", required=True, help="Experiment directory")
    runs_parser.add_argument(
        "--status", choices=["pending", "running", "done", "failed"], help="Filter"
    )
    runs_parser.add_argument(
        "--quiet", "-q", action="store_true", help="Only display run ids"
    )
    runs_parser.add_argument(
        "--format",
        "-f",
        choices=["table", "json"],
        default="table",
        help="Output format (default: table)",
    )

    logs_parser = subparsers.add_parser("logs", help="Show the log of one run")
    logs_parser.add_argument("run_id", help="Run id, e.g. seed0003-FS")
    logs_parser.add_argument("--out", "-o", required=True, help="Experiment directory")
    logs_parser.add_argument(
        "--tail", "-n", type=int, help="Number of lines to show from end"
    )
    logs_parser.add_argument(
        "--timestamps", "-t", action="store_true", help="Show timestamps"
    )

    rm_parser = subparsers.add_parser("rm", help="Remove runs so a resume redoes them")
    rm_parser.add_argument("run_id", nargs="+", help="Run id(s)")
    rm_parser.add_argument("--out", "-o", required=True, help="Experiment directory")

    # =========================================================================
    # fixture command
    # =========================================================================
    fixture_parser = subparsers.add_parser("fixture", help="Write a canonical topology")
    fixture_parser.add_argument(
        "name",
        choices=["diamond", "diamond-shared", "star", "chain", "path", "single-link"],
        help="Fixture name",
    )
    _add_out(fixture_parser)

    # =========================================================================
    # check command
    # =========================================================================
    check_parser = subparsers.add_parser("check", help="Validate a topology or plan")
    check_group = check_parser.add_mutually_exclusive_group(required=True)
    check_group.add_argument("--topology", "-t", help="Topology JSON")
    check_group.add_argument("--config", "-c", help="Network configuration JSON")

    # =========================================================================
    # version command
    # =========================================================================
    version_parser = subparsers.add_parser("version", help="Show version information")
    version_parser.add_argument(
        "--format", "-f", choices=["text", "json"], default="text", help="Output format"
    )

    return parser


def _emit(data, out: Optional[str]) -> None:
    if out:
        write_json(out, data)
    else:
        sys.stdout.write(dumps_json(data))


def _anneal_config(args: argparse.Namespace):
    from meshplan.scheduler import AnnealConfig

    overrides = {"seed": getattr(args, "seed", 0) or 0}
    if getattr(args, "anneal_steps", None) is not None:
        overrides["steps"] = args.anneal_steps
    if getattr(args, "restarts", None) is not None:
        overrides["restarts"] = args.restarts
    if getattr(args, "brute_force_limit", None) is not None:
        overrides["brute_force_limit"] = args.brute_force_limit
    return AnnealConfig(**overrides)


# =============================================================================
# Command Handlers
# =============================================================================


def cmd_gen(args: argparse.Namespace) -> int:
    """Handle gen command."""
    from meshplan.logger import get_logger
    from meshplan.netmodel import topology_to_dict
    from meshplan.topogen import (
        generate_topology,
        load_generator_config,
        topology_summary,
        validate_generator_config,
        with_seed,
    )

    config = load_generator_config(args.config)
    if args.seed is not None:
        config = with_seed(config, args.seed)
    for warning in validate_generator_config(config):
        get_logger(__name__).warning("gen: %s", warning)

    topology = generate_topology(config)
    _emit(topology_to_dict(topology), args.out)
    if args.out:
        print(json.dumps(topology_summary(topology), sort_keys=True))
    return 0


def cmd_select(args: argparse.Namespace) -> int:
    """Handle select command."""
    from meshplan.netmodel import load_topology
    from meshplan.selection import (
        SelectionConfig,
        active_to_dict,
        parse_avoid,
        select_active_links,
        suggest_fanout,
        weight_links,
    )
    from meshplan.utils import read_json

    topology = load_topology(args.topology)
    k = suggest_fanout(topology.N) if args.k == "auto" else args.k
    avoid = parse_avoid(read_json(args.avoid)) if args.avoid else frozenset()

    config = SelectionConfig(
        k=k, bipartite=args.bipartite, max_k_escalation=args.max_k_escalation
    )
    active = select_active_links(topology, weight_links(topology), config, avoid)
    _emit(active_to_dict(active), args.out)
    return 0


def cmd_route(args: argparse.Namespace) -> int:
    """Handle route command."""
    from meshplan.routing import compute_mdst, routing_to_dict
    from meshplan.selection import load_active

    routing = compute_mdst(load_active(args.active), max_trees=args.max_trees)
    _emit(routing_to_dict(routing), args.out)
    return 0


def cmd_tsgen(args: argparse.Namespace) -> int:
    """Handle tsgen command."""
    from meshplan.routing import load_routing
    from meshplan.selection import load_active
    from meshplan.tsgen import build_transmission_sets, schedule_weights, tss_to_dict

    active = load_active(args.active)
    routing = load_routing(args.routing)
    tss = build_transmission_sets(
        active,
        schedule_weights(active, routing),
        args.fill_sectors,
        threshold=args.threshold,
    )
    _emit(tss_to_dict(tss), args.out)
    return 0


def cmd_schedule(args: argparse.Namespace) -> int:
    """Handle schedule command."""
    from meshplan.routing import alternative_paths, load_routing
    from meshplan.scheduler import evaluate_paths, optimize_schedule, schedule_to_dict
    from meshplan.tsgen import load_tss

    tss = load_tss(args.tss)
    routing = load_routing(args.routing)
    paths = routing.primary_paths()
    schedule, report = optimize_schedule(
        tss, paths, _anneal_config(args), force_anneal=args.force_anneal
    )
    if args.alternatives:
        report = evaluate_paths(schedule, tss, paths, alternative_paths(routing))
    _emit(schedule_to_dict(schedule, report), args.out)
    return 0


def _pipeline_config(args: argparse.Namespace, strategy: str = "FS", n: int = 0):
    from meshplan.pipeline import PipelineConfig, Strategy
    from meshplan.selection import SelectionConfig, suggest_fanout

    k = suggest_fanout(n) if args.k == "auto" else args.k
    return PipelineConfig(
        strategy=Strategy.from_name(strategy),
        selection=SelectionConfig(k=k),
        tss_threshold=args.threshold,
        max_feedback_rounds=args.max_rounds,
        anneal=_anneal_config(args),
        diagnostics=args.diagnostics,
        max_trees=getattr(args, "max_trees", None),
    )


def cmd_plan(args: argparse.Namespace) -> int:
    """Handle plan command."""
    from meshplan.netmodel import load_topology
    from meshplan.pipeline import configuration_to_dict, run_pipeline

    topology = load_topology(args.topology)
    config = _pipeline_config(args, args.strategy, topology.N)
    configuration = run_pipeline(topology, config)
    _emit(configuration_to_dict(configuration), args.out)
    return 0


def cmd_experiment(args: argparse.Namespace) -> int:
    """Handle experiment command."""
    from meshplan.experiment import BatchSpec, run_batch
    from meshplan.topogen import LAYER_ORDER, load_generator_config
    from meshplan.utils import parse_seed_list

    generator = load_generator_config(args.config)
    # With --k auto the fan-out follows the grid size of one generated network
    n = sum(
        cells[0] * cells[1]
        for cells in (generator.layer(kind).cell_counts() for kind in LAYER_ORDER)
    )
    strategies = [s for s in args.strategies.split(",") if s.strip()]
    spec = BatchSpec(
        generator=generator,
        seeds=parse_seed_list(args.seeds),
        strategies=strategies,
        pipeline=_pipeline_config(args, n=n),
        out_dir=args.out,
        include_alternatives=not args.no_alternatives,
    )
    result = run_batch(spec, resume=not args.no_resume, threads=args.threads)
    print(
        json.dumps(
            {
                "runs": len(spec.runs()),
                "computed": len(result.computed),
                "skipped": len(result.skipped),
                "failed": len(result.failed),
            },
            indent=2,
            sort_keys=True,
        )
    )
    return 1 if result.failed else 0


def cmd_runs(args: argparse.Namespace) -> int:
    """Handle runs command."""
    from dataclasses import asdict
    from datetime import datetime

    from meshplan.store import RunStore

    store = RunStore(args.out, create=False)
    records = store.list(args.status)

    if args.quiet:
        for record in records:
            print(record.id)
    elif args.format == "json":
        data = {"runs": [asdict(r) for r in records], "summary": store.summary()}
        print(json.dumps(data, indent=2, sort_keys=True))
    else:
        print(f"{'RUN ID':<16} {'STATUS':<9} {'RUNTIME':>9}  {'FINISHED'}")
        for record in records:
            runtime = "-" if record.runtime_s is None else f"{record.runtime_s:.2f}s"
            finished = (
                datetime.fromtimestamp(record.finished_at).strftime("%Y-%m-%d %H:%M")
                if record.finished_at
                else "-"
            )
            print(f"{record.id:<16} {record.status:<9} {runtime:>9}  {finished}")
        counts = store.summary()
        print(", ".join(f"{status}: {counts[status]}" for status in sorted(counts)))

    return 0


def cmd_logs(args: argparse.Namespace) -> int:
    """Handle logs command."""
    from meshplan.logger import read_logs
    from meshplan.store import RunStore

    store = RunStore(args.out, create=False)
    store.require(args.run_id)
    for line in read_logs(
        store.path(args.run_id), tail=args.tail, timestamps=args.timestamps
    ):
        print(line)
    return 0


def cmd_rm(args: argparse.Namespace) -> int:
    """Handle rm command."""
    from meshplan.store import RunStore

    store = RunStore(args.out, create=False)
    exit_code = 0
    for run_id in args.run_id:
        if store.get(run_id) is not None and store.delete(run_id):
            print(f"Removed: {run_id}")
        else:
            _print_error("StoreError", f"Run not found: {run_id}")
            exit_code = 1
    return exit_code


def cmd_fixture(args: argparse.Namespace) -> int:
    """Handle fixture command."""
    from meshplan.fixtures import fixture
    from meshplan.netmodel import topology_to_dict

    _emit(topology_to_dict(fixture(args.name)), args.out)
    return 0


def cmd_check(args: argparse.Namespace) -> int:
    """Handle check command."""
    errors: List[str] = []
    if args.topology:
        from meshplan.netmodel import load_topology, validate

        errors = validate(load_topology(args.topology))
    else:
        from meshplan.oracles import (
            check_bipartite,
            check_routing,
            check_transmission_sets,
        )
        from meshplan.pipeline import load_configuration, validate_configuration

        configuration = load_configuration(args.config)
        errors = validate_configuration(configuration)
        errors += check_transmission_sets(configuration.active, configuration.tss)
        errors += check_routing(configuration.routing, configuration.active)
        if configuration.active.bipartite:
            errors += check_bipartite(configuration.active)

    print(json.dumps({"valid": not errors, "errors": errors}, indent=2, sort_keys=True))
    return 0 if not errors else 1


def cmd_version(args: argparse.Namespace) -> int:
    """Handle version command."""
    import platform

    import networkx
    import numpy

    version_info = {
        "meshplan": __version__,
        "Python": platform.python_version(),
        "numpy": numpy.__version__,
        "networkx": networkx.__version__,
    }

    if args.format == "json":
        print(json.dumps(version_info, indent=2))
    else:
        print(f"meshplan version {__version__}")
        print(f"Python version {platform.python_version()}")
        print(f"numpy {numpy.__version__}, networkx {networkx.__version__}")

    return 0


# =============================================================================
# Main Entry Point
# =============================================================================


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    from meshplan.logger import configure_logging
    from meshplan.utils import MeshPlanError

    parser = create_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return 0

    configure_logging("DEBUG" if args.debug else None)

    # Dispatch to command handler
    handlers = {
        "gen": cmd_gen,
        "select": cmd_select,
        "route": cmd_route,
        "tsgen": cmd_tsgen,
        "schedule": cmd_schedule,
        "plan": cmd_plan,
        "experiment": cmd_experiment,
        "runs": cmd_runs,
        "logs": cmd_logs,
        "rm": cmd_rm,
        "fixture": cmd_fixture,
        "check": cmd_check,
        "version": cmd_version,
    }

    handler = handlers[args.command]
    try:
        return handler(args)
    except KeyboardInterrupt:
        print("\nInterrupted", file=sys.stderr)
        return 130
    except (MeshPlanError, OSError, ValueError) as e:
        if args.debug:
            raise
        _print_error(type(e).__name__, str(e))
        return 1


if __name__ == "__main__":
    sys.exit(main())
