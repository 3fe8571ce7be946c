"""Command-line entry point: ``dmapf solve|verify|bench|gen``."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path as FsPath

from .baseline import replan_all
from .bench import emit_csv, emit_table, parse_suite, run_comparison, run_conflict_resolution
from .plans import ConflictConfig
from .resolver import ResolveReport
from .scenario_io import (
    ParseError,
    generate_instance,
    parse_instance,
    parse_solution,
    serialize_instance,
    write_report,
    write_solution,
)
from .solver import TimeLimitExceeded
from .verify import check_solution
from .world import NoAutoMakespan

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_TIMEOUT = 0, 1, 2, 3


def _makespan(value: str):
    if value == "auto":
        return None
    try:
        n = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'auto' or a non-negative integer, got {value!r}") from None
    if n < 0:
        raise argparse.ArgumentTypeError("makespan must be non-negative")
    return n


def _config(args) -> ConflictConfig:
    if args.no_swap_conflicts:
        return ConflictConfig(forbid_swaps=False, count_swaps_in_penalty=False)
    return ConflictConfig(forbid_swaps=True, count_swaps_in_penalty=not args.vertex_only_penalty)


def _add_conflict_flags(p):
    p.add_argument("--no-swap-conflicts", action="store_true",
                   help="allow head-on swaps (vertex conflicts only)")
    p.add_argument("--vertex-only-penalty", action="store_true",
                   help="penalise only shared cells against fixed agents; swaps stay forbidden")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dmapf", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="repair or replan an instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--mode", choices=["conflict-resolution", "replan-all"], default="conflict-resolution")
    p.add_argument("--makespan", type=_makespan, default=None, metavar="auto|N")
    _add_conflict_flags(p)
    p.add_argument("--out-solution", required=True)
    p.add_argument("--out-report", required=True)
    p.add_argument("--time-limit", type=float, default=None, metavar="SECONDS")

    p = sub.add_parser("verify", help="check a solution file against an instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--solution", required=True)
    p.add_argument("--no-swap-conflicts", action="store_true")

    p = sub.add_parser("bench", help="compare both methods on a suite of instances")
    p.add_argument("--suite", required=True)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-table", default=None)
    p.add_argument("--out-solutions", default=None, metavar="DIR",
                   help="write <name>.T<makespan>.subset.sol and .all.sol for every solved run")
    p.add_argument("--time-limit", type=float, default=None, metavar="SECONDS")
    _add_conflict_flags(p)

    p = sub.add_parser("gen", help="generate a random instance")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--existing", type=int, required=True)
    p.add_argument("--new", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--contested", action="store_true",
                   help="send the first new agents corner to corner with no slack")
    p.add_argument("--obstacles", type=float, default=0.0, metavar="DENSITY")
    p.add_argument("--makespan", type=_makespan, default=None, metavar="auto|N")
    return parser


def _read_instance(path):
    return parse_instance(FsPath(path).read_text())


def cmd_solve(args) -> int:
    inst = _read_instance(args.instance)
    cfg = _config(args)
    T = inst.horizon(args.makespan)
    deadline = time.monotonic() + args.time_limit if args.time_limit else None
    try:
        if args.mode == "conflict-resolution":
            report = run_conflict_resolution(inst, T, cfg, deadline=deadline)
        else:
            report = ResolveReport()
            sol = replan_all(inst.grid, inst.all_tasks(), T, cfg, deadline=deadline)
            report.solved, report.solution = sol is not None, sol
            if sol is not None:
                report.replanned_agents = set(sol.paths)
    except TimeLimitExceeded:
        FsPath(args.out_report).write_text(f"outcome=timeout\nmode={args.mode}\nmakespan={T}\n")
        FsPath(args.out_solution).write_text("")
        print("time limit reached", file=sys.stderr)
        return EXIT_TIMEOUT
    FsPath(args.out_report).write_text(write_report(report, mode=args.mode, makespan=T))
    FsPath(args.out_solution).write_text(write_solution(report.solution) if report.solved else "")
    if not report.solved:
        print(f"unsolvable at makespan {T}", file=sys.stderr)
        return EXIT_FAIL
    problems = check_solution(inst.grid, inst.all_tasks(), report.solution, cfg)
    if problems:  # pragma: no cover - the solvers are sound
        print("\n".join(problems), file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_verify(args) -> int:
    inst = _read_instance(args.instance)
    sol = parse_solution(FsPath(args.solution).read_text())
    cfg = ConflictConfig(forbid_swaps=not args.no_swap_conflicts)
    problems = check_solution(inst.grid, inst.all_tasks(), sol, cfg)
    for line in problems:
        print(line)
    if problems:
        return EXIT_FAIL
    print(f"valid: {len(sol.paths)} agents, makespan {sol.makespan}")
    return EXIT_OK


def cmd_bench(args) -> int:
    suite_path = FsPath(args.suite)
    entries = parse_suite(suite_path.read_text())
    cfg = _config(args)
    records = []
    out_dir = FsPath(args.out_solutions) if args.out_solutions else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    for rel, T in entries:
        path = (suite_path.parent / rel) if not FsPath(rel).is_absolute() else FsPath(rel)
        inst = _read_instance(path)
        name = path.stem
        record, sub_sol, all_sol = run_comparison(inst, name, args.time_limit, cfg, T)
        records.append(record)
        logging.getLogger("dmapf").info("%s: subset=%s all=%s", name, record.subset_method_status,
                                        record.replan_all_status)
        if out_dir:
            for tag, sol in (("subset", sub_sol), ("all", all_sol)):
                if sol is not None:
                    (out_dir / f"{name}.T{record.makespan}.{tag}.sol").write_text(write_solution(sol))
    FsPath(args.out_csv).write_text(emit_csv(records))
    table = emit_table(records)
    if args.out_table:
        FsPath(args.out_table).write_text(table)
    print(table, end="")
    return EXIT_OK


def cmd_gen(args) -> int:
    inst = generate_instance(args.width, args.height, args.existing, args.new, args.seed,
                             obstacle_density=args.obstacles, contested=args.contested,
                             makespan=args.makespan)
    FsPath(args.out).write_text(serialize_instance(inst))
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "verify": cmd_verify, "bench": cmd_bench, "gen": cmd_gen}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ParseError, NoAutoMakespan, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
