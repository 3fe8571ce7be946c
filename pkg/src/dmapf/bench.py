"""Run both repair methods on instances and tabulate the results."""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass

from .baseline import replan_all
from .plans import ConflictConfig, Path, Solution
from .resolver import Member, ResolveReport, TeamState, plan_existing, process_join
from .solver import TimeLimitExceeded
from .verify import check_solution

OK = "ok"
TIMEOUT = "timeout"
UNSOLVED = "unsolved"


def _pad(path: Path, T: int) -> Path:
    if path.makespan > T:
        raise ValueError(f"path of agent {path.agent} is longer than the makespan {T}")
    return Path(path.agent, path.states + (path.states[-1],) * (T - path.makespan), path.since)


def initial_team(inst, T, cfg=ConflictConfig(), *, deadline=None) -> TeamState | None:
    """Team state holding the existing agents, planning them if the file has no paths."""
    if inst.paths:
        paths = {aid: _pad(p, T) for aid, p in inst.paths.items()}
        problems = check_solution(inst.grid, inst.existing, Solution(T, dict(sorted(paths.items()))), cfg)
        if problems:
            raise ValueError("existing plans are invalid: " + "; ".join(problems[:3]))
    else:
        paths = plan_existing(inst.grid, inst.existing, T, cfg, deadline=deadline)
        if paths is None:
            return None
    state = TeamState(inst.grid, T, cfg=cfg)
    for task in sorted(inst.existing, key=lambda t: t.id):
        state.non_conflict[task.id] = Member(task, paths[task.id])
    return state


def run_conflict_resolution(inst, T, cfg=ConflictConfig(), *, deadline=None, team=None) -> ResolveReport:
    """Admit every join event in order, repairing after each one.

    ``team`` is the starting state from :func:`initial_team`; it is built
    here when omitted.
    """
    state = team if team is not None else initial_team(inst, T, cfg, deadline=deadline)
    total = ResolveReport()
    if state is None:
        return total
    for ev in inst.events:
        state, rep = process_join(state, list(ev.agents), ev.time, deadline=deadline)
        total.conflict_set_cardinality = max(total.conflict_set_cardinality, rep.conflict_set_cardinality)
        if rep.winning_subset_cardinality:
            total.winning_subset_cardinality = rep.winning_subset_cardinality
            total.winning_subset_number = rep.winning_subset_number
            total.winning_subset = rep.winning_subset
            total.final_conflict_set = rep.final_conflict_set
            total.searched_state = rep.searched_state
        total.decision_solver_calls += rep.decision_solver_calls
        total.expansion_rounds += rep.expansion_rounds
        total.replanned_agents |= rep.replanned_agents
        total.guard_triggered |= rep.guard_triggered
        if not rep.solved:
            return total
    total.solved = True
    total.solution = state.solution()
    return total


@dataclass
class BenchRecord:
    instance_name: str
    n_existing: int
    n_new: int
    makespan: int
    subset_method_time: float | None
    subset_method_status: str
    subset_method_solved: bool
    replan_all_time: float | None
    replan_all_status: str
    replan_all_solved: bool
    conflict_set_cardinality: int
    winning_subset_cardinality: int
    winning_subset_number: int
    time_limit: float | None = None


CSV_HEADER = [
    "instance", "n_existing", "n_new", "makespan",
    "subset_time_s", "subset_status", "subset_solved",
    "replan_all_time_s", "replan_all_status", "replan_all_solved",
    "conflict_set_cardinality", "winning_subset_cardinality", "winning_subset_number",
]
TIME_COLUMNS = ("subset_time_s", "replan_all_time_s")


def run_comparison(inst, name="instance", time_limit=None, cfg=ConflictConfig(), makespan=None):
    """Run both methods on ``inst``; returns ``(record, subset_solution, replan_solution)``.

    Every solution returned has passed :func:`check_solution`. A method that
    hits ``time_limit`` is recorded with status ``timeout`` and no time.
    """
    T = inst.horizon(makespan)
    tasks = inst.all_tasks()

    subset_sol, sub_time = None, None
    report = ResolveReport()
    # planning the existing team is setup, not part of either method
    team = initial_team(inst, T, cfg)
    start = time.perf_counter()
    deadline = time.monotonic() + time_limit if time_limit else None
    try:
        if team is not None:
            report = run_conflict_resolution(inst, T, cfg, deadline=deadline, team=team)
        sub_time = time.perf_counter() - start
        sub_status = OK if report.solved else UNSOLVED
        subset_sol = report.solution
    except TimeLimitExceeded:
        sub_status = TIMEOUT

    start = time.perf_counter()
    deadline = time.monotonic() + time_limit if time_limit else None
    full_sol, full_time = None, None
    try:
        full_sol = replan_all(inst.grid, tasks, T, cfg, deadline=deadline)
        full_time = time.perf_counter() - start
        full_status = OK if full_sol is not None else UNSOLVED
    except TimeLimitExceeded:
        full_status = TIMEOUT

    for sol in (subset_sol, full_sol):
        if sol is not None:
            problems = check_solution(inst.grid, tasks, sol, cfg)
            if problems:
                raise AssertionError(f"{name}: solution failed verification: {problems[:3]}")

    record = BenchRecord(
        instance_name=name,
        n_existing=len(inst.existing),
        n_new=inst.n_new,
        makespan=T,
        subset_method_time=sub_time,
        subset_method_status=sub_status,
        subset_method_solved=subset_sol is not None,
        replan_all_time=full_time,
        replan_all_status=full_status,
        replan_all_solved=full_sol is not None,
        conflict_set_cardinality=report.conflict_set_cardinality,
        winning_subset_cardinality=report.winning_subset_cardinality,
        winning_subset_number=report.winning_subset_number,
        time_limit=time_limit,
    )
    return record, subset_sol, full_sol


def _yn(flag):
    return "Y" if flag else "N"


def _seconds(t):
    return "" if t is None else f"{t:.2f}"


def _row(r: BenchRecord) -> list:
    fmt = _seconds
    return [
        r.instance_name, r.n_existing, r.n_new, r.makespan,
        fmt(r.subset_method_time), r.subset_method_status, _yn(r.subset_method_solved),
        fmt(r.replan_all_time), r.replan_all_status, _yn(r.replan_all_solved),
        r.conflict_set_cardinality, r.winning_subset_cardinality, r.winning_subset_number,
    ]


def emit_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow(_row(r))
    return buf.getvalue()


def structural_columns(csv_text: str) -> list:
    """CSV rows with the timing columns dropped (those vary run to run)."""
    rows = list(csv.reader(io.StringIO(csv_text)))
    if not rows:
        return []
    keep = [i for i, name in enumerate(rows[0]) if name not in TIME_COLUMNS]
    return [[row[i] for i in keep] for row in rows]


def _time_cell(t, status, limit):
    if status == TIMEOUT:
        return f">{limit:g}" if limit else ">limit"
    if t is None:
        return "-"
    return f"{t:.2f}"


def emit_table(records) -> str:
    """Fixed-width text table with one row group per instance."""
    head = ["Instance", "# new", "Makespan", "Subset CPU [s]", "Subset Y/N",
            "All CPU [s]", "All Y/N", "|conflictSet|", "|subset|", "Subset #"]
    body = []
    last = None
    for r in records:
        label = r.instance_name if r.instance_name != last else ""
        if r.instance_name != last and last is not None:
            body.append(None)
        last = r.instance_name
        body.append([
            label, str(r.n_new), str(r.makespan),
            _time_cell(r.subset_method_time, r.subset_method_status, r.time_limit), _yn(r.subset_method_solved),
            _time_cell(r.replan_all_time, r.replan_all_status, r.time_limit), _yn(r.replan_all_solved),
            str(r.conflict_set_cardinality), str(r.winning_subset_cardinality), str(r.winning_subset_number),
        ])
    widths = [len(h) for h in head]
    for row in body:
        if row:
            widths = [max(w, len(c)) for w, c in zip(widths, row)]
    rule = "+" + "+".join("-" * (w + 2) for w in widths) + "+"

    def fmt(row):
        return "| " + " | ".join(c.rjust(w) for c, w in zip(row, widths)) + " |"

    lines = [rule, fmt(head), rule.replace("-", "=")]
    for row in body:
        lines.append(rule if row is None else fmt(row))
    lines.append(rule)
    return "\n".join(lines) + "\n"


def parse_suite(text: str):
    """Suite file: ``PATH [MAKESPAN]`` per line; ``%`` starts a comment."""
    entries = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("%", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) > 2:
            raise ValueError(f"suite line {lineno}: expected PATH [MAKESPAN]")
        T = None
        if len(parts) == 2 and parts[1] != "auto":
            T = int(parts[1])
        entries.append((parts[0], T))
    return entries

