"""Text formats for instances, solutions and reports, plus the instance generator.

Instance format, one record per line::

    % comment
    ....            grid rows: '.' free, '#', '@' or 'T' blocked; row i is y = i
    .#..
    makespan 6      optional
    agent ID SX SY GX GY [JOIN]
    path ID X0 Y0 X1 Y1 ...      optional plans of the existing agents
    join TIME       later agent lines belong to a join event at TIME

Agents listed before the first ``join`` line are the existing team.

Solution format: one ``ID T X Y`` line per agent and timestep at which the
agent is present, sorted by (ID, T).
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field

from .plans import AgentTask, ConflictConfig, Path, Solution
from .resolver import ResolveReport, plan_existing
from .world import GridMap, NoAutoMakespan, Position, auto_makespan

GRID_ROW = re.compile(r"^[.#@T]+$")
BLOCKED_CHARS = "#@T"


class ParseError(ValueError):
    def __init__(self, line: int, column: int, message: str):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class JoinEvent:
    time: int
    agents: tuple


@dataclass
class Instance:
    grid: GridMap
    existing: list = field(default_factory=list)
    events: list = field(default_factory=list)
    paths: dict = field(default_factory=dict)
    makespan: int | None = None

    def all_tasks(self) -> list:
        tasks = list(self.existing)
        for ev in self.events:
            tasks.extend(ev.agents)
        return sorted(tasks, key=lambda t: t.id)

    @property
    def n_new(self) -> int:
        return sum(len(ev.agents) for ev in self.events)

    def horizon(self, override: int | None = None) -> int:
        """Makespan to plan with: ``override``, then the file value, then path length, then auto."""
        if override is not None:
            return override
        if self.makespan is not None:
            return self.makespan
        if self.paths:
            return next(iter(self.paths.values())).makespan
        return auto_makespan(self.grid)


def _ints(tokens, lineno, line, count=None):
    values = []
    col = 1
    for tok in tokens:
        col = line.index(tok, col - 1) + 1
        try:
            values.append(int(tok))
        except ValueError:
            raise ParseError(lineno, col, f"expected an integer, got {tok!r}") from None
        col += len(tok)
    if count is not None and len(values) not in count:
        raise ParseError(lineno, 1, f"expected {' or '.join(map(str, count))} numbers, got {len(values)}")
    return values


def parse_instance(text: str) -> Instance:
    rows = []
    rows_done = False
    records = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        if GRID_ROW.match(line):
            if rows_done:
                raise ParseError(lineno, 1, "grid rows must form one contiguous block at the top")
            if rows and len(line) != len(rows[0][1]):
                raise ParseError(lineno, min(len(line), len(rows[0][1])) + 1,
                                 f"row has width {len(line)}, expected {len(rows[0][1])}")
            rows.append((lineno, line))
            continue
        if not rows or (not rows_done and line[0] in ".#@T" and " " not in line):
            bad = next((i for i, ch in enumerate(line) if ch not in ".#@T"), 0)
            raise ParseError(lineno, raw.index(line) + bad + 1, "expected a grid row ('.', '#', '@', 'T')")
        rows_done = True
        records.append((lineno, raw))
    if not rows:
        raise ParseError(1, 1, "missing grid")

    blocked = {Position(x, y) for y, (_, row) in enumerate(rows) for x, ch in enumerate(row) if ch in BLOCKED_CHARS}
    grid = GridMap(len(rows[0][1]), len(rows), frozenset(blocked))
    inst = Instance(grid)
    seen = set()
    event_time = None
    event_agents = []
    path_lines = {}

    def close_event():
        if event_time is not None:
            if not event_agents:
                raise ParseError(lineno, 1, f"join event at t={event_time} has no agents")
            inst.events.append(JoinEvent(event_time, tuple(event_agents)))

    lineno = rows[-1][0]
    for lineno, raw in records:
        tokens = raw.split()
        key, rest = tokens[0], tokens[1:]
        if key == "makespan":
            (value,) = _ints(rest, lineno, raw, (1,))
            if value < 0:
                raise ParseError(lineno, 1, "makespan must be non-negative")
            inst.makespan = value
        elif key == "agent":
            vals = _ints(rest, lineno, raw, (5, 6))
            aid, sx, sy, gx, gy = vals[:5]
            join = vals[5] if len(vals) == 6 else (event_time or 0)
            if aid in seen or aid < 0:
                raise ParseError(lineno, raw.index(rest[0]) + 1, f"duplicate or negative agent id {aid}")
            expected = 0 if event_time is None else event_time
            if join != expected:
                raise ParseError(lineno, 1, f"agent {aid} has join time {join}, expected {expected}")
            for cell in ((sx, sy), (gx, gy)):
                if not grid.in_bounds(cell):
                    raise ParseError(lineno, 1, f"cell {cell} outside the {grid.width}x{grid.height} grid")
                if cell in grid.blocked:
                    raise ParseError(lineno, 1, f"cell {cell} is blocked")
            seen.add(aid)
            task = AgentTask(aid, (sx, sy), (gx, gy), join)
            (inst.existing if event_time is None else event_agents).append(task)
        elif key == "join":
            (t,) = _ints(rest, lineno, raw, (1,))
            if event_time is not None and t <= event_time:
                raise ParseError(lineno, 1, "join events must have strictly increasing times")
            close_event()
            event_time, event_agents = t, []
        elif key == "path":
            vals = _ints(rest, lineno, raw)
            if len(vals) < 3 or len(vals) % 2 == 0:
                raise ParseError(lineno, 1, "path needs an id followed by x y pairs")
            aid = vals[0]
            if aid in path_lines:
                raise ParseError(lineno, 1, f"second path for agent {aid}")
            cells = tuple(Position(vals[i], vals[i + 1]) for i in range(1, len(vals), 2))
            for cell in cells:
                if not grid.in_bounds(cell):
                    raise ParseError(lineno, 1, f"cell {tuple(cell)} outside the grid")
            path_lines[aid] = (lineno, cells)
        else:
            raise ParseError(lineno, raw.index(key) + 1, f"unknown record {key!r}")
    close_event()

    existing_ids = {t.id for t in inst.existing}
    for aid, (lineno, cells) in sorted(path_lines.items()):
        if aid not in existing_ids:
            raise ParseError(lineno, 1, f"path given for agent {aid}, which is not an existing agent")
        inst.paths[aid] = Path(aid, cells)
    if inst.paths:
        if set(inst.paths) != existing_ids:
            raise ParseError(lineno, 1, "paths must be given for all existing agents or none")
        lengths = {p.makespan for p in inst.paths.values()}
        if len(lengths) != 1:
            raise ParseError(lineno, 1, "existing paths have different lengths")
        if inst.makespan is not None and lengths != {inst.makespan}:
            raise ParseError(lineno, 1, f"paths have makespan {lengths.pop()}, file says {inst.makespan}")
    return inst


def serialize_instance(inst: Instance) -> str:
    lines = []
    for y in range(inst.grid.height):
        lines.append("".join("#" if (x, y) in inst.grid.blocked else "." for x in range(inst.grid.width)))
    if inst.makespan is not None:
        lines.append(f"makespan {inst.makespan}")
    for t in inst.existing:
        lines.append(f"agent {t.id} {t.start.x} {t.start.y} {t.goal.x} {t.goal.y} {t.join_time}")
    for aid, path in sorted(inst.paths.items()):
        cells = " ".join(f"{p.x} {p.y}" for p in path.states)
        lines.append(f"path {aid} {cells}")
    for ev in inst.events:
        lines.append(f"join {ev.time}")
        for t in ev.agents:
            lines.append(f"agent {t.id} {t.start.x} {t.start.y} {t.goal.x} {t.goal.y} {t.join_time}")
    return "\n".join(lines) + "\n"


def write_solution(sol: Solution) -> str:
    lines = []
    for aid, path in sorted(sol.paths.items()):
        for t in range(path.since, len(path.states)):
            p = path.states[t]
            lines.append(f"{aid} {t} {p.x} {p.y}")
    return "\n".join(lines) + ("\n" if lines else "")


def parse_solution(text: str) -> Solution:
    steps = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        aid, t, x, y = _ints(line.split(), lineno, line, (4,))
        entries = steps.setdefault(aid, [])
        expected = entries[-1][0] + 1 if entries else t
        if t != expected:
            raise ParseError(lineno, 1, f"agent {aid}: expected timestep {expected}, got {t}")
        entries.append((t, Position(x, y)))
    ends = {entries[-1][0] for entries in steps.values()}
    if len(ends) > 1:
        raise ParseError(1, 1, f"agents end at different timesteps {sorted(ends)}")
    T = ends.pop() if ends else 0
    paths = {}
    for aid, entries in sorted(steps.items()):
        since, first = entries[0]
        cells = (first,) * since + tuple(p for _, p in entries)
        paths[aid] = Path(aid, cells, since)
    return Solution(T, paths)


def write_report(report: ResolveReport, **extra) -> str:
    fields = {
        "outcome": report.outcome,
        "conflict_set_cardinality": report.conflict_set_cardinality,
        "winning_subset_cardinality": report.winning_subset_cardinality,
        "winning_subset_number": report.winning_subset_number,
        "decision_solver_calls": report.decision_solver_calls,
        "expansion_rounds": report.expansion_rounds,
        "replanned_agents": ",".join(str(a) for a in sorted(report.replanned_agents)),
        "guard_triggered": str(report.guard_triggered).lower(),
        "winning_subset": ",".join(str(a) for a in report.winning_subset),
        "final_conflict_set": ",".join(str(a) for a in report.final_conflict_set),
    }
    fields.update(extra)
    return "".join(f"{k}={v}\n" for k, v in fields.items())


def parse_report(text: str) -> dict:
    out = {}
    for line in text.splitlines():
        if line.strip():
            key, _, value = line.partition("=")
            out[key] = value
    return out


_CORNER_RUNS = 4


def _corner_tasks(w, h):
    a, b, c, d = (0, 0), (w - 1, h - 1), (w - 1, 0), (0, h - 1)
    return [(a, b), (b, a), (c, d), (d, c)]


def generate_instance(width, height, n_existing, n_new, seed, *, obstacle_density=0.0,
                      contested=False, makespan=None, cfg=ConflictConfig(), max_attempts=200) -> Instance:
    """Random instance with a pre-planned, conflict-free existing team.

    Starts are pairwise distinct and goals are pairwise distinct. With
    ``contested`` the first (up to four) new agents travel corner to opposite
    corner with no slack at the auto makespan, which tends to force conflicts.
    """
    rng = random.Random(seed)
    for _ in range(max_attempts):
        blocked = set()
        if obstacle_density > 0:
            corners = {(0, 0), (width - 1, height - 1), (width - 1, 0), (0, height - 1)}
            for y in range(height):
                for x in range(width):
                    if (x, y) not in corners and rng.random() < obstacle_density:
                        blocked.add((x, y))
        grid = GridMap(width, height, frozenset(blocked))
        try:
            T = makespan if makespan is not None else auto_makespan(grid)
        except NoAutoMakespan:
            continue
        inst = _sample_team(rng, grid, T, n_existing, n_new, contested, cfg)
        if inst is not None:
            inst.makespan = T
            return inst
    raise RuntimeError(f"could not generate a feasible instance after {max_attempts} attempts")


def _sample_team(rng, grid, T, n_existing, n_new, contested, cfg):
    free = list(grid.free_cells)
    new_specs = []
    reserved = set()
    if contested:
        for start, goal in _corner_tasks(grid.width, grid.height)[:min(n_new, _CORNER_RUNS)]:
            new_specs.append((Position(*start), Position(*goal)))
        reserved = {c for pair in _corner_tasks(grid.width, grid.height) for c in pair}
    for s, g in new_specs:
        if grid.distances_from(s).get(g, T + 1) > T:
            return None
    used_starts = {s for s, _ in new_specs}
    used_goals = {g for _, g in new_specs}
    if len(used_starts) < len(new_specs) or len(used_goals) < len(new_specs):
        return None

    def pick(count):
        out = []
        tries = 0
        while len(out) < count:
            tries += 1
            if tries > 50 * (count + 1):
                return None
            s, g = rng.choice(free), rng.choice(free)
            if s in used_starts or g in used_goals or s in reserved or g in reserved:
                continue
            d = grid.distances_from(s).get(g)
            if d is None or d > T:
                continue
            used_starts.add(s)
            used_goals.add(g)
            out.append((s, g))
        return out

    existing_specs = pick(n_existing)
    extra = pick(n_new - len(new_specs))
    if existing_specs is None or extra is None:
        return None
    new_specs += extra
    existing = [AgentTask(i + 1, s, g, 0) for i, (s, g) in enumerate(existing_specs)]
    new = [AgentTask(n_existing + i + 1, s, g, 0) for i, (s, g) in enumerate(new_specs)]
    paths = plan_existing(grid, existing, T, cfg)
    if paths is None:
        return None
    events = [JoinEvent(0, tuple(new))] if new else []
    return Instance(grid, existing, events, paths, T)
