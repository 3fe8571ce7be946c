"""Agent tasks, paths, solutions and conflict detection.

A path is a total function on ``0..T``: agents stay on their goal cell after
arriving and keep occupying it. An agent that joins at time ``since > 0`` is
absent before then; its earlier states repeat the start cell only so that
every path has ``T + 1`` entries, and they never take part in conflicts.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

from .world import GridMap, Position

VERTEX = "vertex"
SWAP = "swap"


@dataclass(frozen=True)
class AgentTask:
    id: int
    start: Position
    goal: Position
    join_time: int = 0

    def __post_init__(self):
        object.__setattr__(self, "start", Position(*self.start))
        object.__setattr__(self, "goal", Position(*self.goal))


@dataclass(frozen=True)
class Path:
    agent: int
    states: tuple
    since: int = 0

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(Position(*s) for s in self.states))

    @property
    def makespan(self) -> int:
        return len(self.states) - 1

    def at(self, t: int) -> Position:
        return self.states[t]

    def present(self, t: int) -> bool:
        return t >= self.since


@dataclass
class Solution:
    makespan: int
    paths: dict = field(default_factory=dict)

    def __post_init__(self):
        for aid, path in self.paths.items():
            if path.agent != aid:
                raise ValueError(f"path stored under id {aid} belongs to agent {path.agent}")
            if path.makespan != self.makespan:
                raise ValueError(
                    f"path of agent {aid} has {len(path.states)} states, expected {self.makespan + 1}"
                )


@dataclass(frozen=True)
class Conflict:
    a: int
    b: int
    t: int
    kind: str
    cells: tuple  # (p,) for a vertex conflict, (p, q) for a swap where a moves p -> q

    def sort_key(self):
        return (self.t, self.a, self.b, 0 if self.kind == VERTEX else 1, self.cells)

    def __str__(self):
        if self.kind == VERTEX:
            (p,) = self.cells
            return f"vertex conflict between {self.a} and {self.b} at t={self.t} on {tuple(p)}"
        p, q = self.cells
        return (
            f"swap conflict between {self.a} and {self.b} at t={self.t}: "
            f"{tuple(p)}<->{tuple(q)}"
        )


@dataclass(frozen=True)
class ConflictConfig:
    # swaps are hard-forbidden among planned agents (and against fixed agents
    # when they are not penalised instead)
    forbid_swaps: bool = True
    # swaps against fixed agents add to the cross-set penalty
    count_swaps_in_penalty: bool = True

    @property
    def hard_fixed_swaps(self) -> bool:
        return self.forbid_swaps and not self.count_swaps_in_penalty


def validate_path(grid: GridMap, task: AgentTask, path: Path, T: int) -> list:
    """Return human-readable invariant violations (empty when the path is valid)."""
    problems = []
    if path.agent != task.id:
        problems.append(f"path belongs to agent {path.agent}, task is for agent {task.id}")
    if len(path.states) != T + 1:
        problems.append(f"path has {len(path.states)} states, expected {T + 1}")
        if not path.states:
            return problems
    since = task.join_time
    if path.since != since:
        problems.append(f"path starts at t={path.since}, agent joins at t={since}")
    for t, p in enumerate(path.states):
        if not grid.in_bounds(p):
            problems.append(f"out of bounds cell {tuple(p)} at t={t}")
        elif p in grid.blocked:
            problems.append(f"blocked cell {tuple(p)} at t={t}")
    for t in range(min(since, len(path.states))):
        if path.states[t] != task.start:
            problems.append(f"pre-join state at t={t} differs from start {tuple(task.start)}")
    if since < len(path.states) and path.states[since] != task.start:
        problems.append(f"start not at {tuple(task.start)} at t={since}")
    for t in range(len(path.states) - 1):
        p, q = path.states[t], path.states[t + 1]
        if abs(p[0] - q[0]) + abs(p[1] - q[1]) > 1:
            problems.append(f"non-adjacent move at t={t}: {tuple(p)}->{tuple(q)}")
    last = len(path.states) - 1
    if path.states[last] != task.goal:
        problems.append(f"goal not reached at T={last}: at {tuple(path.states[last])}")
    return problems


def _check_lengths(paths) -> int | None:
    lengths = {len(p.states) for p in paths}
    if len(lengths) > 1:
        raise ValueError(f"paths have mismatched lengths {sorted(lengths)}")
    return lengths.pop() - 1 if lengths else None


def find_conflicts(grid: GridMap | None, sol: Solution, cfg: ConflictConfig = ConflictConfig()) -> list:
    """Every vertex conflict (and swap conflict when forbidden), sorted by (t, a, b)."""
    paths = [sol.paths[a] for a in sorted(sol.paths)]
    T = _check_lengths(paths)
    if T is None:
        return []
    out = []
    for t in range(T + 1):
        occupants = defaultdict(list)
        for path in paths:
            if path.present(t):
                occupants[path.states[t]].append(path.agent)
        for p, ids in occupants.items():
            for i in range(len(ids)):
                for j in range(i + 1, len(ids)):
                    out.append(Conflict(ids[i], ids[j], t, VERTEX, (p,)))
        if cfg.forbid_swaps and t < T:
            moves = {}
            for path in paths:
                if path.present(t):
                    p, q = path.states[t], path.states[t + 1]
                    if p != q:
                        moves.setdefault((p, q), []).append(path.agent)
            for (p, q), ids in moves.items():
                if (q, p) in moves and p < q:
                    for a in ids:
                        for b in moves[(q, p)]:
                            lo, hi = (a, b) if a < b else (b, a)
                            cells = (p, q) if lo == a else (q, p)
                            out.append(Conflict(lo, hi, t, SWAP, cells))
    out.sort(key=Conflict.sort_key)
    return out


def count_cross_conflicts(candidate: dict, fixed: dict, cfg: ConflictConfig = ConflictConfig()) -> int:
    """Penalty of ``candidate`` plans against ``fixed`` plans.

    One unit per (candidate agent, fixed agent, t) sharing a cell, plus one per
    candidate/fixed swap when ``cfg.count_swaps_in_penalty``.
    """
    overlap = set(candidate) & set(fixed)
    if overlap:
        raise ValueError(f"agents {sorted(overlap)} are both candidate and fixed")
    T = _check_lengths(list(candidate.values()) + list(fixed.values()))
    if T is None or not candidate or not fixed:
        return 0
    penalty = 0
    for t in range(T + 1):
        occupied = defaultdict(int)
        for path in fixed.values():
            if path.present(t):
                occupied[path.states[t]] += 1
        for path in candidate.values():
            if path.present(t):
                penalty += occupied.get(path.states[t], 0)
        if cfg.count_swaps_in_penalty and t < T:
            fixed_moves = defaultdict(int)
            for path in fixed.values():
                if path.present(t) and path.states[t] != path.states[t + 1]:
                    fixed_moves[(path.states[t], path.states[t + 1])] += 1
            for path in candidate.values():
                if path.present(t):
                    penalty += fixed_moves.get((path.states[t + 1], path.states[t]), 0)
    return penalty


def cross_conflicts(sol: Solution, side: set, cfg: ConflictConfig = ConflictConfig()) -> list:
    """Conflicts of ``sol`` with exactly one participant in ``side``."""
    return [c for c in find_conflicts(None, sol, cfg) if (c.a in side) != (c.b in side)]


def conflict_participants(conflicts) -> set:
    ids = set()
    for c in conflicts:
        ids.add(c.a)
        ids.add(c.b)
    return ids
