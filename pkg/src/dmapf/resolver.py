"""Conflict-resolution repair of a team plan when new agents join.

The team is split into a non-conflict set, whose plans are mutually
collision-free and kept as they are, and a conflict set, whose plans still
collide with something. Repair tries to replan ever larger subsets of the
conflict set with every other plan held fixed; when no subset works, the
conflict set is re-planned to minimise collisions with the non-conflict set
and absorbs the agents it still collides with.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import NamedTuple

from .plans import (
    AgentTask,
    ConflictConfig,
    Path,
    Solution,
    conflict_participants,
    cross_conflicts,
    find_conflicts,
)
from .solver import (
    IntrinsicallyInfeasible,
    SolveRequest,
    lower_bound_feasible,
    solve_decision,
    solve_min_conflict,
)
from .world import GridMap

log = logging.getLogger(__name__)


class Member(NamedTuple):
    task: AgentTask
    path: Path


@dataclass
class TeamState:
    grid: GridMap
    T: int
    non_conflict: dict = field(default_factory=dict)
    conflict: dict = field(default_factory=dict)
    cfg: ConflictConfig = field(default_factory=ConflictConfig)

    def members(self) -> dict:
        return {**self.non_conflict, **self.conflict}

    def paths(self) -> dict:
        return {aid: m.path for aid, m in sorted(self.members().items())}

    def tasks(self) -> list:
        return [m.task for _, m in sorted(self.members().items())]

    def solution(self) -> Solution:
        return Solution(self.T, self.paths())

    def copy(self) -> "TeamState":
        return TeamState(self.grid, self.T, dict(self.non_conflict), dict(self.conflict), self.cfg)


@dataclass
class ResolveReport:
    solved: bool = False
    solution: Solution | None = None
    conflict_set_cardinality: int = 0
    winning_subset_cardinality: int = 0
    winning_subset_number: int = 0
    decision_solver_calls: int = 0
    expansion_rounds: int = 0
    replanned_agents: set = field(default_factory=set)
    guard_triggered: bool = False
    winning_subset: tuple = ()
    final_conflict_set: tuple = ()
    # team as it stood when the winning subset search began, in the join's time frame
    searched_state: TeamState | None = field(default=None, repr=False, compare=False)

    @property
    def outcome(self) -> str:
        return "solved" if self.solved else "unsolvable"


def subset_number(set_size: int, cardinality: int, index_within_cardinality: int) -> int:
    """1-based position of a subset in :func:`enumerate_subsets` order."""
    return sum(comb(set_size, j) for j in range(2, cardinality)) + index_within_cardinality


def enumerate_subsets(ids):
    """Yield ``(subset, number)``: sizes 2, 3, ... and lexicographic within a size."""
    ids = sorted(ids)
    number = 0
    for k in range(2, len(ids) + 1):
        for subset in combinations(ids, k):
            number += 1
            yield subset, number


def admit_agents(state: TeamState, new_tasks, *, deadline=None, report=None) -> TeamState:
    """Plan the joining agents around everyone else.

    Agents land in the non-conflict set when a collision-free plan exists,
    otherwise in the conflict set with minimum-collision plans.
    """
    if state.conflict:
        raise ValueError("cannot admit agents while conflicts are unresolved")
    known = set(state.members())
    ids = [t.id for t in new_tasks]
    dup = known.intersection(ids) | {i for i in ids if ids.count(i) > 1}
    if dup:
        raise ValueError(f"duplicate agent ids {sorted(dup)}")
    state = state.copy()
    if not new_tasks:
        return state
    req = SolveRequest(state.grid, list(new_tasks), state.paths(), state.T, state.cfg)
    plans = None
    if lower_bound_feasible(req):
        if report is not None:
            report.decision_solver_calls += 1
        plans = solve_decision(req, deadline)
    if plans is not None:
        for task in new_tasks:
            state.non_conflict[task.id] = Member(task, plans[task.id])
        return state
    plans, penalty = solve_min_conflict(req, deadline)
    log.debug("new agents %s conflict with the team (penalty %d)", ids, penalty)
    for task in new_tasks:
        state.conflict[task.id] = Member(task, plans[task.id])
    return state


def _touching_conflicts(state: TeamState) -> list:
    side = set(state.conflict)
    return [
        c for c in find_conflicts(state.grid, state.solution(), state.cfg)
        if c.a in side or c.b in side
    ]


def resolve(state: TeamState, *, deadline=None, report=None, before=None):
    """Repair ``state`` until its conflict set is empty or repair is impossible.

    Returns ``(state, report)``. ``before`` maps agent ids to their paths
    prior to the join event and is only used to fill ``replanned_agents``;
    it defaults to the paths held on entry.
    """
    state = state.copy()
    report = report or ResolveReport()
    before = dict(before if before is not None else state.paths())
    n_agents = len(state.members())
    ever = set(state.conflict)
    keep_all = False
    report.conflict_set_cardinality = max(report.conflict_set_cardinality, len(state.conflict))
    # swaps only count towards expansion when they count towards the penalty
    penalty_cfg = ConflictConfig(state.cfg.count_swaps_in_penalty, state.cfg.count_swaps_in_penalty)

    while state.conflict:
        if not _touching_conflicts(state):
            state.non_conflict.update(state.conflict)
            state.conflict = {}
            break

        won = _try_subsets(state, report, deadline)
        if won:
            break
        if len(state.conflict) == n_agents:
            log.debug("full replanning failed; instance unsolvable at T=%d", state.T)
            break

        report.expansion_rounds += 1
        tasks = [m.task for _, m in sorted(state.conflict.items())]
        fixed = {aid: m.path for aid, m in sorted(state.non_conflict.items())}
        try:
            plans, penalty = solve_min_conflict(SolveRequest(state.grid, tasks, fixed, state.T, state.cfg), deadline)
        except IntrinsicallyInfeasible:
            break
        for task in tasks:
            state.conflict[task.id] = Member(task, plans[task.id])
        side = set(state.conflict)
        crossing = cross_conflicts(state.solution(), side, penalty_cfg)
        involved = conflict_participants(crossing)
        pulled = involved - side
        if not pulled:
            raise RuntimeError("positive-penalty expansion produced no cross conflict")
        if pulled <= ever:
            # a released agent came back; from here on keep everyone so each
            # round grows the conflict set and the loop ends within 2n rounds
            keep_all = True
            report.guard_triggered = True
        released = set() if keep_all else side - involved
        ever |= pulled
        for aid in sorted(pulled):
            state.conflict[aid] = state.non_conflict.pop(aid)
        for aid in sorted(released):
            state.non_conflict[aid] = state.conflict.pop(aid)
        log.debug(
            "expansion %d: penalty %d, pulled %s, released %s",
            report.expansion_rounds, penalty, sorted(pulled), sorted(released),
        )
        report.conflict_set_cardinality = max(report.conflict_set_cardinality, len(state.conflict))

    report.solved = not state.conflict
    if report.solved:
        report.solution = state.solution()
        for aid, path in report.solution.paths.items():
            if aid in before and before[aid] != path:
                report.replanned_agents.add(aid)
    return state, report


def _try_subsets(state: TeamState, report: ResolveReport, deadline) -> bool:
    edges = [(c.a, c.b) for c in _touching_conflicts(state)]
    members = state.members()
    searched = state.copy()
    for subset, number in enumerate_subsets(state.conflict):
        chosen = set(subset)
        # everything outside the subset keeps its plan, so each remaining
        # conflict needs an endpoint inside the subset
        if any(a not in chosen and b not in chosen for a, b in edges):
            continue
        tasks = [members[aid].task for aid in subset]
        fixed = {aid: m.path for aid, m in sorted(members.items()) if aid not in chosen}
        req = SolveRequest(state.grid, tasks, fixed, state.T, state.cfg)
        if not lower_bound_feasible(req):
            continue
        report.decision_solver_calls += 1
        plans = solve_decision(req, deadline)
        if plans is None:
            continue
        for aid in subset:
            state.conflict[aid] = Member(members[aid].task, plans[aid])
        state.non_conflict.update(state.conflict)
        state.conflict = {}
        report.winning_subset_cardinality = len(subset)
        report.winning_subset_number = number
        report.winning_subset = tuple(subset)
        report.final_conflict_set = tuple(sorted(searched.conflict))
        report.searched_state = searched
        report.replanned_agents.update(subset)
        log.debug("subset %d %s replanned successfully", number, subset)
        return True
    return False


def _shift(path: Path, tau: int) -> Path:
    return Path(path.agent, path.states[tau:], max(path.since - tau, 0))


def process_join(state: TeamState, new_tasks, time: int = 0, *, deadline=None):
    """Admit ``new_tasks`` at global time ``time`` and repair the team plan.

    For ``time > 0`` the already executed prefix of every plan is frozen:
    planning happens over the remaining horizon with each agent's current
    cell as its effective start, and the new suffixes are spliced back.
    """
    if state.conflict:
        raise ValueError("previous join event is unresolved")
    report = ResolveReport()
    before = state.paths()
    if time == 0:
        frame = state
    else:
        if not 0 < time <= state.T:
            raise ValueError(f"join time {time} outside 1..{state.T}")
        frame = TeamState(state.grid, state.T - time, cfg=state.cfg)
        for aid, m in state.non_conflict.items():
            shifted = _shift(m.path, time)
            task = AgentTask(aid, shifted.states[0], m.task.goal, shifted.since)
            frame.non_conflict[aid] = Member(task, shifted)
        new_tasks = [AgentTask(t.id, t.start, t.goal, max(t.join_time - time, 0)) for t in new_tasks]
    try:
        frame = admit_agents(frame, new_tasks, deadline=deadline, report=report)
    except IntrinsicallyInfeasible:
        log.debug("joining agents cannot reach their goals at all")
        return state.copy(), report
    frame_before = {aid: _shift(p, time) for aid, p in before.items()} if time else before
    frame, report = resolve(frame, deadline=deadline, report=report, before=frame_before)
    if time == 0:
        out = frame
    else:
        out = TeamState(state.grid, state.T, cfg=state.cfg)
        originals = state.members()
        joined = {t.id: t for t in new_tasks}
        for group_name in ("non_conflict", "conflict"):
            for aid, m in getattr(frame, group_name).items():
                if aid in originals:
                    task = originals[aid].task
                    prefix = originals[aid].path.states[:time]
                    since = originals[aid].path.since
                else:
                    task = AgentTask(aid, joined[aid].start, joined[aid].goal, time + joined[aid].join_time)
                    prefix = (task.start,) * time
                    since = task.join_time
                getattr(out, group_name)[aid] = Member(task, Path(aid, prefix + m.path.states, since))
        if report.solved:
            report.solution = out.solution()
    return out, report


def plan_existing(grid: GridMap, tasks, T: int, cfg=ConflictConfig(), *, deadline=None) -> dict | None:
    """Plan an initial team by admitting agents one at a time.

    Falls back to one joint solve when incremental admission gets stuck.
    Returns paths by id, or None when the team has no solution at ``T``.
    """
    paths = {}
    for task in sorted(tasks, key=lambda t: t.id):
        req = SolveRequest(grid, [task], dict(paths), T, cfg)
        plans = solve_decision(req, deadline) if lower_bound_feasible(req) else None
        if plans is None:
            req = SolveRequest(grid, [t for t in tasks if t.id in paths or t.id == task.id], {}, T, cfg)
            plans = solve_decision(req, deadline)
            if plans is None:
                return None
            paths = {}
        paths.update(plans)
    return dict(sorted(paths.items()))
