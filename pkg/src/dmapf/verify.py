"""Brute-force oracles and solution certification.

The oracles search the joint product state space layer by layer and share no
search code with :mod:`dmapf.solver`; they only exist for tiny instances.
"""

from __future__ import annotations

import itertools
from collections import deque

from .plans import ConflictConfig, Path, Solution, find_conflicts, validate_path

DEFAULT_BUDGET = 10**7


class OracleBudgetExceeded(RuntimeError):
    pass


def _moves(grid, p):
    x, y = p
    out = [p]
    for q in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
        if 0 <= q[0] < grid.width and 0 <= q[1] < grid.height and q not in grid.blocked:
            out.append(q)
    return out


def _dist_to(grid, goal):
    dist = {goal: 0}
    queue = deque([goal])
    while queue:
        p = queue.popleft()
        for q in _moves(grid, p):
            if q not in dist:
                dist[q] = dist[p] + 1
                queue.append(q)
    return dist


class _Joint:
    """Shared setup for both oracles: per-agent moves and fixed-agent tables."""

    def __init__(self, grid, tasks, fixed, T, cfg, budget):
        n_free = grid.width * grid.height - len(grid.blocked)
        if tasks and n_free ** len(tasks) * max(T, 1) > budget:
            raise OracleBudgetExceeded(
                f"{n_free}^{len(tasks)} * {T} joint states exceed the budget of {budget}"
            )
        self.grid, self.T, self.cfg = grid, T, cfg
        self.tasks = sorted(tasks, key=lambda t: t.id)
        self.starts = tuple(tuple(t.start) for t in self.tasks)
        self.goals = tuple(tuple(t.goal) for t in self.tasks)
        self.joins = tuple(t.join_time for t in self.tasks)
        self.to_goal = [_dist_to(grid, g) for g in self.goals]
        # occupancy[t][cell] = number of fixed agents there; moves[t][(p, q)] likewise
        self.occupancy = [dict() for _ in range(T + 1)]
        self.fixed_moves = [dict() for _ in range(T)]
        for path in fixed.values():
            for t in range(path.since, T + 1):
                c = tuple(path.states[t])
                self.occupancy[t][c] = self.occupancy[t].get(c, 0) + 1
                if t < T:
                    m = (c, tuple(path.states[t + 1]))
                    if m[0] != m[1]:
                        self.fixed_moves[t][m] = self.fixed_moves[t].get(m, 0) + 1

    def options(self, i, t, p):
        """Cells agent ``i`` may occupy at t+1 coming from ``p`` at t."""
        if t + 1 <= self.joins[i]:
            return [p]
        left = self.T - t - 1
        return [q for q in _moves(self.grid, p) if self.to_goal[i].get(q, left + 1) <= left]

    def pair_ok(self, t, cur, nxt):
        """Hard constraints among planned agents for the step t -> t+1."""
        present = [i for i in range(len(nxt)) if t + 1 >= self.joins[i]]
        cells = [nxt[i] for i in present]
        if len(set(cells)) != len(cells):
            return False
        if self.cfg.forbid_swaps:
            for i, k in itertools.combinations(present, 2):
                if t >= self.joins[i] and t >= self.joins[k]:
                    if cur[i] == nxt[k] and cur[k] == nxt[i] and cur[i] != cur[k]:
                        return False
        return True

    def step_penalty(self, t, cur, nxt):
        """Cross penalty incurred by arriving in ``nxt`` at t+1 (vertex) and by the move itself (swap)."""
        pen = 0
        occ = self.occupancy[t + 1]
        moves = self.fixed_moves[t]
        for i in range(len(nxt)):
            if t + 1 >= self.joins[i]:
                pen += occ.get(nxt[i], 0)
            if t >= self.joins[i] and self.cfg.count_swaps_in_penalty:
                pen += moves.get((nxt[i], cur[i]), 0)
        return pen

    def swap_hard_vs_fixed(self, t, cur, nxt):
        for i in range(len(nxt)):
            if t >= self.joins[i] and moves_get(self.fixed_moves[t], nxt[i], cur[i]):
                return True
        return False

    def initial_ok(self):
        return len(set(s for s, j in zip(self.starts, self.joins) if j == 0)) == sum(
            1 for j in self.joins if j == 0
        )


def moves_get(table, p, q):
    return p != q and table.get((p, q), 0) > 0


def _plans_from(parents, final, tasks, T):
    states = [final]
    for t in range(T, 0, -1):
        states.append(parents[t][states[-1]])
    states.reverse()
    return {
        task.id: Path(task.id, tuple(s[i] for s in states), task.join_time)
        for i, task in enumerate(tasks)
    }


def brute_force_solve(grid, tasks, fixed, T, cfg=ConflictConfig(), budget=DEFAULT_BUDGET):
    """Exact feasibility by exhaustive joint search; returns plans or None."""
    joint = _Joint(grid, tasks, fixed, T, cfg, budget)
    if not joint.tasks:
        return {}
    start = joint.starts
    if not joint.initial_ok():
        return None
    for i, j in enumerate(joint.joins):
        if joint.occupancy[j].get(start[i], 0):
            return None
        if joint.to_goal[i].get(start[i], T + 1) > T - j:
            return None
    layer = {start: None}
    parents = [layer]
    for t in range(T):
        nxt_layer = {}
        for cur in layer:
            choices = []
            for i in range(len(cur)):
                opts = joint.options(i, t, cur[i])
                if t + 1 >= joint.joins[i]:
                    opts = [q for q in opts if not joint.occupancy[t + 1].get(q, 0)]
                    if cfg.forbid_swaps and t >= joint.joins[i]:
                        opts = [q for q in opts if not moves_get(joint.fixed_moves[t], q, cur[i])]
                choices.append(opts)
            for nxt in itertools.product(*choices):
                if nxt not in nxt_layer and joint.pair_ok(t, cur, nxt):
                    nxt_layer[nxt] = cur
        layer = nxt_layer
        parents.append(layer)
        if not layer:
            return None
    if joint.goals not in layer:
        return None
    return _plans_from(parents, joint.goals, joint.tasks, T)


def brute_force_min_penalty(grid, tasks, fixed, T, cfg=ConflictConfig(), budget=DEFAULT_BUDGET):
    """Exact minimum cross penalty over all intra-conflict-free joint plans.

    Returns None when the planned agents have no joint plan at all.
    """
    joint = _Joint(grid, tasks, fixed, T, cfg, budget)
    if not joint.tasks:
        return 0
    start = joint.starts
    if not joint.initial_ok():
        return None
    for i in range(len(start)):
        if joint.to_goal[i].get(start[i], T + 1) > T - joint.joins[i]:
            return None
    hard_swap = cfg.forbid_swaps and not cfg.count_swaps_in_penalty
    base = sum(joint.occupancy[j].get(start[i], 0) for i, j in enumerate(joint.joins) if j == 0)
    # agents joining later pay for their start cell on arrival, see step_penalty
    layer = {start: base}
    for t in range(T):
        nxt_layer = {}
        for cur, cost in layer.items():
            choices = [joint.options(i, t, cur[i]) for i in range(len(cur))]
            for nxt in itertools.product(*choices):
                if not joint.pair_ok(t, cur, nxt):
                    continue
                if hard_swap and joint.swap_hard_vs_fixed(t, cur, nxt):
                    continue
                c = cost + joint.step_penalty(t, cur, nxt)
                if c < nxt_layer.get(nxt, c + 1):
                    nxt_layer[nxt] = c
        layer = nxt_layer
        if not layer:
            return None
    return layer.get(joint.goals)


def check_solution(grid, tasks, sol: Solution, cfg=ConflictConfig()) -> list:
    """All path violations plus one entry per conflict; empty certifies ``sol``."""
    problems = []
    by_id = {t.id: t for t in tasks}
    for aid in sorted(by_id):
        if aid not in sol.paths:
            problems.append(f"agent {aid}: no path")
            continue
        for msg in validate_path(grid, by_id[aid], sol.paths[aid], sol.makespan):
            problems.append(f"agent {aid}: {msg}")
    for aid in sorted(set(sol.paths) - set(by_id)):
        problems.append(f"agent {aid}: path for unknown agent")
    try:
        problems.extend(str(c) for c in find_conflicts(grid, sol, cfg))
    except ValueError as exc:
        problems.append(str(exc))
    return problems
