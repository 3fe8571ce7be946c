"""Exact bounded-makespan planning for a set of agents around fixed plans.

Both entry points build a time-expanded SAT model per request:

* one boolean per (agent, t, cell) restricted to cells that lie on some
  start-to-goal walk of the right length (a forward/backward sweep over the
  time-expanded grid),
* transition clauses in both directions, so every true variable lies on a
  start-to-goal walk made of true variables,
* conflicts between planned agents are added lazily: a model is decoded into
  paths, conflicting pairs are blocked with a clause, and the SAT call repeats.

Decoding follows the smallest (y, x) true successor, so a model can contain
extra true variables without harm: all conflict clauses are negative and all
penalty indicators are monotone, so the decoded paths satisfy whatever the
model satisfies.
"""

from __future__ import annotations

import threading
import time
from collections import Counter, defaultdict
from dataclasses import dataclass, field

from pysat.card import ITotalizer
from pysat.solvers import Solver

from .plans import AgentTask, ConflictConfig, Path
from .world import GridMap, PreconditionError

SAT_BACKEND = "g4"


class SolverError(Exception):
    pass


class IntrinsicallyInfeasible(SolverError):
    """No joint plan exists for the planned agents even when fixed agents are penalised instead of avoided."""


class TimeLimitExceeded(SolverError):
    pass


def _yx(c):
    return (c[1], c[0])


@dataclass
class SolveRequest:
    grid: GridMap
    tasks: list
    fixed: dict = field(default_factory=dict)
    T: int = 0
    cfg: ConflictConfig = field(default_factory=ConflictConfig)

    def check(self):
        ids = [t.id for t in self.tasks]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate task ids in {ids}")
        clash = set(ids) & set(self.fixed)
        if clash:
            raise ValueError(f"agents {sorted(clash)} are both planned and fixed")
        for task in self.tasks:
            for cell in (task.start, task.goal):
                if not self.grid.passable(cell):
                    raise PreconditionError(f"agent {task.id}: cell {tuple(cell)} is blocked or out of bounds")
            if not 0 <= task.join_time <= self.T:
                raise ValueError(f"agent {task.id}: join time {task.join_time} outside 0..{self.T}")
        for aid, path in self.fixed.items():
            if len(path.states) != self.T + 1:
                raise ValueError(f"fixed path of agent {aid} has {len(path.states)} states, expected {self.T + 1}")


def lower_bound_feasible(req: SolveRequest) -> bool:
    """Cheap necessary condition: every goal is reachable within the horizon."""
    req.check()
    for task in req.tasks:
        d = req.grid.distances_from(task.start).get(task.goal)
        if d is None or d > req.T - task.join_time:
            return False
    return True


class _Model:
    def __init__(self, req: SolveRequest, soft: bool, deadline: float | None):
        self.req = req
        self.grid = req.grid
        self.T = req.T
        self.cfg = req.cfg
        self.soft = soft
        self.deadline = deadline
        self.tasks = sorted(req.tasks, key=lambda t: t.id)

        T = self.T
        self.occ = [Counter() for _ in range(T + 1)]
        self.fixed_moves = [Counter() for _ in range(T)]
        for path in req.fixed.values():
            for t in range(path.since, T + 1):
                self.occ[t][path.states[t]] += 1
                if t < T and path.states[t] != path.states[t + 1]:
                    self.fixed_moves[t][(path.states[t], path.states[t + 1])] += 1

        self.hard_vertex = not soft
        if soft:
            self.hard_swap = self.cfg.hard_fixed_swaps
        else:
            self.hard_swap = self.cfg.forbid_swaps

        self.windows = {}
        self.var = {}
        self.feasible = True
        for task in self.tasks:
            win = self._sweep(task)
            if win is None:
                self.feasible = False
                return
            self.windows[task.id] = win
        self.nvars = 0
        for task in self.tasks:
            for t, layer in enumerate(self.windows[task.id]):
                for c in layer:
                    self.nvars += 1
                    self.var[(task.id, t, c)] = self.nvars
        self.solver = Solver(name=SAT_BACKEND)
        self.penalty_lits = []
        self._encode()

    # -- construction ---------------------------------------------------

    def _allowed_move(self, t, v, u) -> bool:
        if self.hard_vertex and self.occ[t + 1][u]:
            return False
        if self.hard_swap and v != u and self.fixed_moves[t][(u, v)]:
            return False
        return True

    def _sweep(self, task: AgentTask):
        grid, T, j = self.grid, self.T, task.join_time
        to_goal = grid.distances_from(task.goal)
        if self.hard_vertex and self.occ[j][task.start]:
            return None
        if to_goal.get(task.start, T + 1) > T - j:
            return None
        forward = [set() for _ in range(T + 1)]
        forward[j] = {task.start}
        for t in range(j, T):
            nxt = forward[t + 1]
            budget = T - t - 1
            for v in forward[t]:
                for u in grid.successors(v):
                    if to_goal.get(u, T + 1) <= budget and self._allowed_move(t, v, u):
                        nxt.add(u)
            if not nxt:
                return None
        if task.goal not in forward[T]:
            return None
        layers = [()] * (T + 1)
        back = {task.goal}
        layers[T] = (task.goal,)
        for t in range(T - 1, j - 1, -1):
            keep = {v for v in forward[t] if any(u in back and self._allowed_move(t, v, u) for u in grid.successors(v))}
            if not keep:
                return None
            layers[t] = tuple(sorted(keep, key=_yx))
            back = keep
        return layers

    def succ(self, aid, t, v):
        """Allowed successors of (aid, t, v) inside the window, (y, x)-sorted."""
        var = self.var
        return [u for u in self.grid.successors(v) if (aid, t + 1, u) in var and self._allowed_move(t, v, u)]

    def _encode(self):
        add = self.solver.add_clause
        var = self.var
        T = self.T
        for task in self.tasks:
            aid, j = task.id, task.join_time
            win = self.windows[aid]
            add([var[(aid, j, task.start)]])
            add([var[(aid, T, task.goal)]])
            preds = defaultdict(list)
            for t in range(j, T):
                for v in win[t]:
                    nxt = self.succ(aid, t, v)
                    x = var[(aid, t, v)]
                    add([-x] + [var[(aid, t + 1, u)] for u in nxt])
                    for u in nxt:
                        preds[(t + 1, u)].append(x)
            for (t, u), xs in preds.items():
                add([-var[(aid, t, u)]] + xs)
            if self.soft:
                for t in range(j, T + 1):
                    occ = self.occ[t]
                    for v in win[t]:
                        k = occ.get(v, 0)
                        if k:
                            self.penalty_lits.extend([var[(aid, t, v)]] * k)
                if self.cfg.count_swaps_in_penalty:
                    for t in range(j, T):
                        for (p, q), k in self.fixed_moves[t].items():
                            a = var.get((aid, t, q))
                            b = var.get((aid, t + 1, p))
                            if a and b:
                                self.nvars += 1
                                s = self.nvars
                                add([-a, -b, s])
                                self.penalty_lits.extend([s] * k)
        # prefer false everywhere: keeps the tube thin and penalties low
        self.solver.set_phases([-v for v in range(1, self.nvars + 1)])

    # -- solving --------------------------------------------------------

    def _sat(self, assumptions) -> bool:
        if self.deadline is None:
            return self.solver.solve(assumptions=assumptions)
        remaining = self.deadline - time.monotonic()
        if remaining <= 0:
            raise TimeLimitExceeded("time limit reached")
        timer = threading.Timer(remaining, self.solver.interrupt)
        timer.start()
        try:
            result = self.solver.solve_limited(assumptions=assumptions, expect_interrupt=True)
        finally:
            timer.cancel()
        if result is None:
            self.solver.clear_interrupt()
            raise TimeLimitExceeded("time limit reached")
        return result

    def _decode(self, model, forced) -> dict:
        plans = {}
        var, T = self.var, self.T
        for task in self.tasks:
            aid, j = task.id, task.join_time
            cells = [task.start] * (j + 1)
            pinned = forced.get(aid, ())
            for t in range(j, T):
                v = cells[-1]
                if t + 1 - j < len(pinned):
                    cells.append(pinned[t + 1 - j])
                    continue
                for u in self.succ(aid, t, v):
                    if model[var[(aid, t + 1, u)] - 1] > 0:
                        cells.append(u)
                        break
                else:  # pragma: no cover - excluded by the transition clauses
                    raise SolverError("model decoding failed")
            plans[aid] = cells
        return plans

    def _blocking_clauses(self, plans) -> list:
        var, T = self.var, self.T
        joins = {t.id: t.join_time for t in self.tasks}
        ids = sorted(plans)
        clauses = []
        for t in range(T + 1):
            seen = {}
            for aid in ids:
                if t < joins[aid]:
                    continue
                c = plans[aid][t]
                for other in seen.get(c, ()):
                    clauses.append([-var[(other, t, c)], -var[(aid, t, c)]])
                seen.setdefault(c, []).append(aid)
            if self.cfg.forbid_swaps and t < T:
                moves = {}
                for aid in ids:
                    if t < joins[aid]:
                        continue
                    p, q = plans[aid][t], plans[aid][t + 1]
                    if p != q:
                        for other in moves.get((q, p), ()):
                            clauses.append([
                                -var[(other, t, q)], -var[(other, t + 1, p)],
                                -var[(aid, t, p)], -var[(aid, t + 1, q)],
                            ])
                        moves.setdefault((p, q), []).append(aid)
        return clauses

    def solve(self, assumptions=(), forced=None):
        """Conflict-free plans under ``assumptions``, or None."""
        forced = forced or {}
        assumptions = list(assumptions)
        while True:
            if not self._sat(assumptions):
                return None
            plans = self._decode(self.solver.get_model(), forced)
            clauses = self._blocking_clauses(plans)
            if not clauses:
                return plans
            for c in clauses:
                self.solver.add_clause(c)

    def cost(self, plans) -> int:
        total = 0
        T = self.T
        count_swaps = self.cfg.count_swaps_in_penalty
        for task in self.tasks:
            cells = plans[task.id]
            for t in range(task.join_time, T + 1):
                total += self.occ[t].get(cells[t], 0)
                if count_swaps and t < T:
                    total += self.fixed_moves[t].get((cells[t + 1], cells[t]), 0)
        return total

    def close(self):
        self.solver.delete()


def _to_paths(model: _Model, plans: dict) -> dict:
    joins = {t.id: t.join_time for t in model.tasks}
    return {aid: Path(aid, tuple(cells), joins[aid]) for aid, cells in sorted(plans.items())}


def solve_decision(req: SolveRequest, deadline: float | None = None) -> dict | None:
    """Conflict-free paths for ``req.tasks`` around ``req.fixed``, or None if none exist.

    None is a proof of infeasibility at this makespan. Blocked starts or goals
    raise :class:`PreconditionError`.
    """
    req.check()
    if not req.tasks:
        return {}
    model = _Model(req, soft=False, deadline=deadline)
    if not model.feasible:
        return None
    try:
        plans = model.solve()
        return None if plans is None else _to_paths(model, plans)
    finally:
        model.close()


def solve_min_conflict(req: SolveRequest, deadline: float | None = None) -> tuple:
    """Paths for ``req.tasks`` minimising the cross penalty against ``req.fixed``.

    Planned agents never conflict with each other. Among all optimal plan sets
    the lexicographically smallest one is returned, comparing agents by id,
    then timesteps, then (y, x) cells.
    """
    req.check()
    if not req.tasks:
        return {}, 0
    model = _Model(req, soft=True, deadline=deadline)
    if not model.feasible:
        raise IntrinsicallyInfeasible("some agent cannot reach its goal within the makespan")
    try:
        best = model.solve()
        if best is None:
            raise IntrinsicallyInfeasible("no joint plan exists for the planned agents")
        best_cost = model.cost(best)
        if best_cost == 0:
            for lit in set(model.penalty_lits):
                model.solver.add_clause([-lit])
        else:
            tot = ITotalizer(lits=model.penalty_lits, ubound=best_cost, top_id=model.nvars)
            model.nvars = tot.top_id
            for c in tot.cnf.clauses:
                model.solver.add_clause(c)
            lo = 0
            while lo < best_cost:
                mid = (lo + best_cost - 1) // 2
                found = model.solve([-tot.rhs[mid]])
                if found is None:
                    lo = mid + 1
                else:
                    best, best_cost = found, model.cost(found)
            if best_cost < len(tot.rhs):
                model.solver.add_clause([-tot.rhs[best_cost]])
            tot.delete()
        best = _lex_smallest(model, best)
        return _to_paths(model, best), best_cost
    finally:
        model.close()


def _lex_smallest(model: _Model, incumbent: dict) -> dict:
    forced = {}
    var = model.var
    for task in model.tasks:
        aid, j = task.id, task.join_time
        chosen = [task.start]
        forced[aid] = chosen
        for t in range(j, model.T):
            current = incumbent[aid][t + 1]
            pick = current
            for c in model.succ(aid, t, chosen[-1]):
                if c == current:
                    break
                chosen.append(c)
                found = model.solve([var[(aid, t + 1, c)]], forced)
                chosen.pop()
                if found is not None:
                    incumbent, pick = found, c
                    break
            chosen.append(pick)
            model.solver.add_clause([var[(aid, t + 1, pick)]])
    return incumbent
