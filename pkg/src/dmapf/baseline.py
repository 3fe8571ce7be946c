"""Replanning for all: discard every plan and solve the whole team jointly."""

from __future__ import annotations

from .plans import ConflictConfig, Solution
from .solver import SolveRequest, lower_bound_feasible, solve_decision


def replan_all(grid, tasks, T, cfg=ConflictConfig(), *, deadline=None) -> Solution | None:
    req = SolveRequest(grid, list(tasks), {}, T, cfg)
    if not lower_bound_feasible(req):
        return None
    plans = solve_decision(req, deadline)
    if plans is None:
        return None
    return Solution(T, dict(sorted(plans.items())))
