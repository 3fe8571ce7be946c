"""Dynamic multi-agent path finding by minimal conflict-set replanning."""

from .baseline import replan_all
from .plans import AgentTask, Conflict, ConflictConfig, Path, Solution, find_conflicts
from .resolver import ResolveReport, TeamState, admit_agents, enumerate_subsets, process_join, resolve, subset_number
from .solver import SolveRequest, solve_decision, solve_min_conflict
from .world import GridMap, Position, auto_makespan, neighbors, shortest_distance

__version__ = "0.1.0"

__all__ = [
    "AgentTask", "Conflict", "ConflictConfig", "GridMap", "Path", "Position", "ResolveReport",
    "Solution", "SolveRequest", "TeamState", "admit_agents", "auto_makespan", "enumerate_subsets",
    "find_conflicts", "neighbors", "process_join", "replan_all", "resolve", "shortest_distance",
    "solve_decision", "solve_min_conflict", "subset_number",
]
