"""Grid environment: geometry, passability and adjacency."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple


class Position(NamedTuple):
    x: int
    y: int


class PreconditionError(ValueError):
    """A cell argument is out of bounds or blocked."""


class NoAutoMakespan(ValueError):
    """Opposite corners are blocked or disconnected; an explicit makespan is required."""


@dataclass(frozen=True)
class GridMap:
    width: int
    height: int
    blocked: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"grid dimensions must be positive, got {self.width}x{self.height}")
        blocked = frozenset(Position(*p) for p in self.blocked)
        for p in blocked:
            if not self.in_bounds(p):
                raise ValueError(f"blocked cell {tuple(p)} outside {self.width}x{self.height} grid")
        object.__setattr__(self, "blocked", blocked)

    def in_bounds(self, p) -> bool:
        return 0 <= p[0] < self.width and 0 <= p[1] < self.height

    def passable(self, p) -> bool:
        return self.in_bounds(p) and p not in self.blocked

    @cached_property
    def free_cells(self) -> tuple:
        """Unblocked cells in row-major (y, x) order."""
        return tuple(
            Position(x, y)
            for y in range(self.height)
            for x in range(self.width)
            if Position(x, y) not in self.blocked
        )

    @cached_property
    def _moves(self) -> dict:
        # cell -> sorted tuple of cells reachable in one step, wait included
        table = {}
        for p in self.free_cells:
            x, y = p
            out = [p]
            for q in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
                if self.passable(q):
                    out.append(Position(*q))
            table[p] = tuple(sorted(out, key=lambda c: (c[1], c[0])))
        return table

    @cached_property
    def _distance_cache(self) -> dict:
        return {}

    def successors(self, p) -> tuple:
        """Like :func:`neighbors` but as a (y, x)-sorted tuple and without checks."""
        return self._moves[p]

    def distances_from(self, source) -> dict:
        """BFS distances from ``source`` to every reachable cell (memoised)."""
        source = Position(*source)
        cache = self._distance_cache
        if source not in cache:
            dist = {source: 0}
            queue = deque([source])
            while queue:
                p = queue.popleft()
                d = dist[p] + 1
                for q in self._moves[p]:
                    if q not in dist:
                        dist[q] = d
                        queue.append(q)
            cache[source] = dist
        return cache[source]


def _require_free(grid: GridMap, p) -> Position:
    if not grid.in_bounds(p):
        raise PreconditionError(f"cell {tuple(p)} is outside the {grid.width}x{grid.height} grid")
    if p in grid.blocked:
        raise PreconditionError(f"cell {tuple(p)} is blocked")
    return Position(*p)


def neighbors(grid: GridMap, p) -> set:
    """Cells reachable from ``p`` in one step: the four orthogonal moves plus waiting."""
    p = _require_free(grid, p)
    return set(grid.successors(p))


def shortest_distance(grid: GridMap, a, b) -> int | None:
    """Number of unit moves between ``a`` and ``b``; None when unreachable."""
    a = _require_free(grid, a)
    b = _require_free(grid, b)
    return grid.distances_from(a).get(b)


def auto_makespan(grid: GridMap) -> int:
    """Corner-to-corner shortest distance, used as the default planning horizon.

    On an obstacle-free ``w x h`` grid this is ``w + h - 2``.
    """
    a = Position(0, 0)
    b = Position(grid.width - 1, grid.height - 1)
    if a in grid.blocked or b in grid.blocked:
        raise NoAutoMakespan("a corner cell is blocked; supply an explicit makespan")
    d = grid.distances_from(a).get(b)
    if d is None:
        raise NoAutoMakespan("opposite corners are disconnected; supply an explicit makespan")
    return d
