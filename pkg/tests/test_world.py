import pytest
from hypothesis import given, strategies as st

from dmapf.world import (
    GridMap,
    NoAutoMakespan,
    Position,
    PreconditionError,
    auto_makespan,
    neighbors,
    shortest_distance,
)


def test_neighbors_single_cell_only_waits():
    assert neighbors(GridMap(1, 1), (0, 0)) == {(0, 0)}


def test_neighbors_interior():
    assert neighbors(GridMap(3, 3), (1, 1)) == {(1, 1), (0, 1), (2, 1), (1, 0), (1, 2)}


def test_neighbors_skip_blocked():
    grid = GridMap(3, 3, frozenset({(1, 0)}))
    assert neighbors(grid, (1, 1)) == {(1, 1), (0, 1), (2, 1), (1, 2)}


@pytest.mark.parametrize("cell", [(3, 0), (-1, 0), (0, 5)])
def test_neighbors_out_of_bounds(cell):
    with pytest.raises(PreconditionError):
        neighbors(GridMap(3, 3), cell)


def test_neighbors_blocked_cell():
    with pytest.raises(PreconditionError):
        neighbors(GridMap(3, 3, frozenset({(1, 1)})), (1, 1))


def test_blocked_cells_must_be_in_bounds():
    with pytest.raises(ValueError):
        GridMap(2, 2, frozenset({(2, 0)}))


@pytest.mark.parametrize("side, expected", [(20, 38), (30, 58), (40, 78), (50, 98), (70, 138)])
def test_auto_makespan_square_grids(side, expected):
    assert auto_makespan(GridMap(side, side)) == expected


def test_auto_makespan_trivial():
    assert auto_makespan(GridMap(1, 1)) == 0


def test_auto_makespan_detours_around_walls():
    # a wall with a single gap at the far end
    grid = GridMap(3, 3, frozenset({(0, 1), (1, 1)}))
    assert auto_makespan(grid) == 4
    grid = GridMap(3, 3, frozenset({(1, 0), (1, 1)}))
    assert auto_makespan(grid) == 4


def test_auto_makespan_errors():
    with pytest.raises(NoAutoMakespan):
        auto_makespan(GridMap(3, 3, frozenset({(0, 0)})))
    with pytest.raises(NoAutoMakespan):
        auto_makespan(GridMap(3, 3, frozenset({(0, 1), (1, 1), (2, 1)})))


def test_shortest_distance():
    grid = GridMap(5, 5)
    assert shortest_distance(grid, (0, 0), (4, 4)) == 8
    assert shortest_distance(grid, (2, 3), (2, 3)) == 0
    walled = GridMap(5, 5, frozenset((2, y) for y in range(5)))
    assert shortest_distance(walled, (0, 0), (4, 4)) is None


@given(st.integers(1, 100), st.integers(1, 100))
def test_auto_makespan_empty_grid(w, h):
    assert auto_makespan(GridMap(w, h)) == w + h - 2


@st.composite
def grids(draw):
    w = draw(st.integers(1, 6))
    h = draw(st.integers(1, 6))
    cells = [(x, y) for x in range(w) for y in range(h)]
    blocked = draw(st.sets(st.sampled_from(cells), max_size=len(cells) - 1))
    return GridMap(w, h, frozenset(blocked))


@given(grids())
def test_neighbors_contains_self_and_is_symmetric(grid):
    for p in grid.free_cells:
        out = neighbors(grid, p)
        assert p in out
        for q in out - {p}:
            assert p in neighbors(grid, q)
            assert abs(p.x - q.x) + abs(p.y - q.y) == 1


def test_position_is_x_then_y():
    p = Position(3, 1)
    assert (p.x, p.y) == (3, 1)
