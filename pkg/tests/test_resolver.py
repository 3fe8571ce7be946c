from math import comb

import pytest

from dmapf.baseline import replan_all
from dmapf.bench import initial_team, run_conflict_resolution
from dmapf.plans import AgentTask, Path, Solution, find_conflicts
from dmapf.resolver import (
    Member,
    TeamState,
    admit_agents,
    enumerate_subsets,
    process_join,
    resolve,
    subset_number,
)
from dmapf.scenario_io import generate_instance, parse_instance
from dmapf.verify import brute_force_solve, check_solution
from dmapf.world import GridMap

from _instances import seeded, tasks_of_fixed, tiny_request


def load(fixtures_dir, name):
    return parse_instance((fixtures_dir / name).read_text())


def team_of(inst):
    return initial_team(inst, inst.horizon())


def test_enumeration_order_prefix():
    ids = [1, 2, 4, 5, 6]
    seq = [s for s, _ in enumerate_subsets(ids)]
    assert seq[:5] == [(1, 2), (1, 4), (1, 5), (1, 6), (2, 4)]
    assert seq[10:12] == [(1, 2, 4), (1, 2, 5)]
    assert len(seq) == 2 ** 5 - 5 - 1


def test_enumeration_numbers():
    ids = list(range(6))
    numbered = dict(enumerate_subsets(ids))
    assert numbered[(0, 1, 2)] == 16 == comb(6, 2) + 1
    assert [n for s, n in enumerate_subsets([1, 2, 3, 4])][:3] == [1, 2, 3]
    assert list(enumerate_subsets([7, 3])) == [((3, 7), 1)]
    assert list(enumerate_subsets([4])) == []
    assert list(enumerate_subsets([])) == []


def test_enumeration_sorts_ids():
    assert [s for s, _ in enumerate_subsets([9, 2, 5])][:2] == [(2, 5), (2, 9)]


@pytest.mark.parametrize("args, expected", [
    ((6, 3, 1), 16),
    ((8, 4, 36), 120),
    ((4, 2, 3), 3),
    ((2, 2, 1), 1),
    ((9, 2, 7), 7),
])
def test_subset_number(args, expected):
    assert subset_number(*args) == expected


def test_subset_number_agrees_with_enumeration():
    for n in range(2, 8):
        counters = {}
        for subset, number in enumerate_subsets(range(n)):
            k = len(subset)
            counters[k] = counters.get(k, 0) + 1
            assert subset_number(n, k, counters[k]) == number


def test_admit_into_empty_team():
    state = TeamState(GridMap(3, 3), 4)
    out = admit_agents(state, [AgentTask(1, (0, 0), (2, 2))])
    assert set(out.non_conflict) == {1}
    assert out.conflict == {}


def test_admit_rejects_duplicate_ids(fixtures_dir):
    inst = load(fixtures_dir, "three_agent_join.txt")
    with pytest.raises(ValueError):
        admit_agents(team_of(inst), [AgentTask(1, (2, 2), (2, 2))])


def test_blocked_newcomer_enters_conflict_set(fixtures_dir):
    inst = load(fixtures_dir, "three_agent_join.txt")
    state = team_of(inst)
    (new,) = inst.events[0].agents
    assert brute_force_solve(inst.grid, [new], state.paths(), 3) is None
    assert brute_force_solve(inst.grid, [new], {}, 3) is not None
    out = admit_agents(state, [new])
    assert set(out.conflict) == {3}
    assert set(out.non_conflict) == {1, 2}


def test_single_newcomer_repair(fixtures_dir):
    inst = load(fixtures_dir, "three_agent_join.txt")
    state = team_of(inst)
    out, report = process_join(state, list(inst.events[0].agents))
    assert report.solved
    assert check_solution(inst.grid, inst.all_tasks(), report.solution) == []
    assert out.conflict == {}


def test_vacuous_conflict_set_is_promoted():
    grid = GridMap(3, 3)
    task = AgentTask(1, (0, 0), (2, 0))
    state = TeamState(grid, 2, conflict={1: Member(task, Path(1, ((0, 0), (1, 0), (2, 0))))})
    out, report = resolve(state)
    assert report.solved
    assert report.winning_subset_cardinality == 0
    assert report.decision_solver_calls == 0
    assert set(out.non_conflict) == {1}


def test_doorway_is_unsolvable_both_ways(fixtures_dir):
    inst = load(fixtures_dir, "doorway.txt")
    tasks = inst.all_tasks()
    assert brute_force_solve(inst.grid, tasks, {}, 4) is None
    assert brute_force_solve(inst.grid, tasks, {}, 5) is not None
    report = run_conflict_resolution(inst, 4)
    assert not report.solved
    assert replan_all(inst.grid, tasks, 4) is None
    assert run_conflict_resolution(inst, 5).solved


def _fixity(before, report):
    return all(report.solution.paths[aid] == p for aid, p in before.items() if aid not in report.replanned_agents)


@pytest.mark.parametrize("seed", range(8))
def test_generated_contested_instances_are_safe(seed):
    inst = generate_instance(9, 9, 7, 4, seed, contested=True, obstacle_density=0.2)
    T = inst.horizon()
    state = initial_team(inst, T)
    before = state.paths()
    report = run_conflict_resolution(inst, T)
    assert report.solved == (replan_all(inst.grid, inst.all_tasks(), T) is not None)
    if report.solved:
        assert check_solution(inst.grid, inst.all_tasks(), report.solution) == []
        assert _fixity(before, report)


def _oracle_repairs(state, subset):
    """A subset repairs the team iff the agents left alone are already
    mutually conflict-free and the oracle can re-route the subset around them."""
    members = state.members()
    rest = {aid: m.path for aid, m in members.items() if aid not in subset}
    kept = Solution(state.T, rest)
    if find_conflicts(state.grid, kept, state.cfg):
        return False
    tasks = [members[aid].task for aid in subset]
    return brute_force_solve(state.grid, tasks, rest, state.T, state.cfg) is not None


def test_winning_subset_is_first_repairable_one():
    checked = deep = 0
    cases = [((5, 5, 3, 2), seed) for seed in range(40)] + [((6, 6, 4, 3), seed) for seed in range(20)]
    for shape, seed in cases:
        inst = generate_instance(*shape, seed, contested=True, obstacle_density=0.15)
        report = run_conflict_resolution(inst, inst.horizon())
        if not report.solved or not report.winning_subset:
            continue
        checked += 1
        deep += report.winning_subset_number > 1
        searched = report.searched_state
        assert report.final_conflict_set == tuple(sorted(searched.conflict))
        for subset, number in enumerate_subsets(searched.conflict):
            if number < report.winning_subset_number:
                assert not _oracle_repairs(searched, subset), (seed, subset)
            else:
                assert subset == report.winning_subset
                assert _oracle_repairs(searched, subset)
                break
    assert checked >= 10 and deep >= 1


def test_join_later_keeps_executed_prefix(fixtures_dir):
    inst = load(fixtures_dir, "hand_late_joins.txt")
    T = inst.horizon()
    state = initial_team(inst, T)
    prefixes = {aid: p.states[:2] for aid, p in state.paths().items()}
    report = run_conflict_resolution(inst, T)
    assert report.solved
    assert check_solution(inst.grid, inst.all_tasks(), report.solution) == []
    for aid, prefix in prefixes.items():
        assert report.solution.paths[aid].states[:2] == prefix
    assert report.solution.paths[3].since == 2
    assert report.solution.paths[4].since == 5


def test_late_join_with_conflicts():
    # agent 2 sweeps the corridor right after the join; the newcomer must dodge or force a repair
    grid = GridMap(5, 2)
    t1 = AgentTask(1, (0, 0), (4, 0))
    state = TeamState(grid, 6)
    state.non_conflict[1] = Member(t1, Path(1, ((0, 0), (1, 0), (2, 0), (3, 0), (4, 0), (4, 0), (4, 0))))
    newcomer = AgentTask(2, (4, 0), (0, 0), join_time=2)
    out, report = process_join(state, [newcomer], 2)
    sol_tasks = [t1, newcomer]
    if report.solved:
        assert check_solution(grid, sol_tasks, report.solution) == []
        assert report.solution.paths[1].states[:2] == ((0, 0), (1, 0))


@pytest.mark.parametrize("seed", range(30))
def test_solvability_agrees_with_full_replanning(seed):
    req = tiny_request(seeded(5000 + seed))
    existing = tasks_of_fixed(req.fixed)
    state = TeamState(req.grid, req.T)
    for task in existing:
        state.non_conflict[task.id] = Member(task, req.fixed[task.id])
    _, report = process_join(state, req.tasks)
    full = replan_all(req.grid, existing + req.tasks, req.T)
    assert report.solved == (full is not None)
    if report.solved:
        assert check_solution(req.grid, existing + req.tasks, report.solution) == []


def test_unresolved_state_rejects_new_join():
    grid = GridMap(3, 3)
    t = AgentTask(1, (0, 0), (0, 0))
    state = TeamState(grid, 1, conflict={1: Member(t, Path(1, ((0, 0), (0, 0))))})
    with pytest.raises(ValueError):
        process_join(state, [AgentTask(2, (2, 2), (2, 2))])


def test_resolver_report_counts_are_deterministic():
    inst = generate_instance(9, 9, 7, 4, 3, contested=True, obstacle_density=0.2)
    a = run_conflict_resolution(inst, inst.horizon())
    b = run_conflict_resolution(inst, inst.horizon())
    assert (a.conflict_set_cardinality, a.winning_subset_number, a.replanned_agents) == (
        b.conflict_set_cardinality, b.winning_subset_number, b.replanned_agents)
    assert a.solution == b.solution


def test_three_newcomers_repaired_by_existing_triple(fixtures_dir):
    inst = load(fixtures_dir, "seven_agent_join.txt")
    state = team_of(inst)
    new = list(inst.events[0].agents)
    assert find_conflicts(inst.grid, state.solution(), state.cfg) == []
    # the three newcomers cannot all be routed around the planned team
    assert brute_force_solve(inst.grid, new, state.paths(), inst.horizon()) is None
    assert set(admit_agents(state.copy(), new).conflict) == {5, 6, 7}

    report = run_conflict_resolution(inst, inst.horizon())
    assert report.solved
    assert report.conflict_set_cardinality == 5
    assert report.winning_subset_cardinality == 3
    assert len(report.replanned_agents) == 3
    assert report.expansion_rounds == 1
    searched = report.searched_state
    released = {5, 6, 7} - set(searched.conflict)
    assert len(released) == 1 and set(searched.non_conflict) >= released
    pairs = [s for s, n in enumerate_subsets(searched.conflict) if len(s) == 2]
    assert len(pairs) == 10
    assert not any(_oracle_repairs(searched, s) for s in pairs)
    assert 11 <= report.winning_subset_number <= 20
    assert _oracle_repairs(searched, report.winning_subset)
    assert check_solution(inst.grid, inst.all_tasks(), report.solution) == []


def test_returning_agent_stops_releases():
    # seed found by search: an agent released in round 1 is pulled back in round 2
    inst = generate_instance(9, 9, 10, 4, 26, contested=True, obstacle_density=0.2)
    T = inst.horizon()
    before = initial_team(inst, T).paths()
    report = run_conflict_resolution(inst, T)
    assert report.guard_triggered
    assert report.expansion_rounds <= 2 * len(inst.all_tasks())
    assert report.solved
    assert check_solution(inst.grid, inst.all_tasks(), report.solution) == []
    assert _fixity(before, report)
