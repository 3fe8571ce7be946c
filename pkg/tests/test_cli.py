import subprocess
import sys

import pytest

from dmapf.cli import main
from dmapf.scenario_io import parse_instance, parse_report, parse_solution
from dmapf.verify import check_solution


def solve(fixtures_dir, tmp_path, name, *extra):
    sol, rep = tmp_path / "out.sol", tmp_path / "out.rep"
    code = main(["solve", "--instance", str(fixtures_dir / name), "--out-solution", str(sol),
                 "--out-report", str(rep), *extra])
    return code, sol, rep


@pytest.mark.parametrize("mode", ["conflict-resolution", "replan-all"])
def test_solve_writes_verified_solution(fixtures_dir, tmp_path, mode):
    code, sol, rep = solve(fixtures_dir, tmp_path, "three_agent_join.txt", "--mode", mode)
    assert code == 0
    inst = parse_instance((fixtures_dir / "three_agent_join.txt").read_text())
    assert check_solution(inst.grid, inst.all_tasks(), parse_solution(sol.read_text())) == []
    report = parse_report(rep.read_text())
    assert report["outcome"] == "solved"
    assert report["mode"] == mode
    assert report["makespan"] == "3"


def test_solve_report_fields(fixtures_dir, tmp_path):
    code, _, rep = solve(fixtures_dir, tmp_path, "seven_agent_join.txt")
    report = parse_report(rep.read_text())
    assert code == 0
    assert report["conflict_set_cardinality"] == "5"
    assert report["winning_subset_cardinality"] == "3"
    assert report["winning_subset_number"] == "11"
    assert len(report["replanned_agents"].split(",")) == 3


def test_unsolvable_exits_one(fixtures_dir, tmp_path):
    code, sol, rep = solve(fixtures_dir, tmp_path, "doorway.txt")
    assert code == 1
    assert sol.read_text() == ""
    assert parse_report(rep.read_text())["outcome"] == "unsolvable"


def test_makespan_override(fixtures_dir, tmp_path):
    code, sol, _ = solve(fixtures_dir, tmp_path, "doorway.txt", "--makespan", "5")
    assert code == 0
    assert parse_solution(sol.read_text()).makespan == 5


@pytest.mark.parametrize("args", [
    ["--makespan", "soon"],
    ["--mode", "guess"],
])
def test_bad_arguments_exit_two(fixtures_dir, tmp_path, args):
    with pytest.raises(SystemExit) as exc:
        solve(fixtures_dir, tmp_path, "three_agent_join.txt", *args)
    assert exc.value.code == 2


def test_parse_error_and_missing_file_exit_two(tmp_path, fixtures_dir):
    bad = tmp_path / "bad.txt"
    bad.write_text("...\nagent 1 0 0 9 9\n")
    assert main(["solve", "--instance", str(bad), "--out-solution", str(tmp_path / "s"),
                 "--out-report", str(tmp_path / "r")]) == 2
    assert main(["verify", "--instance", str(tmp_path / "missing.txt"), "--solution", str(bad)]) == 2
    # corners blocked and no makespan given
    code, _, _ = solve(fixtures_dir, tmp_path, "hand_grid_only.txt")
    assert code == 2


def test_time_limit_exits_three(tmp_path):
    inst = tmp_path / "big.txt"
    assert main(["gen", "--width", "20", "--height", "20", "--existing", "12", "--new", "2",
                 "--seed", "5", "--out", str(inst)]) == 0
    code = main(["solve", "--instance", str(inst), "--mode", "replan-all", "--time-limit", "0.000001",
                 "--out-solution", str(tmp_path / "s"), "--out-report", str(tmp_path / "r")])
    assert code == 3
    assert parse_report((tmp_path / "r").read_text())["outcome"] == "timeout"


def test_verify_accepts_and_rejects(fixtures_dir, tmp_path, capsys):
    code, sol, _ = solve(fixtures_dir, tmp_path, "three_agent_join.txt")
    assert code == 0
    instance = str(fixtures_dir / "three_agent_join.txt")
    assert main(["verify", "--instance", instance, "--solution", str(sol)]) == 0
    assert "valid" in capsys.readouterr().out
    lines = sol.read_text().splitlines()
    aid, t, x, y = lines[1].split()
    lines[1] = f"{aid} {t} 2 2"
    broken = tmp_path / "broken.sol"
    broken.write_text("\n".join(lines) + "\n")
    assert main(["verify", "--instance", instance, "--solution", str(broken)]) == 1
    assert "agent" in capsys.readouterr().out


def test_swap_flags_change_semantics(tmp_path):
    # two agents trading places along a 2-cell corridor only works when swaps are allowed
    inst = tmp_path / "swap.txt"
    inst.write_text("..\nmakespan 1\nagent 1 0 0 1 0\njoin 0\nagent 2 1 0 0 0\n")
    sol, rep = tmp_path / "s", tmp_path / "r"
    base = ["solve", "--instance", str(inst), "--out-solution", str(sol), "--out-report", str(rep)]
    assert main(base) == 1
    assert main(base + ["--no-swap-conflicts"]) == 0
    assert main(["verify", "--instance", str(inst), "--solution", str(sol)]) == 1
    assert main(["verify", "--instance", str(inst), "--solution", str(sol), "--no-swap-conflicts"]) == 0


def test_gen_is_deterministic(tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    for out in (a, b):
        assert main(["gen", "--width", "8", "--height", "8", "--existing", "6", "--new", "2",
                     "--seed", "9", "--out", str(out)]) == 0
    assert a.read_text() == b.read_text()
    assert parse_instance(a.read_text()).n_new == 2


def test_bench_writes_csv_and_solutions(tmp_path, fixtures_dir):
    suite = tmp_path / "suite.txt"
    suite.write_text(f"{fixtures_dir / 'three_agent_join.txt'}\n{fixtures_dir / 'doorway.txt'} 4\n")
    csv_out = tmp_path / "out.csv"
    code = main(["bench", "--suite", str(suite), "--out-csv", str(csv_out),
                 "--out-solutions", str(tmp_path / "sols")])
    assert code == 0
    lines = csv_out.read_text().splitlines()
    assert len(lines) == 3
    assert sorted(p.name for p in (tmp_path / "sols").iterdir()) == ["three_agent_join.T3.all.sol", "three_agent_join.T3.subset.sol"]


def test_module_entry_point(fixtures_dir, tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "dmapf", "solve", "--instance", str(fixtures_dir / "three_agent_join.txt"),
         "--out-solution", str(tmp_path / "s"), "--out-report", str(tmp_path / "r")],
        capture_output=True, text=True,
    )
    assert out.returncode == 0, out.stderr
