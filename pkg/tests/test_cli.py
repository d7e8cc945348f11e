import dataclasses
import json
import sys

import pytest
from loguru import logger

from stockshift.optimizer.branch_bound import SolverFault
from stockshift.packing import PackingFault
from stockshift.serialization import load_instance, load_solution, save_instance
from stockshift.tools.cli import main


@pytest.fixture(autouse=True)
def _restore_logging():
    yield
    logger.remove()
    logger.add(sys.stderr)


@pytest.fixture
def run_cli(repo_config):
    def run(*args: str) -> int:
        return main(["--config", str(repo_config), *args])

    return run


def test_help(run_cli, capsys):
    assert run_cli("--help") == 0
    out = capsys.readouterr().out
    for command in ("generate", "solve", "compare-policies", "benchmark", "export", "pack"):
        assert command in out


def test_generate_to_file(run_cli, tmp_path):
    path = tmp_path / "tiny.json"
    assert run_cli("generate", "--preset", "tiny", "--seed", "3", "--out", str(path)) == 0
    instance = load_instance(path)
    assert instance.n_skus == 2
    assert instance.initial_stock.sum() == 4


def test_generate_to_stdout(run_cli, capsys):
    assert run_cli("generate", "--preset", "tiny", "--policy", "CR") == 0
    document = json.loads(capsys.readouterr().out)
    assert document["movements"] == [[0, 1], [0, 2], [1, 0], [2, 0]]


def test_solve_writes_solution_report_and_manifest(run_cli, capsys, tmp_path, three_facility_file):
    solution_path = tmp_path / "solution.json"
    report_path = tmp_path / "report.json"
    manifest_path = tmp_path / "manifest.json"
    code = run_cli(
        "solve",
        str(three_facility_file),
        "--time-limit",
        "30",
        "--out",
        str(solution_path),
        "--report",
        str(report_path),
        "--manifest",
        str(manifest_path),
    )
    assert code == 0
    assert "packages (P)" in capsys.readouterr().out

    report = json.loads(report_path.read_text())
    assert report["status"] == "optimal"
    assert report["packages"]["P"] == 3
    solution, _ = load_solution(solution_path)
    assert solution.package_count == 3
    assert solution.objective.transport == pytest.approx(30.0)
    assert len(json.loads(manifest_path.read_text())) == 3


def test_solve_with_rounding(run_cli, tmp_path, three_facility_file):
    report_path = tmp_path / "report.json"
    code = run_cli(
        "solve", str(three_facility_file), "--scheme", "rtrp", "--delta", "0.9", "--report", str(report_path)
    )
    assert code == 0
    report = json.loads(report_path.read_text())
    assert report["scheme"] == "RTRP(0.9)"
    assert report["lower_bound"] is None


def test_send_rule_option(run_cli, tmp_path, three_facility_file):
    report_path = tmp_path / "report.json"
    assert run_cli("solve", str(three_facility_file), "--send-rule", "up_to_stock", "--report", str(report_path)) == 0
    assert json.loads(report_path.read_text())["packages"]["P"] == 2


def test_infeasible_instance_exits_with_two(run_cli, tmp_path, three_facility):
    path = tmp_path / "hungry.json"
    save_instance(dataclasses.replace(three_facility, fixed_demand=[[0, 0, 0], [1, 0, 1], [0, 3, 1]]), path)
    assert run_cli("solve", str(path)) == 2


def test_broken_instance_exits_with_one(run_cli, tmp_path, three_facility):
    path = tmp_path / "broken.json"
    save_instance(dataclasses.replace(three_facility, capacity=[-1.0]), path)
    assert run_cli("solve", str(path)) == 1


@pytest.mark.parametrize(
    "args",
    [
        ("generate", "--preset", "huge"),
        ("solve", "missing.json"),
        ("benchmark", "--schemes", "tp,greedy"),
        ("solve", "--time-limit", "0", "x.json"),
    ],
)
def test_usage_errors_exit_with_one(run_cli, args):
    assert run_cli(*args) == 1


def test_missing_config_file(tmp_path):
    assert main(["--config", str(tmp_path / "none.toml"), "generate", "--preset", "tiny"]) == 1


def test_export_lp(run_cli, capsys, three_facility_file):
    assert run_cli("export", str(three_facility_file), "--format", "lp") == 0
    assert "Subject To" in capsys.readouterr().out


def test_export_relaxed_mps(run_cli, tmp_path, three_facility_file):
    path = tmp_path / "rt.mps"
    assert run_cli("export", str(three_facility_file), "--relaxed", "--delta", "0.85", "--out", str(path)) == 0
    assert path.read_text().startswith("NAME          RT_0.85")


def test_pack_solution_file(run_cli, capsys, tmp_path, three_facility_file):
    solution_path = tmp_path / "solution.json"
    assert run_cli("solve", str(three_facility_file), "--out", str(solution_path)) == 0
    capsys.readouterr()
    assert run_cli("pack", str(solution_path)) == 0
    manifest = json.loads(capsys.readouterr().out)
    assert {tuple(entry["movement"]) for entry in manifest} == {(0, 1), (1, 2), (0, 2)}


def test_benchmark_writes_csv_and_figures(run_cli, tmp_path):
    code = run_cli(
        "benchmark", "--set", "tiny", "--schemes", "tp,rtrp:1", "--instances", "2", "--time-limit", "30",
        "--out-dir", str(tmp_path),
    )
    assert code == 0
    assert (tmp_path / "benchmark_tiny.csv").exists()
    assert (tmp_path / "benchmark_tiny_upper_bound.svg").exists()
    assert (tmp_path / "benchmark_tiny_time_total.svg").exists()


def test_compare_policies_command(run_cli, tmp_path):
    code = run_cli(
        "compare-policies", "--preset", "tiny", "--instances", "1", "--alphas", "1", "--factors", "0.5,2",
        "--time-limit", "30", "--out-dir", str(tmp_path),
    )
    assert code == 0
    assert (tmp_path / "policies.csv").exists()
    assert (tmp_path / "policies_alpha1_worsening.svg").exists()


def test_help_lists_exit_codes(run_cli, capsys):
    assert run_cli("--help") == 0
    out = " ".join(capsys.readouterr().out.split())
    assert "2 infeasible or no solution within the time limit" in out
    assert "3 solver or packing failure" in out


@pytest.mark.parametrize("fault", [SolverFault, PackingFault])
def test_solver_faults_exit_with_three(run_cli, monkeypatch, three_facility_file, fault):
    def broken(*args, **kwargs):
        msg = "node LP failed"
        raise fault(msg)

    monkeypatch.setattr("stockshift.tools.cli.run_tp", broken)
    assert run_cli("solve", str(three_facility_file)) == 3
