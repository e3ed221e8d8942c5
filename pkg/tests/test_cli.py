"""Command-line interface: exit codes, report files, determinism and the
printed summaries."""

import json
import re
import subprocess
import sys
from argparse import Namespace

import pytest

from percoqs import analysis
from percoqs.cli import (
    EXIT_CAPACITY,
    EXIT_CHECK_FAILED,
    EXIT_IO,
    EXIT_OK,
    EXIT_USAGE,
    _finish_check,
    main,
    render_svg,
)
from percoqs.lattice import Params
from percoqs.percolation import sample_tree


@pytest.fixture(autouse=True)
def _clean_budget_env(monkeypatch):
    monkeypatch.delenv("PERCOQS_NODE_BUDGET", raising=False)


# --- exit codes -----------------------------------------------------------


def test_usage_errors_exit_1(capsys):
    assert main([]) == EXIT_USAGE
    assert main(["bogus"]) == EXIT_USAGE
    assert main(["solve", "kappa", "--M", "3"]) == EXIT_USAGE  # --s required
    assert main(["sample", "--p", "1.5"]) == EXIT_USAGE
    assert main(["sample", "--M", "2"]) == EXIT_USAGE
    assert main(["check", "martingale", "--depth", "3", "--level", "7",
                 "--trials", "200"]) == EXIT_USAGE
    capsys.readouterr()


def test_help_exits_0(capsys):
    assert main(["--help"]) == EXIT_OK
    assert "percoqs" in capsys.readouterr().out


def test_capacity_exit_2(tmp_path, monkeypatch, capsys):
    out = str(tmp_path / "t.json")
    argv = ["sample", "--depth", "5", "--seed", "0", "--out", out]
    assert main(argv + ["--node-budget", "50"]) == EXIT_CAPACITY
    monkeypatch.setenv("PERCOQS_NODE_BUDGET", "50")
    # the environment variable wins even over a generous flag
    assert main(argv + ["--node-budget", "10000000"]) == EXIT_CAPACITY
    capsys.readouterr()


def test_io_error_exit_3(tmp_path, capsys):
    missing = str(tmp_path / "no-such-dir" / "x.json")
    assert main(["sample", "--depth", "2", "--out", missing]) == EXIT_IO
    assert main(["render", "--tree", str(tmp_path / "absent.json")]) == EXIT_IO
    capsys.readouterr()


def test_finish_check_exit_codes(capsys):
    args = Namespace(out=None)
    assert _finish_check(args, "check x", {}, {}, True, ["ok PASS"]) == EXIT_OK
    assert _finish_check(args, "check x", {}, {}, False, ["bad FAIL"]) == EXIT_CHECK_FAILED
    assert "bad FAIL" in capsys.readouterr().out


# --- sample ---------------------------------------------------------------


def test_sample_writes_canonical_tree(tmp_path, capsys):
    out = tmp_path / "tree.json"
    assert main(["sample", "--depth", "3", "--seed", "5", "--out", str(out)]) == EXIT_OK
    err = capsys.readouterr().err
    assert "level 0: 1 survivors" in err
    obj = json.loads(out.read_bytes())
    assert obj["format"] == "percoqs-tree/1"
    assert obj["depth"] == 3 and obj["seed"] == 5


def test_sample_stdout_when_no_out(capsys):
    assert main(["sample", "--depth", "1", "--seed", "0"]) == EXIT_OK
    obj = json.loads(capsys.readouterr().out)
    assert obj["format"] == "percoqs-tree/1"


def test_sample_reruns_byte_identical(tmp_path, capsys):
    base = ["sample", "--depth", "4", "--seed", "3", "--nonextinct"]
    files = []
    for i, extra in enumerate(([], [], ["--workers", "4"])):
        out = tmp_path / f"t{i}.json"
        assert main(base + ["--out", str(out)] + extra) == EXIT_OK
        files.append(out.read_bytes())
    assert files[0] == files[1] == files[2]
    assert "non-extinct after" in capsys.readouterr().err


# --- render ----------------------------------------------------------------


def test_render_svg_structure(tmp_path, capsys):
    tree_file = tmp_path / "tree.json"
    assert main(["sample", "--depth", "3", "--seed", "2", "--nonextinct",
                 "--out", str(tree_file)]) == EXIT_OK
    svg_file = tmp_path / "out.svg"
    assert main(["render", "--tree", str(tree_file), "--levels", "1,2",
                 "--out", str(svg_file)]) == EXIT_OK
    svg = svg_file.read_text()
    tree = sample_tree(Params(m=3, d=2, p=0.7), 3, json.loads(tree_file.read_bytes())["seed"])
    assert svg.startswith("<svg ")
    assert svg.count('fill="#30506d"') == tree.count(1) + tree.count(2)

    image_file = tmp_path / "img.svg"
    assert main(["render", "--tree", str(tree_file), "--levels", "2", "--image",
                 "--out", str(image_file)]) == EXIT_OK
    assert '#7d3c68' in image_file.read_text()

    assert main(["render", "--tree", str(tree_file), "--levels", "9"]) == EXIT_USAGE
    capsys.readouterr()


def test_render_rejects_3d():
    tree = sample_tree(Params(m=3, d=3, p=0.9), 1, 0)
    from percoqs.errors import DomainError

    with pytest.raises(DomainError):
        render_svg(tree, [1])


# --- solve -----------------------------------------------------------------


def test_solve_t_output(capsys):
    assert main(["solve", "t", "--M", "3", "--d", "2", "--p", "0.7"]) == EXIT_OK
    out = capsys.readouterr().out
    m = re.search(r"s_hausdorff=([\d.]+) t_upper=([\d.]+) gap=(\S+) residual=(\S+)", out)
    assert m is not None
    assert float(m.group(1)) == pytest.approx(1.6753404748720375, abs=1e-9)
    assert float(m.group(2)) < float(m.group(1))
    assert float(m.group(4)) <= 1e-12


def test_solve_epsilon_table_output(tmp_path, capsys):
    report = tmp_path / "eps.json"
    assert main(["solve", "epsilon-table", "--out", str(report)]) == EXIT_OK
    out = capsys.readouterr().out.strip().splitlines()
    assert len(out) == 5
    want = {(3, 2): 0.003887, (4, 2): 0.005559, (5, 2): 0.006082,
            (3, 3): 0.001570, (4, 3): 0.002403}
    for line in out:
        m = re.match(r"M=(\d) d=(\d) p_star=([\d.]+) epsilon=([\d.]+)", line)
        key = (int(m.group(1)), int(m.group(2)))
        assert float(m.group(4)) == pytest.approx(want[key], abs=1e-5)
    rows = json.loads(report.read_bytes())["results"]["rows"]
    assert len(rows) == 5


def test_solve_kappa_output(tmp_path, capsys):
    report = tmp_path / "kappa.json"
    argv = ["solve", "kappa", "--M", "3", "--p", "0.5", "--s", "1.0",
            "--out", str(report)]
    assert main(argv) == EXIT_OK
    out = capsys.readouterr().out
    m = re.search(r"kappa\(s=1.0, K=1\)=([\d.]+) kappa_prime=([\d.]+)", out)
    assert float(m.group(1)) == pytest.approx(3455 / 3456, abs=1e-15)
    assert float(m.group(2)) == pytest.approx(2303 / 2304, abs=1e-15)
    obj = json.loads(report.read_bytes())
    assert obj["command"] == "solve kappa"
    assert obj["config"]["s"] == 1.0


def test_solve_kappa_eta_parsing(tmp_path):
    report = tmp_path / "k.json"
    argv = ["solve", "kappa", "--M", "4", "--K", "2", "--eta", "16,13",
            "--s", "0.5", "--out", str(report)]
    assert main(argv) == EXIT_OK
    assert json.loads(report.read_bytes())["config"]["eta"] == [16, 13]


# --- check -----------------------------------------------------------------


def test_check_oracle_report(tmp_path, capsys):
    report = tmp_path / "oracle.json"
    assert main(["check", "oracle", "--out", str(report)]) == EXIT_OK
    assert "PASS" in capsys.readouterr().out
    obj = json.loads(report.read_bytes())
    assert obj["format"] == "percoqs-report/1"
    assert obj["pass"] is True
    assert obj["results"]["worst_error"] <= 1e-12
    assert set(obj["config"]) >= {"M", "d", "p", "K", "eta", "seed"}
    assert "workers" not in obj["config"]


def test_check_martingale_runs(capsys):
    argv = ["check", "martingale", "--p", "0.7", "--depth", "3", "--trials", "400"]
    assert main(argv) == EXIT_OK
    assert "PASS" in capsys.readouterr().out


def test_check_qs_runs(capsys):
    argv = ["check", "qs", "--p", "0.7", "--depth", "3", "--trees", "2",
            "--trials", "300"]
    assert main(argv) == EXIT_OK
    out = capsys.readouterr().out
    assert "C_emp" in out and "PASS" in out


def test_check_dims_runs(capsys):
    argv = ["check", "dims", "--p", "0.7", "--depth", "4", "--trials", "30"]
    assert main(argv) == EXIT_OK
    out = capsys.readouterr().out
    assert "t_hat < s_hat: PASS" in out


def test_check_global_runs(tmp_path, capsys):
    report = tmp_path / "global.json"
    argv = ["check", "global", "--p", "0.7", "--depth", "3", "--trials", "2000",
            "--out", str(report)]
    assert main(argv) == EXIT_OK
    out = capsys.readouterr().out
    assert out.count("PASS") == 4
    obj = json.loads(report.read_bytes())
    assert obj["results"]["boundary_identity_max"] == 0.0
    assert obj["results"]["bilipschitz_bracket"] <= 27.0


def test_check_reports_are_deterministic(tmp_path, capsys):
    blobs = []
    for i in range(2):
        report = tmp_path / f"qs{i}.json"
        argv = ["check", "qs", "--depth", "3", "--trees", "2", "--trials", "200",
                "--out", str(report), "--workers", str(1 + 3 * i)]
        assert main(argv) == EXIT_OK
        blobs.append(report.read_bytes())
    assert blobs[0] == blobs[1]
    capsys.readouterr()


# --- installed entry point ---------------------------------------------------


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "percoqs.cli", "solve", "epsilon-table"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert proc.stdout.count("epsilon=") == 5
