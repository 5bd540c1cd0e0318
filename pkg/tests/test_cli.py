import subprocess
import sys
from importlib.resources import files

import pytest

from netcatalyst.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, run_cli

DEMO = files("netcatalyst") / "data" / "demo"
PANEL = ["--panel", str(DEMO / "edges.tsv"), "--nodes", str(DEMO / "nodes.tsv"),
         "--composition", str(DEMO / "composition.tsv"), "--membership", str(DEMO / "membership.tsv")]
SMALL_EXPERIMENT = """[experiment]
n = 16
waves = 3
rate = 2
replicates = 12
resamples = 200
effects = density=-1.5, transTriad=0.2, inPop=0.1

[intervention]
mode = nao-hub
targets = 0 1 2
active_waves = 1
"""


def outputs(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


def commands(tmp_path):
    cfg = tmp_path / "exp.ini"
    cfg.write_text(SMALL_EXPERIMENT, encoding="utf-8")
    return {
        "fit-saom": ["fit-saom", *PANEL, "--spec", str(DEMO / "model.spec"), "--gof", "25"],
        "fit-ergm": ["fit-ergm", *PANEL, "--spec", str(DEMO / "ergm.spec"), "--gof", "25"],
        "experiment": ["experiment", "--config", str(cfg)],
        "simulate-panel": ["simulate-panel", "--spec", str(DEMO / "model.spec"), "--n", "12", "--waves", "3"],
    }


def test_fit_saom_demo(tmp_path):
    out = tmp_path / "out"
    assert run_cli(commands(tmp_path)["fit-saom"] + ["--seed", "1", "--out", str(out)]) == EXIT_OK
    names = set(outputs(out))
    assert {"estimates.tsv", "report.txt", "gof.tsv", "gof_degree.svg", "gof_esp.svg", "gof_triad.svg"} <= names
    header = (out / "estimates.tsv").read_text().splitlines()[0].split("\t")
    assert header == ["effect", "estimate", "std_error", "p_value", "t_ratio", "fixed"]
    assert "converged" in (out / "report.txt").read_text()


@pytest.mark.parametrize("name", ["fit-saom", "fit-ergm", "experiment", "simulate-panel"])
def test_byte_identical_reruns(tmp_path, name):
    argv = commands(tmp_path)[name]
    codes = [run_cli(argv + ["--seed", "9", "--threads", "2", "--out", str(tmp_path / d)]) for d in ("a", "b")]
    assert codes[0] == codes[1]
    a, b = outputs(tmp_path / "a"), outputs(tmp_path / "b")
    assert a and a == b


def test_experiment_threads_invariant(tmp_path):
    argv = commands(tmp_path)["experiment"] + ["--seed", "4"]
    assert run_cli(argv + ["--threads", "1", "--out", str(tmp_path / "t1")]) == EXIT_OK
    assert run_cli(argv + ["--threads", "3", "--out", str(tmp_path / "t3")]) == EXIT_OK
    assert outputs(tmp_path / "t1") == outputs(tmp_path / "t3")
    assert {"experiment.tsv", "report.txt", "experiment_target_share.svg"} <= set(outputs(tmp_path / "t1"))


def test_simulated_panel_is_loadable(tmp_path):
    out = tmp_path / "sim"
    assert run_cli(commands(tmp_path)["simulate-panel"] + ["--seed", "2", "--out", str(out)]) == EXIT_OK
    argv = ["fit-saom", "--panel", str(out / "edges.tsv"), "--nodes", str(out / "nodes.tsv"),
            "--spec", str(DEMO / "model.spec"), "--seed", "1", "--out", str(tmp_path / "fit")]
    assert run_cli(argv) in (EXIT_OK, 3)


def test_misspelled_effect_is_usage_error(tmp_path, capsys):
    spec = tmp_path / "bad.spec"
    spec.write_text("rate 1 init=1\neffect density\neffect transTraid\n", encoding="utf-8")
    code = run_cli(["fit-saom", *PANEL, "--spec", str(spec), "--seed", "1", "--out", str(tmp_path / "o")])
    assert code == EXIT_USAGE
    assert "bad.spec:3" in capsys.readouterr().err


def test_unknown_flag_and_missing_seed(tmp_path):
    assert run_cli(["fit-saom", "--bogus"]) == EXIT_USAGE
    assert run_cli(["simulate-panel", "--spec", str(DEMO / "model.spec"), "--n", "5", "--waves", "2",
                    "--out", str(tmp_path)]) == EXIT_USAGE
    assert run_cli([]) == EXIT_USAGE


def test_data_error_exit(tmp_path, capsys):
    edges = tmp_path / "edges.tsv"
    edges.write_text("wave\tnode_a\tnode_b\n1\ta\tb\n2\ta\tzz\n", encoding="utf-8")
    argv = ["fit-saom", "--panel", str(edges), "--nodes", str(DEMO / "nodes.tsv"), "--spec",
            str(DEMO / "model.spec"), "--seed", "1", "--out", str(tmp_path / "o")]
    assert run_cli(argv) == EXIT_DATA
    assert "edges.tsv:3" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "netcatalyst", "simulate-panel", "--spec", str(DEMO / "model.spec"),
                           "--n", "8", "--waves", "2", "--seed", "3", "--out", str(tmp_path / "s")],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "s" / "edges.tsv").exists()
