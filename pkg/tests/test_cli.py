import subprocess
import sys

import pytest

from zklab import cli


def write_config(path, text):
    path.write_text(text)
    return str(path)


def run(tmp_path, text, *args, name="out", environ=None):
    cfg = write_config(tmp_path / f"{name}.ini", text)
    out = tmp_path / name
    code = cli.run(["--config", cfg, "--out", str(out), *args], environ=environ or {})
    return code, out


TRIANGLE = """
[classify]
source = triple
nu = 0
k2 = 128
zeta = -64
m2 = -64
"""


def test_exact_triangle_gives_one_bad_entry(tmp_path):
    code, out = run(tmp_path, TRIANGLE, "classify")
    assert code == 0
    lines = (out / "census.csv").read_text().splitlines()
    assert lines[0] == "N_min,M,kind,count"
    assert lines[1:] == ["64.0,,bad,1"]


def test_counterexample_x_slope(tmp_path):
    code, out = run(tmp_path, "[counterexample]\ns_values = 0.6\nn_nodes = 24\n", "counterexample", "x")
    assert code == 0
    last = (out / "scan.csv").read_text().splitlines()[-1]
    slope = float(last.split("slope=")[1].split()[0])
    assert abs(slope - 0.15) <= 0.15


def test_missing_key_names_it(tmp_path, capsys):
    code, _ = run(tmp_path, "[counterexample]\nN_list = 64 128 256\n", "counterexample", "y")
    assert code == 1
    assert "counterexample.s_values" in capsys.readouterr().err


def test_triple_source_needs_coordinates(tmp_path, capsys):
    code, _ = run(tmp_path, "[classify]\nsource = triple\nnu = 0\nk2 = 128\nzeta = -64\n", "classify")
    assert code == 1
    assert "classify.m2" in capsys.readouterr().err


@pytest.mark.parametrize("text", ["[coro]\ncount = lots\n", "[coro]\ncuont = 5\n", "[general]\nseed = -1\n"])
def test_bad_config_values(tmp_path, text):
    assert run(tmp_path, text, "verify-lemma", "coro")[0] == 1


def test_missing_config_file(tmp_path):
    assert cli.run(["--config", str(tmp_path / "nope.ini"), "classify"], environ={}) == 1
    assert cli.run(["classify"], environ={}) == 1


def test_unknown_subcommand():
    assert cli.run(["frobnicate"], environ={}) == 1


def test_resolved_config_echo_and_overrides(tmp_path, capsys):
    code, out = run(tmp_path, "[general]\nseed = 3\nthreads = 2\n[localization]\ncount = 50\n",
                    "--seed", "11", "verify-lemma", "localization", environ={"ZK_THREADS": "5"})
    assert code == 0
    text = (out / "resolved_config.ini").read_text()
    assert text in capsys.readouterr().out
    assert "seed = 11" in text and "threads = 5" in text and "count = 50" in text
    assert (out / "summary.csv").read_text().splitlines()[1] == "localization,50,0,0.0"


def test_bad_thread_override(tmp_path):
    code, _ = run(tmp_path, "[localization]\ncount = 5\n", "verify-lemma", "localization",
                  environ={"ZK_THREADS": "many"})
    assert code == 1


SMALL_SIM = """
[simulate]
xi_max = 8
n_x1 = 64
k_max = 7
T = 0.01
dt = 1e-4
store_every = 20
"""


def test_simulate_then_norms(tmp_path):
    code, out = run(tmp_path, SMALL_SIM, "simulate", name="sim")
    assert code == 0
    drift = dict(line.split(",") for line in (out / "drift.csv").read_text().splitlines()[1:])
    assert float(drift["mass_drift"]) < 1e-9
    assert (out / "conserved.csv").read_text().startswith("t,mass,energy\n")
    dump = out / "trajectory.zk"
    code, nout = run(tmp_path, f"[norms]\ndump = {dump}\ns = 0.5\nb = 0.6\n", "norms", name="nrm")
    assert code == 0
    lines = (nout / "norms.csv").read_text().splitlines()
    assert lines[0] == "norm_name,s,b,gamma,value"
    assert [l.split(",")[0] for l in lines[1:]] == ["H_s", "X_sb", "Y_sb", "Z_sb"]


def test_non_convergence_exit_code(tmp_path, capsys):
    text = SMALL_SIM + "amplitude = 2.0\nmax_iter = 2\n"
    code, _ = run(tmp_path, text, "simulate")
    assert code == 2
    assert "numerical failure" in capsys.readouterr().err


@pytest.mark.parametrize("args,text,files", [
    (["classify"], "[classify]\ncount = 400\n", ["census.csv"]),
    (["verify-lemma", "coro"], "[coro]\ncount = 200\n", ["summary.csv"]),
    (["verify-lemma", "abounds"], "[abounds]\ncount = 6\nn_points = 20000\n", ["bounds.csv", "summary.csv"]),
    (["random-experiment"], "[random-experiment]\nK_values = 4\nseeds = 2\n", ["census.csv", "medians.csv"]),
    (["counterexample", "y"], "[counterexample]\ns_values = 0.3 0.4\nN_list = 64 128 256\nn_nodes = 12\n",
     ["scan.csv"]),
])
def test_byte_identical_outputs(tmp_path, args, text, files):
    a = run(tmp_path, text, *args, name="a", environ={"ZK_THREADS": "1"})
    b = run(tmp_path, text, *args, name="b", environ={"ZK_THREADS": "3"})
    assert a[0] == b[0] == 0
    for f in files:
        assert (a[1] / f).read_bytes() == (b[1] / f).read_bytes()


def test_seed_changes_sampled_output(tmp_path):
    a = run(tmp_path, "[classify]\ncount = 300\n", "--seed", "1", "classify", name="a")[1]
    b = run(tmp_path, "[classify]\ncount = 300\n", "--seed", "2", "classify", name="b")[1]
    assert (a / "census.csv").read_bytes() != (b / "census.csv").read_bytes()


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "zklab", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "verify-lemma" in res.stdout
