import csv
import io
import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from netform import __version__, cli
from netform.errors import NumericalError
from netform.game import reciprocity_utilities
from netform.network import DirectedNetwork

RECIP = ["--motif", "1->2", "--value", "-1", "--motif", "1->2,2->1", "--value", "3", "--sigma", "0.5"]
SWEEP = ["--motif", "1->2", "--value", "-3", "--motif", "1->2,2->1", "--value", "0", "--sigma", "0.5",
         "--param", "m2", "--start", "0", "--stop", "20", "--steps", "201"]


def run(*argv):
    buf = io.StringIO()
    code = cli.run(list(argv), stdout=buf)
    lines = buf.getvalue().strip().splitlines()
    assert len(lines) == 1
    return code, json.loads(lines[0])


def read_csv(path):
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        rows = list(csv.reader(fh))
    return header, rows[0], rows[1:]


def assert_header(line):
    assert line.startswith(f"# netform {__version__} config=")
    assert len(line.split("config=")[1]) == 64


def write_table(path, U):
    with open(path, "w") as fh:
        fh.write("# utilities\nagent,network_hex,value\n")
        for i in range(U.n_nodes):
            for g in range(U.values.shape[1]):
                fh.write(f"{i + 1},{DirectedNetwork(U.n_nodes, g).to_hex()},{float(U.values[i, g])!r}\n")


def test_eap_solve_single_link():
    code, out = run("eap-solve", "--motif", "1->2", "--value", "0", "--sigma", "0.3")
    assert code == 0 and out["status"] == "ok"
    assert out["rho_star"] == 0.5


def test_exact_stationary_two_nodes(tmp_path):
    path = tmp_path / "pi.csv"
    code, out = run("exact-stationary", *RECIP, "--n-nodes", "2", "--out", str(path))
    assert code == 0 and out["n_states"] == 4
    header, cols, rows = read_csv(path)
    assert_header(header)
    assert cols == ["network_hex", "probability"]
    e = math.e
    expected = np.array([1, 1 / e, 1 / e, e]) / (1 + 2 / e + e)
    assert [r[0] for r in rows] == ["0", "1", "2", "3"]
    np.testing.assert_allclose([float(r[1]) for r in rows], expected, rtol=1e-15)


def test_phase_sweep_flags_one_transition(tmp_path):
    path = tmp_path / "sweep.csv"
    code, out = run("phase-sweep", *SWEEP, "--out", str(path))
    assert code == 0 and out["n_transitions"] == 1
    header, cols, rows = read_csv(path)
    assert_header(header)
    assert cols == ["series", "parameter", "rho_star", "zeta", "n_local_maxima", "unique", "rho_low", "rho_high",
                    "transition_at"]
    assert len(rows) == 201
    flagged = [r for r in rows if r[-1]]
    assert len(flagged) == 1
    assert float(flagged[0][-1]) == pytest.approx(6.0, abs=1e-4)
    assert {r[5] for r in rows} <= {"true", "false"}


def test_sweep_output_independent_of_workers(tmp_path, monkeypatch):
    monkeypatch.delenv("NETFORM_WORKERS", raising=False)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run("phase-sweep", *SWEEP, "--out", str(a), "--workers", "1")[0] == 0
    assert run("phase-sweep", *SWEEP, "--out", str(b), "--workers", "8")[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_workers_environment_override(tmp_path, monkeypatch):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run("phase-sweep", *SWEEP, "--out", str(a))
    monkeypatch.setenv("NETFORM_WORKERS", "4")
    run("phase-sweep", *SWEEP, "--out", str(b))
    assert a.read_bytes() == b.read_bytes()
    monkeypatch.setenv("NETFORM_WORKERS", "many")
    assert run("phase-sweep", *SWEEP, "--out", str(b))[0] == 2


def test_empty_grid(tmp_path):
    path = tmp_path / "empty.csv"
    code, out = run("phase-sweep", "--motif", "1->2", "--value", "0", "--sigma", "0.5", "--start", "0",
                    "--stop", "1", "--steps", "0", "--out", str(path))
    assert code == 0 and out["rows"] == 0
    lines = path.read_text().splitlines()
    assert len(lines) == 2
    assert_header(lines[0])


def test_chain_grid_cardinality(tmp_path):
    path = tmp_path / "chains.csv"
    code, out = run("phase-sweep", "--chain-lengths", "5,7,9", "--sigma", "0.5", "--start", "0", "--stop", "60",
                    "--steps", "200", "--out", str(path), "--workers", "3")
    assert code == 0
    _, _, rows = read_csv(path)
    assert len(rows) == 600
    assert [r[0] for r in rows[::200]] == ["chain5", "chain7", "chain9"]


def test_config_file_and_flag_override(tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text("[model]\nkind = motifs\nsigma = 0.5\n\n[motif.link]\nedges = 1->2\nvalue = 2\n")
    code, out = run("eap-solve", "--config", str(ini))
    assert out["rho_star"] == pytest.approx(1 / (1 + math.exp(-2)), abs=1e-12)
    code, out = run("eap-solve", "--config", str(ini), "--sigma", "0.25")
    assert out["rho_star"] == pytest.approx(1 / (1 + math.exp(-6)), abs=1e-12)


def test_simulate_is_deterministic(tmp_path):
    outs = []
    for k in range(2):
        js, series = tmp_path / f"s{k}.json", tmp_path / f"t{k}.csv"
        code, summary = run("simulate", *RECIP, "--n-nodes", "3", "--events", "50000", "--seed", "3",
                            "--out", str(js), "--series", str(series), "--record-every", "5000")
        assert code == 0
        outs.append((js.read_bytes(), series.read_bytes()))
    assert outs[0] == outs[1]
    header, cols, rows = read_csv(tmp_path / "t0.csv")
    assert_header(header)
    assert cols == ["event", "time", "density_m1", "density_m2"]
    assert len(rows) == 10
    data = json.loads(outs[0][0])
    assert data["n_events"] == 50000 and data["tv_to_stationary"] < 0.05


def test_transient_output(tmp_path):
    path = tmp_path / "tr.csv"
    code, out = run("transient", *RECIP, "--n-nodes", "2", "--times", "0,1,200", "--out", str(path))
    assert code == 0
    _, cols, rows = read_csv(path)
    assert cols == ["time", "network_hex", "probability"]
    assert len(rows) == 12
    assert out["tv_to_stationary"][-1] < 1e-9
    assert [float(r[2]) for r in rows[:4]] == [1.0, 0.0, 0.0, 0.0]


def test_kernel_solve_output(tmp_path):
    ini = tmp_path / "typed.ini"
    ini.write_text("[model]\nkind = typed\nsigma = 0.5\nweights = 0.5,0.5\nc = -1,-4; -4,-1\n\n"
                   "[motif.pair]\nedges = 1->2,2->1\nvalue = 4\n")
    path = tmp_path / "k.csv"
    code, out = run("kernel-solve", "--config", str(ini), "--out", str(path))
    assert code == 0 and out["converged"]
    _, cols, rows = read_csv(path)
    assert cols == ["theta", "theta_prime", "psi"] and len(rows) == 4


def test_trade_outputs(tmp_path):
    out_dir = tmp_path / "trade"
    args = ["trade", "--L", "8", "--gamma", "10", "--v-min", "0", "--v-max", "20", "--v-steps", "21",
            "--sigma", "0.25", "--out", str(out_dir)]
    code, out = run(*args)
    assert code == 0 and out["v_points"] == 21
    h1, c1, r1 = read_csv(out_dir / "total_density.csv")
    h2, c2, r2 = read_csv(out_dir / "kernel_profile.csv")
    assert_header(h1) and assert_header(h2)
    assert c1 == ["v", "total_density"] and len(r1) == 21
    assert c2 == ["distance", "psi", "v", "ambiguous"] and len(r2) == 21 * 5
    first = (out_dir / "total_density.csv").read_bytes()
    run(*args)
    assert (out_dir / "total_density.csv").read_bytes() == first
    assert not [p for p in os.listdir(out_dir) if p.startswith(".netform-")]


def test_check_potential(tmp_path):
    good, bad = tmp_path / "good.csv", tmp_path / "bad.csv"
    write_table(good, reciprocity_utilities(3, 3.0, 1.0))
    write_table(bad, reciprocity_utilities(3, [3.5, 3.0, 3.0], 1.0))
    report = tmp_path / "r.json"
    code, out = run("check-potential", "--utilities", str(good), "--out", str(report))
    assert code == 0 and out["is_conservative"]
    assert json.loads(report.read_text())["is_conservative"] is True
    code, out = run("check-potential", "--utilities", str(bad))
    assert code == 0 and not out["is_conservative"]
    assert out["worst_residual"] == pytest.approx(0.5)


def test_exit_codes(tmp_path, monkeypatch):
    code, out = run("bogus")
    assert code == 2 and out["status"] == "error" and out["exit_code"] == 2
    assert run()[0] == 2
    assert run("eap-solve", "--sigma", "0.5")[0] == 2  # no motif
    assert run("eap-solve", "--motif", "1->1", "--value", "1", "--sigma", "0.5")[0] == 2
    assert run("eap-solve", "--motif", "1->2,2->1", "--value", "-1", "--sigma", "0.5")[0] == 2
    assert run("eap-solve", "--config", str(tmp_path / "missing.ini"))[0] == 2
    assert run("check-potential", "--utilities", str(tmp_path / "missing.csv"))[0] == 2
    partial = tmp_path / "partial.csv"
    partial.write_text("agent,network_hex,value\n1,0,0\n")
    assert run("check-potential", "--utilities", str(partial))[0] == 2
    bad_ini = tmp_path / "bad.ini"
    bad_ini.write_text("[model]\nkind = motifs\n[weird]\nx = 1\n")
    assert run("eap-solve", "--config", str(bad_ini))[0] == 2
    code, out = run("transient", "--motif", "1->2", "--value", "0", "--sigma", "0.5", "--n-nodes", "5",
                    "--times", "1")
    assert code == 3 and out["error"] == "InfeasibleSizeError"

    def boom(cfg):
        raise NumericalError("non-finite objective")

    monkeypatch.setitem(cli._DISPATCH, "eap-solve", boom)
    code, out = run("eap-solve", "--motif", "1->2", "--value", "0", "--sigma", "0.5")
    assert code == 4 and out["exit_code"] == 4


def test_worker_failure_surfaces(tmp_path, monkeypatch):
    def fail(task):
        raise NumericalError("worker blew up")

    monkeypatch.setattr(cli, "_solve_chunk", fail)
    path = tmp_path / "x.csv"
    code, out = run("phase-sweep", *SWEEP, "--out", str(path))
    assert code == 4 and not path.exists()


def test_config_hash_ignores_paths_and_workers(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    _, x = run("phase-sweep", *SWEEP, "--out", str(a))
    _, y = run("phase-sweep", *SWEEP, "--out", str(b), "--workers", "2")
    _, z = run("phase-sweep", *SWEEP[:-1], "202", "--out", str(b))
    assert x["config"] == y["config"] != z["config"]


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "netform.cli", "eap-solve", "--motif", "1->2", "--value", "0",
                           "--sigma", "0.5"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["rho_star"] == 0.5
    proc = subprocess.run([sys.executable, "-m", "netform.cli", "nope"], capture_output=True, text=True, check=False)
    assert proc.returncode == 2 and json.loads(proc.stdout)["status"] == "error"
