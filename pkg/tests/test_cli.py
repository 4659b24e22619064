import json
import subprocess
import sys

import numpy as np
import pytest

from qsdsim import exact_qsd, preset
from qsdsim.cli import main
from qsdsim.config import load, resolve
from qsdsim.errors import ConfigError

CFG = """\
chain: paper-10state
scheme: interacting
horizon: 120
growth: {kind: power, zeta: 0.75}
gamma_star: 4.17
initial_states: {uniform-from: [4, 5, 6]}
seed: 7
stride: 10
"""


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_exact_three_state(capsys, tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("3\n1 0 0\n0.2 0.5 0.3\n0.3 0.3 0.4\n")
    code, out, _ = run_cli(capsys, "exact", p)
    assert code == 0
    data = json.loads(out)
    assert data["lambda"] == pytest.approx(0.7541, abs=5e-5)
    np.testing.assert_allclose(data["theta_star"], [0.5414, 0.4586], atol=5e-5)
    # 17 significant digits round-trip
    assert data["theta_star"] == exact_qsd(preset("paper-3state")).theta_star.tolist()


def test_exact_minimal(capsys, tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("2\n1 0\n0.2 0.8\n")
    code, out, _ = run_cli(capsys, "exact", p)
    assert code == 0 and json.loads(out)["theta_star"] == [1.0]


def test_exact_bad_row(capsys, tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("3\n1 0 0\n0.2 0.5 0.3\n0.3 0.3 0.3\n")
    code, _, err = run_cli(capsys, "exact", p)
    assert code == 2 and "row 2" in err


def test_exact_missing_file_and_reducible(capsys, tmp_path):
    assert run_cli(capsys, "exact", tmp_path / "nope.txt")[0] == 2
    p = tmp_path / "r.txt"
    p.write_text("3\n1 0 0\n0 1 0\n0.5 0 0.5\n")
    assert run_cli(capsys, "exact", p)[0] == 3


def test_theory_ten_state_accepted(capsys):
    code, out, _ = run_cli(capsys, "theory", "paper-10state", "--gamma-star", "4.17")
    assert code == 0
    data = json.loads(out)
    assert data["inv_L"] < 4.17
    assert data["residual"] <= 1e-10
    assert {"L", "inv_L", "grad_h", "U_star", "V", "residual"} <= set(data)


def test_theory_below_threshold(capsys):
    code, _, err = run_cli(capsys, "theory", "paper-10state", "--gamma-star", "0.01")
    assert code == 3 and "1/L" in err
    # forcing past the threshold still needs a stable Lyapunov operator
    assert run_cli(capsys, "theory", "paper-10state", "--gamma-star", "0.01", "--force")[0] == 3
    assert run_cli(capsys, "theory", "paper-10state", "--gamma-star", "3.2", "--force")[0] == 0


def test_theory_algII_zero_matches_algI(capsys):
    _, a, _ = run_cli(capsys, "theory", "paper-3state", "--gamma-star", "3")
    _, b, _ = run_cli(capsys, "theory", "paper-3state", "--gamma-star", "3", "--variant", "algII",
                      "--zeta", "0")
    np.testing.assert_allclose(json.loads(a)["V"], json.loads(b)["V"], atol=1e-9)


def test_run_and_rerun_from_manifest(capsys, tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(CFG)
    assert run_cli(capsys, "run", cfg, "--out", tmp_path / "a")[0] == 0
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert man["master_seed"] == 7 and man["chain_source"] == "paper-10state"
    assert len(man["resolved_config"]["initial_states"]) == 36
    assert {"version", "wall_clock_seconds", "backend", "config_path", "outputs"} <= set(man)
    assert run_cli(capsys, "run", tmp_path / "a" / "manifest.json", "--out", tmp_path / "b")[0] == 0
    for name in ("trace.csv", "estimate.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    rows = (tmp_path / "a" / "trace.csv").read_text().splitlines()
    assert rows[0] == "moves," + ",".join(f"theta_{j}" for j in range(1, 10))
    assert rows[-1].split(",")[0] == str(120 * 36)


def test_run_inline_chain_file_reference(capsys, tmp_path):
    (tmp_path / "chain.txt").write_text("3\n1 0 0\n0.2 0.5 0.3\n0.3 0.3 0.4\n")
    cfg = tmp_path / "c.yaml"
    cfg.write_text("chain: chain.txt\nscheme: single\nhorizon: 50\ninitial_states: [1]\nout: o\n")
    assert run_cli(capsys, "run", cfg, "--out", tmp_path / "o")[0] == 0
    again = tmp_path / "o" / "manifest.json"
    assert run_cli(capsys, "run", again, "--out", tmp_path / "p")[0] == 0
    assert (tmp_path / "o" / "trace.csv").read_bytes() == (tmp_path / "p" / "trace.csv").read_bytes()


def test_run_minimal_single(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"chain": [[1, 0], [0.2, 0.8]], "scheme": "single", "horizon": 10,
                               "initial_states": [1]}))
    assert run_cli(capsys, "run", cfg, "--out", tmp_path / "o")[0] == 0
    est = json.loads((tmp_path / "o" / "estimate.json").read_text())
    assert est["estimate"] == [1.0]


def test_run_fleming_viot_one_particle(capsys, tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("chain: paper-3state\nscheme: fleming_viot\nhorizon: 10\n"
                   "growth: {kind: constant, a: 1}\ninitial_states: [1]\n")
    code, _, err = run_cli(capsys, "run", cfg, "--out", tmp_path / "o")
    assert code == 2 and "fleming_viot" in err


@pytest.mark.parametrize("bad,field", [
    ({"horizon": 0}, "horizon"), ({"scheme": "teleport"}, "scheme"), ({"colour": 1}, "unknown"),
    ({"growth": {"kind": "cubic"}}, "growth.kind"), ({"initial_states": [0]}, "initial_states"),
    ({"initial_states": [1, 2]}, "initial_states"), ({"seed": -1}, "seed"),
])
def test_config_field_errors(bad, field):
    base = {"chain": "paper-3state", "scheme": "single", "horizon": 10, "initial_states": [1]}
    with pytest.raises(ConfigError, match=field):
        resolve({**base, **bad})


def test_uniform_from_is_seeded(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(CFG)
    a, b = load(cfg), load(cfg)
    assert a.states == b.states and set(a.states) == {4, 5, 6}
    assert load(cfg, {"seed": 8}).states != a.states


def test_compare(capsys, tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(CFG.replace("scheme: interacting\n", "") + "reps: 3\n")
    assert run_cli(capsys, "compare", cfg, "--out", tmp_path / "o")[0] == 0
    names = sorted(p.name for p in (tmp_path / "o").iterdir())
    assert names == ["branching.csv", "fleming_viot.csv", "independent.csv", "interacting.csv",
                     "manifest.json", "single.csv", "summary.json"]
    assert run_cli(capsys, "compare", tmp_path / "o" / "manifest.json", "--out", tmp_path / "p")[0] == 0
    for n in names:
        if n != "manifest.json":
            assert (tmp_path / "o" / n).read_bytes() == (tmp_path / "p" / n).read_bytes()


def test_experiment_one_smoke(capsys, tmp_path):
    assert run_cli(capsys, "experiment", "one", "--reps", "2", "--out", tmp_path)[0] == 0
    assert len(list(tmp_path.glob("*.csv"))) == 5
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["single"]["moves_used"] == 177000


def test_clt_preset_small(capsys, tmp_path):
    assert run_cli(capsys, "clt", "paper-3state", "--reps", "30", "--out", tmp_path / "a")[0] == 0
    rep = json.loads((tmp_path / "a" / "clt_report.json").read_text())
    assert "frobenius_rel_error" in rep and rep["R"] == 30
    assert run_cli(capsys, "clt", tmp_path / "a" / "manifest.json", "--out", tmp_path / "b")[0] == 0
    assert (tmp_path / "a" / "clt_report.json").read_bytes() == (tmp_path / "b" / "clt_report.json").read_bytes()


def test_clt_branching_variant(capsys, tmp_path):
    code = run_cli(capsys, "clt", "paper-3state", "--scheme", "branching", "--variant", "algII_beta",
                   "--reps", "10", "--out", tmp_path)[0]
    assert code == 0
    assert json.loads((tmp_path / "clt_report.json").read_text())["variant"] == "algII_beta"


def test_console_entry_exit_code(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("3\n1 0 0\n0.2 0.5 0.3\n0.3 0.3 0.3\n")
    r = subprocess.run([sys.executable, "-m", "qsdsim.cli", "exact", str(p)], capture_output=True, text=True)
    assert r.returncode == 2 and "row 2" in r.stderr
