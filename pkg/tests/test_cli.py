import csv
import json

import numpy as np
import pytest

from bihamlab.cli import RunConfig, main, read_config
from bihamlab.errors import ConfigError


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_verify_involution_passes(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "involution", "--n", "3", "--trials", "50", "--seed", "7")
    assert code == 0
    line = next(l for l in out.splitlines() if l.startswith("involution"))
    assert line.endswith("PASS") and float(line.split()[-3]) <= 1e-11
    assert out.splitlines()[-1].startswith("overall: PASS")


def test_verify_all_suites_n2(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "all", "--n", "2", "--trials", "10")
    assert code == 0, out
    assert "FAIL" not in out


def test_verify_fails_below_noise_floor(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "jacobi", "--tol", "1e-12", "--trials", "3")
    assert code == 1
    assert "overall: FAIL" in out


def test_verify_commutator_pair_flags(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "commutator", "--m", "2", "--l", "3", "--trials", "3")
    assert code == 0


def test_verify_json_summary(tmp_path, capsys):
    target = tmp_path / "summary.jsonl"
    code, _, _ = run(capsys, "verify", "--suite", "cdybe,involution", "--trials", "4", "--json", str(target))
    assert code == 0
    records = [json.loads(l) for l in target.read_text().splitlines()]
    assert [r["suite"] for r in records] == ["cdybe", "involution"]
    assert all(r["passed"] for r in records)


def test_threads_do_not_change_results(tmp_path, capsys, monkeypatch):
    outs = []
    for threads in ("1", "4"):
        monkeypatch.setenv("BIHAMLAB_THREADS", threads)
        target = tmp_path / f"t{threads}.jsonl"
        run(capsys, "verify", "--suite", "compatibility,li", "--trials", "8", "--seed", "11", "--json", str(target))
        outs.append(target.read_text())
    assert outs[0] == outs[1]


@pytest.mark.parametrize(
    "argv",
    [
        ("integrate", "--steps", "0"),
        ("verify", "--suite", "nonsense"),
        ("verify", "--n", "1"),
        ("verify", "--trials", "0"),
        ("verify", "--tol", "-1"),
        ("integrate", "--config", "/nonexistent/config"),
    ],
)
def test_config_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert "config error" in err


DIAGONAL = """
# a decoupled start
q = [1.0, 0.0]
L = [[2.0, 0.0], [0.0, 1.0]]
m = 1
t = 0.5
steps = 10
K = 3
observables = wtr(P1,L,P2,L); mul(q[1],H(2))
"""


def test_integrate_diagonal_start(tmp_path, capsys):
    cfg = write(tmp_path / "diag.cfg", DIAGONAL)
    out_csv = tmp_path / "traj.csv"
    code, out, _ = run(capsys, "integrate", "--config", cfg, "--out", str(out_csv))
    assert code == 0
    rows = list(csv.reader(out_csv.open()))
    assert rows[0] == ["t", "q_1", "q_2", "H_1", "H_2", "H_3", "wtr(P1,L,P2,L)", "mul(q[1],H(2))"]
    data = np.array(rows[1:], dtype=float)
    assert data.shape == (11, 8)
    # H_k columns are constant and q moves freely
    assert np.ptp(data[:, 3:6], axis=0).max() == 0
    assert np.allclose(data[-1, :3], [0.5, 2.0, 0.5])
    assert np.allclose(data[:, 6], 0)
    assert "drift H_1: 0.000e+00" in out


def test_integrate_drift_is_small(tmp_path, capsys):
    out_csv = tmp_path / "traj.csv"
    code, out, _ = run(capsys, "integrate", "--t", "1", "--steps", "1000", "--seed", "4", "--out", str(out_csv))
    assert code == 0
    drifts = [float(l.split()[-1]) for l in out.splitlines() if l.startswith("drift")]
    assert len(drifts) == 4 and max(drifts) <= 1e-9


def test_integrate_is_deterministic(tmp_path, capsys):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for path in paths:
        run(capsys, "integrate", "--n", "3", "--seed", "5", "--steps", "200", "--out", str(path))
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_integrate_to_stdout_keeps_drifts_on_stderr(capsys):
    code, out, err = run(capsys, "integrate", "--steps", "20", "--t", "0.01")
    assert code == 0
    assert out.startswith("t,q_1,q_2,q_3,H_1")
    assert "drift H_2" in err and "drift" not in out


def test_integrate_reports_regularity_loss(tmp_path, capsys):
    cfg = write(tmp_path / "wall.cfg", "q = [0.05, 0.0]\nL = [[0.0, 0.0], [0.0, 1.0]]\nt = 1\nsteps = 100\n")
    code, _, err = run(capsys, "integrate", "--config", cfg, "--out", str(tmp_path / "x.csv"))
    assert code == 1
    assert "left the alcove at t =" in err


def test_flags_override_config(tmp_path):
    cfg = write(tmp_path / "c.cfg", "n = 4\nseed = 9\ntrials = 7  # inline comment\nsuite = li\n")
    values = read_config(cfg)
    assert values == {"n": 4, "seed": 9, "trials": 7, "suite": "li"}
    from bihamlab.cli import build_parser, make_config

    merged = make_config(build_parser().parse_args(["verify", "--config", cfg, "--trials", "3"]))
    assert (merged.n, merged.seed, merged.trials, merged.suite) == (4, 9, 3, "li")


def test_config_parsing_errors(tmp_path):
    with pytest.raises(ConfigError):
        read_config(write(tmp_path / "a.cfg", "n 3\n"))
    with pytest.raises(ConfigError):
        read_config(write(tmp_path / "b.cfg", "colour = red\n"))
    with pytest.raises(ConfigError):
        read_config(write(tmp_path / "c.cfg", "n = three\n"))
    with pytest.raises(ConfigError):
        RunConfig(q=[1.0, 0.0]).validate()
    with pytest.raises(ConfigError):
        RunConfig(q=[0.0, 0.0], L=[[1, 0], [0, 1]]).validate().initial_state()


def test_complex_entries_in_config(tmp_path):
    cfg = write(tmp_path / "c.cfg", 'q = [0.5, -0.5]\nL = [[1, "0.2+0.1j"], ["0.2-0.1j", 0]]\n')
    p = RunConfig(**read_config(cfg)).validate().initial_state()
    assert p.L[0, 1] == 0.2 + 0.1j


def test_oracle_diagonal_start(tmp_path, capsys):
    cfg = write(tmp_path / "diag.cfg", "q = [1.0, 0.0]\nL = [[2.0, 0.0], [0.0, 1.0]]\n")
    code, out, _ = run(capsys, "oracle", "--config", cfg, "--steps", "100")
    lines = out.splitlines()
    assert float(lines[1].split()[1]) <= 1e-13  # free motion: only summation roundoff
    # the RK4 error vanishes for free motion, so no convergence ratio can be measured
    assert lines[1].split()[2] == "n/a"
    assert code == 0


def test_oracle_random_trials(capsys):
    code, out, _ = run(capsys, "oracle", "--trials", "3", "--seed", "2")
    assert code == 0
    ratios = [float(l.split()[2]) for l in out.splitlines()[1:-1]]
    assert all(12 <= r <= 20 for r in ratios)


def test_bench(capsys):
    code, out, _ = run(capsys, "bench", "--suite", "involution", "--trials", "2")
    assert code == 0 and "ms/trial" in out
