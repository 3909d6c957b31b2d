import json

import numpy as np
import pytest

from dncahn import cli, stepper
from dncahn.cli import JSONL_KEYS, ConfigError, main, parse_call, parse_config
from dncahn.presets import make_preset


def _write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _run(tmp_path, text, *extra):
    out = tmp_path / "out"
    code = main(["--config", _write(tmp_path, text), "--output", str(out), "--quiet", *extra])
    return code, out


def _jsonl(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


def _csv(path):
    lines = path.read_text().splitlines()
    header = [l for l in lines if l.startswith("#")]
    body = [l for l in lines if not l.startswith("#")]
    cols = body[0].split(",")
    rows = [l.split(",") for l in body[1:]]
    return header, cols, rows


# --- parsing ------------------------------------------------------------------------

def test_minimal_preset_config():
    cfg = parse_config("command = solve\npreset = quartic-zero\n")
    assert cfg.command == "solve" and cfg.preset == "quartic-zero"
    assert cfg.emit == ("csv", "jsonl") and cfg.seed == 0 and cfg.snapshots == 9
    spec = cfg.build_spec()
    assert spec.eps == 0.1 and spec.delta == 0.01 and spec.n_steps == 100


def test_dual_regularization_error():
    with pytest.raises(ConfigError, match="at least one regularization"):
        parse_config("command = solve\npreset = quartic-zero\n[problem]\neps = 0\ndelta = 0\n")


def test_unknown_key_reports_line():
    text = "command = solve\npreset = quartic-zero\n\n[problem]\nepsilonn = 0.1\n"
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.line == 5 and "epsilonn" in str(info.value)


@pytest.mark.parametrize("text,line", [
    ("command = solve\npreset = quartic-zero\n[nope]\n", 3),
    ("command = solve\npreset = quartic-zero\nemit = csv,xml\n", 3),
    ("command = solve\npreset = quartic-zero\nseed = -1\n", 3),
    ("command = solve\ncommand = solve\npreset = quartic-zero\n", 2),
    ("command = fly\npreset = quartic-zero\n", 1),
    ("command = solve\npreset = quartic-zero\njust words\n", 3),
    ("command = solve\n", None),
    ("preset = quartic-zero\n", None),
])
def test_config_errors(text, line):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.line == line


def test_full_problem_block_without_preset():
    text = """
command = solve
[problem]
L = 2
N = 32
eps = 0.5
delta = 0.1
lam = 1e-4
tau = 1e-3
T = 0.005
graph = piecewise_linear(breakpoints=-1;1, slopes=0.5;0;2)
potential = logarithmic(c=1, c0=2)
forcing = wave(amplitude=0.2, mode=2, omega=3)
u0 = cosine(amplitude=0.5, mode=1, shift=0.1)
"""
    spec = parse_config(text).build_spec()
    assert spec.grid.L == 2.0 and spec.grid.N == 32 and spec.n_steps == 5
    assert spec.graph.kind == "piecewise_linear" and spec.potential.kind == "logarithmic"
    assert spec.u0.max() == pytest.approx(0.6, abs=1e-2)
    # a missing required key is an error without a preset
    with pytest.raises(ConfigError, match="T"):
        parse_config(text.replace("T = 0.005\n", ""))


def test_preset_overrides_and_flags():
    cfg = parse_config("command = solve\npreset = quartic-zero\n[problem]\nT = 0.01\n",
                       {"command": "diagnose", "seed": "7", "emit": "csv"})
    assert cfg.command == "diagnose" and cfg.seed == 7 and cfg.emit == ("csv",)
    assert cfg.build_spec().n_steps == 10


def test_parse_call():
    assert parse_call("sign") == ("sign", {})
    assert parse_call("power(p=3, coeff=2)") == ("power", {"p": 3.0, "coeff": 2.0})
    assert parse_call("polynomial(coeffs=0;0;-1;0;1)") == (
        "polynomial", {"coeffs": (0.0, 0.0, -1.0, 0.0, 1.0)})
    with pytest.raises(ValueError):
        parse_call("power(p)")


# --- runs ------------------------------------------------------------------------

def test_solve_stationary(tmp_path):
    code, out = _run(tmp_path, "command = solve\npreset = stationary\n")
    assert code == 0
    header, cols, rows = _csv(out / "trajectory.csv")
    assert len(rows) == 9 and [int(r[0]) for r in rows][0] == 1 and int(rows[-1][0]) == 100
    data = np.array([[float(v) for v in r] for r in rows])
    u = data[:, 2:2 + 64]
    assert np.ptp(u) == 0.0
    with np.load(out / "trajectory.npz") as z:
        assert np.max(np.abs(z["w"])) <= 1e-8
    xi = data[:, 2 + 128:]
    assert np.max(np.abs(xi)) <= 1e-8 / make_preset("stationary").lam


def test_header_echoes_parameters(tmp_path):
    code, out = _run(tmp_path, "command = solve\npreset = logwell-sign\n[problem]\nT = 0.005\n")
    assert code == 0
    header, cols, _ = _csv(out / "series.csv")
    keys = {h[2:].split(" = ")[0] for h in header}
    assert {"command", "seed", "eps", "delta", "lam", "tau", "T", "L", "N", "a0", "b0",
            "graph", "potential", "forcing"} <= keys
    assert "# potential = logarithmic(c=1.0, c0=2.0, K=2.0)" in header
    assert cols == ["t", "F", "D_grad", "D_visc", "D_beta", "S", "C", "mass", "flux_left",
                    "flux_right", "newton_iters", "residual"]


def test_jsonl_key_order(tmp_path):
    code, out = _run(tmp_path, "command = solve\npreset = quartic-power\n[problem]\nT = 0.005\n")
    assert code == 0
    recs = _jsonl(out / "solve.jsonl")
    assert recs[0]["record"] == "header" and len(recs) == 1 + 5 + 1
    for r in recs:
        assert tuple(r) == JSONL_KEYS[r["record"]]
    assert recs[-1]["values"]["flux_identity"] <= 1e-12


def test_emit_subset(tmp_path):
    code, out = _run(tmp_path, "command = solve\npreset = quartic-zero\n[problem]\nT = 0.002\n",
                     "--emit", "jsonl")
    assert code == 0 and not list(out.glob("*.csv")) and (out / "solve.jsonl").exists()


def test_solver_failure_exit_2(tmp_path, monkeypatch):
    monkeypatch.setattr(stepper, "NEWTON_MAXITER", 0)
    monkeypatch.setattr(stepper, "FIXED_POINT_MAXITER", 0)
    code, out = _run(tmp_path, "command = solve\npreset = quartic-zero\n[problem]\nT = 0.002\n")
    assert code == 2
    recs = _jsonl(out / "solve.failure.jsonl")
    assert recs[-1]["record"] == "failure" and recs[-1]["step"] == 1


def test_nan_output_exit_2(tmp_path, monkeypatch):
    real = stepper.solve

    def poisoned(spec, warm_start=True):
        traj = real(spec, warm_start)
        traj.mu[0, 3] = np.nan
        return traj

    monkeypatch.setattr(stepper, "solve", poisoned)
    code, out = _run(tmp_path, "command = solve\npreset = quartic-zero\n[problem]\nT = 0.002\n")
    assert code == 2
    assert (out / "solve.failure.jsonl").exists() and not (out / "series.csv").exists()


def test_diagnose_fixture_and_corruption(tmp_path):
    base = "command = solve\npreset = quartic-zero\n[problem]\nT = 0.01\n"
    code, out = _run(tmp_path, base)
    assert code == 0
    npz = out / "trajectory.npz"
    diag = base.replace("solve", "diagnose") + f"[diagnose]\ntrajectory = {npz}\n"
    out2 = tmp_path / "diag"
    assert main(["--config", _write(tmp_path, diag, "d.cfg"), "--output", str(out2), "--quiet"]) == 0
    assert all(r["passed"] for r in _jsonl(out2 / "diagnose.jsonl") if r["record"] == "check")

    with np.load(npz) as z:
        arrays = {k: np.array(z[k]) for k in z.files}
    arrays["u"][4, 10] += 1e-3
    bad = tmp_path / "bad.npz"
    np.savez(bad, **arrays)
    diag_bad = diag.replace(str(npz), str(bad))
    out3 = tmp_path / "diag_bad"
    assert main(["--config", _write(tmp_path, diag_bad, "b.cfg"), "--output", str(out3), "--quiet"]) == 3
    failed = {r["name"] for r in _jsonl(out3 / "diagnose.jsonl")
              if r["record"] == "check" and not r["passed"]}
    assert "update_consistency" in failed

    # a fixture from a different horizon does not fit the configured problem
    diag_mismatch = diag.replace("T = 0.01", "T = 0.02")
    assert main(["--config", _write(tmp_path, diag_mismatch, "m.cfg"), "--output",
                 str(tmp_path / "m"), "--quiet"]) == 1


def test_missing_config_file(tmp_path):
    assert main(["--config", str(tmp_path / "absent.cfg"), "--quiet"]) == 1


def test_sweep_delta_reports_slope(tmp_path):
    code, out = _run(tmp_path, "command = sweep-delta\npreset = logwell-sign\n")
    assert code == 0
    recs = _jsonl(out / "sweep-delta.jsonl")
    points = [r for r in recs if r["record"] == "point"]
    assert [p["value"] for p in points] == [1e-2, 1e-3, 1e-4, 1e-5]
    summary = recs[-1]
    assert summary["values"]["slope"] >= 0.2 and summary["values"]["bound_holds"]
    _, cols, rows = _csv(out / "sweep_delta.csv")
    assert cols[:4] == ["value", "error", "err_mu", "err_u"] and len(rows) == 4


def test_sweep_config_error_is_exit_1(tmp_path):
    code, _ = _run(tmp_path, "command = sweep-eps\npreset = quartic-power\n"
                             "[sweep]\nvalues = 1e-3, 1e-2, 1e-1\n")
    assert code == 1


def test_probe_dependence(tmp_path):
    code, out = _run(tmp_path, "command = probe-dependence\npreset = quartic-zero\n"
                               "[problem]\nT = 0.01\n[sweep]\nscales = 1e-1, 1e-2, 1e-3\n")
    assert code == 0
    _, cols, rows = _csv(out / "dependence.csv")
    assert cols == ["eta", "lhs", "rhs", "ratio"] and len(rows) == 3
    assert _jsonl(out / "probe-dependence.jsonl")[-1]["values"]["spread"] <= 10


def test_check_graphs_seeded(tmp_path):
    text = "command = check-graphs\n[graphs]\nsamples = 20\n"
    outs = []
    for seed in ("1", "1", "2"):
        out = tmp_path / f"g{len(outs)}"
        code = main(["--config", _write(tmp_path, text), "--output", str(out), "--seed", seed,
                     "--quiet"])
        assert code == 0
        outs.append((out / "graphs.csv").read_bytes())
    assert outs[0] == outs[1] and outs[0] != outs[2]


def test_num_formatting():
    assert cli._num(0.1) == "0.1" and cli._num(3) == "3" and cli._num(True) == "true"
    with pytest.raises(cli.NonFiniteOutput):
        cli._num(float("inf"))


def test_prepare_data_flag(tmp_path):
    cfg = parse_config("command = sweep-delta\npreset = logwell-sign\n[sweep]\nprepare_data = false\n")
    assert cfg.sweep["prepare_data"] is False
    with pytest.raises(ConfigError) as info:
        parse_config("command = sweep-delta\npreset = logwell-sign\n[sweep]\nprepare_data = maybe\n")
    assert info.value.line == 4
    code, out = _run(tmp_path, "command = sweep-delta\npreset = logwell-sign\n[problem]\nT = 0.02\n"
                               "[sweep]\nvalues = 1e-2, 1e-3, 1e-4\nprepare_data = false\n")
    assert code == 0
    points = [r for r in _jsonl(out / "sweep-delta.jsonl") if r["record"] == "point"]
    assert all(p["extra"]["data_u0"] == 0.0 for p in points)
    assert "# prepare_data = False" in (out / "sweep_delta.csv").read_text()
