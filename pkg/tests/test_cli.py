"""Tests for configuration layering and the CSV command-line interface."""

import io
import contextlib

import numpy as np
import pytest

from cavsqueeze.cli import main
from cavsqueeze.config import ConfigError, DEFAULTS, load_config


def run_cli(args):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        rc = main(list(args))
    return rc, out.getvalue(), err.getvalue()


# === configuration layering ===


def test_defaults_without_file_or_flags():
    cfg = load_config(None, [])
    assert cfg["model.C"] == 220.0
    assert cfg["model.delta"] == -20.0
    assert cfg["model.kappa_hz"] == 2.5e6
    assert cfg["model.gamma_hz"] == 2.6e6
    assert cfg["detection.eta"] == 0.9
    assert cfg["scan.omega_hz"] == 5e6


def test_empty_file_yields_defaults(tmp_path):
    path = tmp_path / "empty.cfg"
    path.write_text("")
    cfg = load_config(str(path), [])
    assert cfg.values == {k: d for k, (d, _) in DEFAULTS.items()}


def test_file_then_flag_precedence(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(
        "# release settings\n"
        "model.C = 50\n"
        "model.delta = -20  # trailing comment\n"
        "scan.drive_Y = 900\n"
    )
    cfg = load_config(str(path), ["--model.delta=-25"])
    assert cfg["model.C"] == 50.0
    assert cfg["model.delta"] == -25.0  # flag wins over file
    assert cfg["scan.drive_Y"] == 900.0
    assert cfg["model.theta"] == 0.0   # untouched default


def test_all_file_errors_reported_with_lines(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text(
        "model.C = -1\n"
        "nonsense_line\n"
        "weird.key = 3\n"
        "model.C = 4\n"
        "scan.rel_noise = 2.0\n"
    )
    with pytest.raises(ConfigError) as exc:
        load_config(str(path), [])
    messages = exc.value.errors
    assert len(messages) == 5
    assert any("model.C" in m and ":1:" in m for m in messages)
    assert any(":2:" in m for m in messages)
    assert any("unknown key" in m and "weird.key" in m for m in messages)
    assert any("duplicate" in m and ":4:" in m for m in messages)
    assert any("scan.rel_noise" in m and ":5:" in m for m in messages)


def test_flag_errors_name_the_key():
    with pytest.raises(ConfigError) as exc:
        load_config(None, ["--model.C=oops", "--no.such=1", "stray"])
    joined = "\n".join(exc.value.errors)
    assert "--model.C" in joined
    assert "unknown key" in joined
    assert "stray" in joined


def test_integer_keys_reject_fractions():
    with pytest.raises(ConfigError):
        load_config(None, ["--scan.n_omega=2.5"])
    cfg = load_config(None, ["--scan.n_omega=11", "--cloud.mc_samples=2e4"])
    assert cfg["scan.n_omega"] == 11
    assert cfg["cloud.mc_samples"] == 20000


def test_missing_config_file_is_an_error():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/run.cfg", [])


def test_typed_views_construct_model_objects():
    cfg = load_config(None, ["--model.transverse=gaussian", "--model.gaussian_bins=8"])
    p = cfg.model_params()
    assert type(p.transverse).__name__ == "GaussianBins"
    assert p.transverse.m == 8
    cp = cfg.cloud_params()
    assert cp.c0 == 220.0
    chain = cfg.detection()
    assert chain.eta == 0.9


# === subcommands ===


def test_steady_uncoupled_cavity_row():
    rc, out, _ = run_cli(["steady", "--model.C=0", "--scan.drive_Y=5", "--model.theta=2"])
    assert rc == 0
    lines = out.strip().split("\n")
    assert lines[0] == "X,Y,branch,stable,slope"
    fields = lines[1].split(",")
    assert float(fields[0]) == 1.0
    assert float(fields[1]) == 5.0
    assert fields[2] == "MONOSTABLE"
    assert fields[3] == "true"


def test_steady_reports_all_roots_sorted():
    rc, out, _ = run_cli(
        ["steady", "--model.C=50", "--model.delta=-20", "--model.theta=-1.5",
         "--scan.drive_Y=900"]
    )
    assert rc == 0
    rows = [line.split(",") for line in out.strip().split("\n")[1:]]
    assert [r[2] for r in rows] == ["LOWER", "MIDDLE", "UPPER"]
    xs = [float(r[0]) for r in rows]
    assert xs == sorted(xs)


def test_turning_lists_both_folds():
    rc, out, _ = run_cli(["turning", "--model.C=8", "--model.delta=0", "--model.theta=0"])
    assert rc == 0
    rows = [line.split(",") for line in out.strip().split("\n")[1:]]
    assert len(rows) == 2
    xs = sorted(float(r[0]) for r in rows)
    assert abs(xs[0] - (7.0 - np.sqrt(32.0))) < 1e-6
    assert abs(xs[1] - (7.0 + np.sqrt(32.0))) < 1e-6


def test_spectrum_of_empty_cavity_is_shot_noise():
    rc, out, _ = run_cli(
        ["spectrum", "--model.C=0", "--scan.n_omega=5", "--detection.eta=1.0"]
    )
    assert rc == 0
    lines = out.strip().split("\n")
    assert lines[0] == "omega_hz,v11,v12,v22,s_min,s_max,theta_min"
    for line in lines[1:]:
        _, v11, v12, v22, s_min, s_max, _ = (float(f) for f in line.split(","))
        assert abs(v11 - 1.0) < 1e-12 and abs(v22 - 1.0) < 1e-12
        assert abs(v12) < 1e-12
        assert abs(s_min - 1.0) < 1e-12 and abs(s_max - 1.0) < 1e-12


def test_validation_failures_exit_one():
    rc, _, err = run_cli(["steady", "--model.C=-1"])
    assert rc == 1 and "model.C" in err
    rc, _, err = run_cli(["steady", "--model.unknown=1"])
    assert rc == 1 and "unknown key" in err
    rc, _, err = run_cli(["piezo", "--scan.duration_s=0.001"])  # rate left at zero
    assert rc == 1 and "theta_rate" in err
    rc, _, err = run_cli(["fitc", "/no/such/file.csv"])
    assert rc == 1
    rc, _, err = run_cli(["release", "--config=/no/such/file.cfg"])
    assert rc == 1 and "config" in err


def test_runtime_failures_exit_two():
    rc, _, err = run_cli(
        ["oracle", "--model.C=0.2", "--model.n_atoms=1", "--scan.drive_Y=4000",
         "--scan.n_omega=2"]
    )
    assert rc == 2 and "truncated" in err


def test_fitc_roundtrip_through_files(tmp_path):
    from cavsqueeze import CloudParams, cooperativity_decay

    cp = CloudParams(sigma_r_m=4e-3, temp_k=5e-3, c0=220.0)
    data = tmp_path / "decay.csv"
    times = np.linspace(0.0, 0.06, 14)
    lines = ["t_s,c"] + [
        f"{float(t)!r},{float(cooperativity_decay(float(t), cp))!r}" for t in times
    ]
    data.write_text("\n".join(lines) + "\n")
    out_path = tmp_path / "fit.csv"
    rc, _, _ = run_cli(["fitc", str(data), f"--output.path={out_path}"])
    assert rc == 0
    header, row = out_path.read_text().strip().split("\n")
    cols = dict(zip(header.split(","), row.split(",")))
    assert abs(float(cols["c0"]) - 220.0) / 220.0 < 1e-6
    assert abs(float(cols["sigma_r_m"]) - 4e-3) / 4e-3 < 1e-6
    assert abs(float(cols["temp_k"]) - 5e-3) / 5e-3 < 1e-6
    assert cols["converged"] == "true"


def test_mc_cloud_matches_model_column(tmp_path):
    rc, out, _ = run_cli(
        ["mc-cloud", "--cloud.mc_samples=200000", "--cloud.n_times=5",
         "--cloud.t_max_s=0.02"]
    )
    assert rc == 0
    for line in out.strip().split("\n")[1:]:
        _, c_hat, c_model = (float(f) for f in line.split(","))
        assert abs(c_hat - c_model) / c_model < 0.02


@pytest.mark.filterwarnings("ignore:scan never crosses")
def test_reruns_are_byte_identical(tmp_path):
    args = [
        "release", "--scan.duration_s=0.001", "--cloud.c0=220",
        "--scan.drive_Y=800", "--scan.theta0=-7.5",
    ]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    rc1, _, _ = run_cli(args + [f"--output.path={a}"])
    rc2, _, _ = run_cli(args + [f"--output.path={b}"])
    assert rc1 == 0 and rc2 == 0
    assert a.read_bytes() == b.read_bytes()
    header = a.read_text().split("\n", 1)[0]
    assert header == "t_s,c,theta_eff,X,branch,s_meas,s_min,s_max,shot_ref"

    spec_args = ["spectrum", "--model.C=220", "--scan.drive_Y=800", "--scan.n_omega=7"]
    s1, s2 = tmp_path / "s1.csv", tmp_path / "s2.csv"
    assert run_cli(spec_args + [f"--output.path={s1}"])[0] == 0
    assert run_cli(spec_args + [f"--output.path={s2}"])[0] == 0
    assert s1.read_bytes() == s2.read_bytes()

    mc_args = ["mc-cloud", "--cloud.mc_samples=50000", "--cloud.n_times=3"]
    m1, m2 = tmp_path / "m1.csv", tmp_path / "m2.csv"
    assert run_cli(mc_args + [f"--output.path={m1}"])[0] == 0
    assert run_cli(mc_args + [f"--output.path={m2}"])[0] == 0
    assert m1.read_bytes() == m2.read_bytes()


def test_different_seed_changes_the_trace(tmp_path):
    base = ["release", "--scan.duration_s=0.0005"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    with pytest.warns(UserWarning):
        assert main(base + [f"--output.path={a}"]) == 0
    with pytest.warns(UserWarning):
        assert main(base + ["--scan.seed=99", f"--output.path={b}"]) == 0
    assert a.read_bytes() != b.read_bytes()


def test_floats_roundtrip_exactly():
    rc, out, _ = run_cli(["steady", "--model.C=220", "--model.delta=-20",
                          "--scan.drive_Y=123.456"])
    assert rc == 0
    x, y = (float(f) for f in out.strip().split("\n")[1].split(",")[:2])
    assert y == 123.456  # full precision survives the CSV
    from cavsqueeze import ModelParams, state_equation

    assert abs(state_equation(x, ModelParams(c=220.0, delta=-20.0)) - y) < 1e-9 * y
