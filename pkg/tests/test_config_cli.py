import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mhd1d.cli import load_config, main
from mhd1d.config import (
    SCENARIOS,
    ConfigError,
    RunConfig,
    build_initial,
    emit_config,
    parse_config,
    parse_init,
    preset,
)
from mhd1d.records import CSV_COLUMNS
from mhd1d.scenarios import EXIT_ASSERT, EXIT_BLOWUP, EXIT_CONFIG, EXIT_OK, clm_exact, run_scenario, sweep
from mhd1d.spectral import GridSpec

SMALL = "scenario = q0_stability\nN = 64\nK = 12\ndt = 0.01\nT = 1\noutput_stride = 5\nfit_t0 = 0\n"


def small(tmp_path, text=SMALL, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


# --- config ----------------------------------------------------------------------


def test_presets_exist():
    for name in SCENARIOS:
        assert preset(name).scenario == name
    with pytest.raises(ConfigError):
        preset("nope")


def test_parse_config_comments_and_overrides():
    cfg = parse_config("scenario = qpos_stability  # comment\n\n# only a comment\nN = 128\n", {"seed": 7})
    assert cfg.q == 0.1 and cfg.p == 0.9 and cfg.N == 128 and cfg.seed == 7


@pytest.mark.parametrize("text", ["N = abc\n", "bogus = 1\n", "no equals sign\n", "dt = nan\n", "normalize = maybe\n"])
def test_parse_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


@given(
    st.sampled_from(SCENARIOS),
    st.integers(16, 4096),
    st.floats(0, 0.24),
    st.floats(1e-6, 1.0),
    st.booleans(),
    st.integers(0, 2**31),
)
def test_config_roundtrip(scenario, N, q, eps, normalize, seed):
    cfg = preset(scenario).replace(N=N, q=q, eps=eps, normalize=normalize, seed=seed)
    assert parse_config(emit_config(cfg)) == cfg


def test_width_list():
    assert RunConfig().width_list == [0.2, 0.1, 0.05, 0.0]


def test_parse_init_examples():
    assert parse_init("es1=1, ec0=-0.5, sin3=2, const=1") == [
        ("es", 1, 1.0), ("ec", 0, -0.5), ("sin", 3, 2.0), ("const", 0, 1.0)
    ]
    for bad in ["es1", "foo=1", "sin0=1", "es=1", "const2=1", "es1=x"]:
        with pytest.raises(ConfigError):
            parse_init(bad)


def test_build_initial_examples():
    g = GridSpec(64)
    f = build_initial("sin1=-1, cos2=0.05", g)
    assert np.max(np.abs(f.values - (-np.sin(g.theta) + 0.05 * np.cos(2 * g.theta)))) < 1e-15
    h = build_initial("es1=3, ec1=4", g, normalize=True, mean_zero=True)
    assert abs(h.coeffs[0]) < 1e-15 and abs(h.values[0]) < 1e-14
    from mhd1d.diagnostics import ecoeffs

    _, _, s, c = ecoeffs(h)
    assert np.hypot(np.linalg.norm(s), np.linalg.norm(c)) == pytest.approx(1.0)
    with pytest.raises(ConfigError):
        build_initial("sin40=1", g)
    with pytest.raises(ConfigError):
        build_initial("es30=1", g)


def test_load_config_sources(tmp_path):
    assert load_config("clm_validation").a == 0.0
    assert load_config(small(tmp_path)).N == 64
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.cfg"))


def test_clm_exact_formula():
    th = np.linspace(-3, 3, 7)
    assert np.allclose(clm_exact(th, 0.0), np.cos(th))


# --- scenarios and CLI -----------------------------------------------------------------


def test_simulate_writes_outputs(tmp_path, capsys):
    out = tmp_path / "o"
    code = main(["simulate", small(tmp_path), "--out", str(out)])
    text = capsys.readouterr().out
    assert code in (EXIT_OK, EXIT_ASSERT)
    assert text.splitlines()[0].startswith("status,")
    assert any(line.startswith("assert,") for line in text.splitlines())
    for name in ("record.csv", "record_extended.csv", "plot_data.dat", "summary.json",
                 "snapshot_plus.csv", "snapshot_minus.csv", "energy.png"):
        assert (out / name).is_file(), name
    assert (out / "record.csv").read_text().splitlines()[0] == ",".join(CSV_COLUMNS)
    json.loads((out / "summary.json").read_text())


def test_simulate_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    cfg = small(tmp_path)
    main(["simulate", cfg, "--out", str(a), "--quiet"])
    main(["simulate", cfg, "--out", str(b), "--quiet"])
    assert (a / "record.csv").read_bytes() == (b / "record.csv").read_bytes()
    assert (a / "record_extended.csv").read_bytes() == (b / "record_extended.csv").read_bytes()


def test_quiet_prints_nothing(tmp_path, capsys):
    main(["simulate", small(tmp_path), "--out", str(tmp_path / "q"), "--quiet"])
    assert capsys.readouterr().out == ""


def test_audit_exit_codes(tmp_path, capsys):
    base = "scenario = operator_audit\ntrials = 5\nrayleigh_trials = 50\n"
    assert main(["audit", small(tmp_path, base), "--out", str(tmp_path / "a")]) == EXIT_OK
    assert (tmp_path / "a" / "audit.json").is_file() and (tmp_path / "a" / "matrices.json").is_file()
    assert main(["audit", small(tmp_path, base + "tol = 1e-16\n", "t.cfg"), "--out", str(tmp_path / "b")]) == EXIT_ASSERT
    assert main(["audit", small(tmp_path, base + "K = 1\n", "k.cfg"), "--out", str(tmp_path / "c")]) == EXIT_CONFIG
    capsys.readouterr()


def test_config_errors_exit_4(tmp_path, capsys):
    bad_q = SMALL.replace("q0_stability", "qpos_stability") + "q = 0.3\np = 0.7\n"
    assert main(["simulate", small(tmp_path, bad_q), "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    assert main(["simulate", small(tmp_path, "N = oops\n", "n.cfg")]) == EXIT_CONFIG
    assert main(["simulate", "not_a_scenario"]) == EXIT_CONFIG
    assert "status,config_error" in capsys.readouterr().out


def test_blowup_exit_3(tmp_path):
    text = ("scenario = custom\nformulation = physical\nclosure = fourier\nN = 64\n"
            "dt = 0.01\nT = 1\ninit_plus = cos3=1e7\ninit_minus = cos3=1e7\n")
    code, summary = run_scenario(parse_config(text), tmp_path / "b")
    assert code == EXIT_BLOWUP and summary["status"] == "blowup"
    assert summary["blowup_t"] > 0
    assert (tmp_path / "b" / "record.csv").is_file()


def test_run_scenario_config_error_is_returned():
    code, summary = run_scenario(preset("q0_stability").replace(K=1, N=64))
    assert code == EXIT_CONFIG and summary["status"] == "config_error"


def test_sweep_in_process(tmp_path, capsys):
    code = main(["sweep", small(tmp_path), "--axis", "eps", "--values", "0.01,0.02",
                 "--workers", "1", "--out", str(tmp_path / "s")])
    lines = capsys.readouterr().out.splitlines()
    assert code in (EXIT_OK, EXIT_ASSERT)
    assert lines[0].startswith("axis,value,exit_code")
    assert len(lines) == 3
    assert (tmp_path / "s" / "sweep.csv").is_file()
    assert (tmp_path / "s" / "eps_0.01").is_dir()


def test_sweep_dt_terminal_diff_and_processes(tmp_path):
    cfg = parse_config(SMALL)
    rows, text = sweep(cfg, "dt", [0.02, 0.01], tmp_path / "d", workers=2)
    assert [r["value"] for r in rows] == [0.02, 0.01]
    assert rows[1]["terminal_diff"] == 0.0
    assert 0 < rows[0]["terminal_diff"] < 1e-4


def test_sweep_q_axis_sets_p():
    rows, _ = sweep(parse_config(SMALL.replace("q0_stability", "qpos_stability")), "q", [0.05], workers=1)
    assert rows[0]["status"] != "config_error"


def test_sweep_errors(tmp_path, capsys):
    with pytest.raises(ConfigError):
        sweep(preset("q0_stability"), "a", [1.0])
    with pytest.raises(ConfigError):
        sweep(preset("q0_stability"), "q", [])
    assert main(["sweep", small(tmp_path), "--axis", "q", "--values", "x"]) == EXIT_CONFIG
    capsys.readouterr()


def test_verify_single_criterion(capsys):
    assert main(["verify", "--only", "4"]) == EXIT_OK
    out = capsys.readouterr().out.strip().splitlines()
    assert len(out) == 1 and out[0].startswith("[PASS] criterion  4")
