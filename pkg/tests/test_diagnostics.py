import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_in_Y
from mhd1d.basis import EBasisCoeffs, from_ebasis
from mhd1d.diagnostics import (
    CSV_COLUMNS,
    BootstrapParams,
    RunRecord,
    bkm_report,
    bootstrap_check,
    conserved_drift,
    conserved_report,
    default_gamma,
    energy_EH0,
    fit_decay_rate,
    h_series,
    perturbation_monitor,
    physical_monitor,
)
from mhd1d.dynamics import ModelParams, SolverState, TimeGrid, integrate
from mhd1d.records import fmt
from mhd1d.spectral import GridSpec, SpectralField

G = GridSpec(64)
seeds = st.integers(min_value=0, max_value=2**32 - 1)
ZERO = SpectralField.zeros(G)
PM = ModelParams(formulation="perturbation", closure="ebasis", K=12, eps=0.1)


def unit(family, k, K=12):
    return from_ebasis(EBasisCoeffs.unit(K, family, k), G)


def synthetic(t, E, c0=None):
    rec = RunRecord()
    for i, ti in enumerate(t):
        rec.append({"t": ti, "E_H0": E[i], "etaM_c0": 0.0 if c0 is None else c0[i]})
    return rec


# --- state readers -------------------------------------------------------------


def test_energy_examples():
    assert energy_EH0(SolverState(0.0, unit("s", 1), unit("c", 2))) == pytest.approx(math.sqrt(2))
    # Z1 and Z2 directions carry no H0 energy
    assert energy_EH0(SolverState(0.0, unit("s", 0), unit("c", 0))) < 1e-14
    assert energy_EH0(SolverState(0.0, 3 * unit("c", 4), ZERO)) == pytest.approx(3.0)


def test_conserved_report_examples():
    r = conserved_report(SolverState(0.0, unit("c", 0), unit("s", 0)))
    assert r["etaP_mean"] == pytest.approx(-2 * np.pi)
    assert abs(r["etaP_at0"]) < 1e-15 and abs(r["etaM_at0"]) < 1e-15
    assert r["etaM_dth0"] == pytest.approx(1.0)
    assert r["mean_identity_residual"] < 1e-13


@given(seeds)
def test_mean_identity_on_random_states(seed):
    rng = np.random.default_rng(seed)
    s = SolverState(0.0, random_in_Y(G, 15, rng), random_in_Y(G, 15, rng))
    assert conserved_report(s)["mean_identity_residual"] < 1e-11


def test_bkm_examples():
    omega = SpectralField.from_function(G, lambda t: -np.sin(t))
    # |sin| + |sin| + |cos| + |cos|
    assert bkm_report(SolverState(0.0, omega, omega))["E_Linf"] == pytest.approx(4.0)
    # eps = 0 perturbation state maps to the equilibrium
    assert bkm_report(SolverState(0.0, ZERO, ZERO), PM)["E_Linf"] == pytest.approx(4.0)
    assert bkm_report(SolverState(0.0, ZERO, ZERO))["E_Linf"] == 0.0


def test_default_gamma():
    s = SolverState(0.0, 2 * unit("s", 1), 3 * unit("c", 0))
    assert default_gamma(s) == pytest.approx(1.05 * 3)
    assert default_gamma(SolverState(0.0, ZERO, ZERO)) == 1.0


# --- envelope checks ------------------------------------------------------------------


def test_bootstrap_decaying_solution_passes():
    t = np.linspace(0, 20, 201)
    bp = BootstrapParams(1.0, 0.3)
    assert bootstrap_check(synthetic(t, 0.9 * np.exp(-0.35 * t)), bp) == {"pass": True, "first_violation_t": None}


def test_bootstrap_constant_gamma_first_fails_at_half_life():
    beta = 0.3
    t = np.linspace(0, 10, 1001)
    r = bootstrap_check(synthetic(t, np.ones_like(t)), BootstrapParams(1.0, beta))
    tstar = math.log(2) / (2 * beta)
    assert not r["pass"]
    assert tstar <= r["first_violation_t"] < tstar + 0.011


def test_bootstrap_twice_gamma_fails_immediately():
    t = np.linspace(0, 5, 51)
    r = bootstrap_check(synthetic(t, 2 * np.ones_like(t)), BootstrapParams(1.0, 0.3))
    assert r["first_violation_t"] == 0.0


def test_bootstrap_c0_envelope():
    t = np.linspace(0, 5, 51)
    c0 = 6 * np.exp(-0.3 * t)
    r = bootstrap_check(synthetic(t, np.zeros_like(t), c0), BootstrapParams(1.0, 0.3))
    assert r["first_violation_t"] == 0.0


def test_bootstrap_params_validation():
    for args in [(0.0, 0.1), (1.0, 0.4), (1.0, 0.0), (1.0, 0.1, "other"), (1.0, -1.0, "star_star")]:
        with pytest.raises(ValueError):
            BootstrapParams(*args)
    assert BootstrapParams.for_q(1.0, 0.1).beta == pytest.approx(0.15)
    assert BootstrapParams.for_q(1.0, 0.1).variant == "star_star"
    assert BootstrapParams.for_q(1.0, 0.0).beta == 0.35
    with pytest.raises(ValueError):
        BootstrapParams.for_q(1.0, 0.3)
    with pytest.raises(ValueError):
        bootstrap_check(RunRecord(), BootstrapParams(1.0, 0.1))


# --- fits ----------------------------------------------------------------------------


@given(st.floats(0.01, 3.0), st.floats(0.1, 10.0))
def test_fit_recovers_exact_rate(rate, amp):
    t = np.linspace(0, 20, 81)
    f = fit_decay_rate(synthetic(t, amp * np.exp(-rate * t)), window=(5.0, None))
    assert f["rate"] == pytest.approx(rate, rel=1e-9)
    assert f["r2"] == pytest.approx(1.0, abs=1e-9)
    assert f["n"] == 61 and f["window"] == [5.0, 20.0]


def test_fit_noisy_r2_below_one():
    rng = np.random.default_rng(0)
    t = np.linspace(0, 20, 81)
    f = fit_decay_rate(synthetic(t, np.exp(-0.5 * t + 0.3 * rng.standard_normal(81))))
    assert f["r2"] < 0.99


def test_fit_errors():
    t = np.linspace(0, 1, 5)
    with pytest.raises(ValueError):
        fit_decay_rate(synthetic(t, np.ones(5)), window=(0.0, None))
    t = np.linspace(0, 20, 81)
    E = np.ones(81)
    E[-1] = 0.0
    with pytest.raises(ValueError):
        fit_decay_rate(synthetic(t, E))


def test_fit_constant_series():
    t = np.linspace(0, 20, 81)
    f = fit_decay_rate(synthetic(t, np.ones(81)))
    assert f["rate"] == pytest.approx(0.0, abs=1e-15) and f["r2"] == 1.0


def test_h_series():
    rec = RunRecord()
    for ti in np.linspace(0, 10, 11):
        rec.append({"t": ti, "etaM_s0": 1 - np.exp(-ti)})
    h = h_series(rec, ModelParams(eps=0.1), tail_from=5.0)
    assert h["final"] == pytest.approx(0.1 * (1 - np.exp(-10)))
    assert h["tail_oscillation"] == pytest.approx(0.1 * (np.exp(-5) - np.exp(-10)))
    assert h["sup_abs"] == h["final"]
    with pytest.raises(ValueError):
        h_series(rec)


# --- monitors ----------------------------------------------------------------------------


def test_perturbation_monitor_is_pure_and_complete():
    rng = np.random.default_rng(2)
    s = SolverState(0.0, random_in_Y(G, 10, rng), random_in_Y(G, 10, rng))
    before = s.as_array().copy()
    row = perturbation_monitor(s, PM)
    assert np.array_equal(s.as_array(), before)
    assert row == perturbation_monitor(s, PM)
    assert set(CSV_COLUMNS) - {"t", "bkm_int"} <= set(row)
    assert row["h"] == pytest.approx(0.1 * row["etaM_s0"])


def test_boundary_functionals_match_quadratures():
    # G1 = sum 2 s_k/(k(k+1)) is the slope at 0 of the H0 part of eta+
    rng = np.random.default_rng(4)
    K = 12
    c = EBasisCoeffs(K, 0.0, 0.0, rng.standard_normal(K), rng.standard_normal(K))
    f = from_ebasis(c, G)
    row = perturbation_monitor(SolverState(0.0, f, ZERO), PM)
    from mhd1d.spectral import hilbert, point_eval

    assert row["G1"] == pytest.approx(2 * point_eval(hilbert(f), 0.0), abs=1e-12)


def test_physical_monitor_at_equilibrium():
    omega = SpectralField.from_function(G, lambda t: -np.sin(t))
    row = physical_monitor(SolverState(0.0, omega, omega), ModelParams())
    assert row["diff_linf"] == 0.0 and row["dist_equilibrium"] < 1e-15
    assert row["bkm"] == pytest.approx(4.0)


def test_conserved_drift_from_run():
    rng = np.random.default_rng(5)
    s = SolverState(0.0, random_in_Y(G, 6, rng), random_in_Y(G, 6, rng))
    rec = integrate(s, PM, TimeGrid(0.01, 0.5, 10), [perturbation_monitor])
    d = conserved_drift(rec)
    assert set(d) == {"etaP_mean", "etaP_at0", "etaM_at0", "etaP_s0", "etaM_s0"}
    assert max(d.values()) < 1e-12
    assert "etaM_s0" not in conserved_drift(rec, q=0.1)


# --- records -------------------------------------------------------------------------------


def test_csv_column_order_and_roundtrip():
    rng = np.random.default_rng(6)
    s = SolverState(0.0, random_in_Y(G, 6, rng), random_in_Y(G, 6, rng))
    rec = integrate(s, PM, TimeGrid(0.01, 0.2, 5), [perturbation_monitor])
    text = rec.to_csv()
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    back = RunRecord.from_csv(text)
    for name in CSV_COLUMNS:
        assert np.array_equal(back.column(name), rec.column(name))
    ext = RunRecord.from_csv(rec.extended_csv())
    assert np.array_equal(ext.column("G3"), rec.column("G3"))


def test_record_rejects_non_increasing_time():
    rec = RunRecord()
    rec.append({"t": 0.0})
    with pytest.raises(ValueError):
        rec.append({"t": 0.0})


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_roundtrips(x):
    assert float(fmt(x)) == x


def test_fmt_specials():
    assert fmt(float("nan")) == "nan" and fmt(float("-inf")) == "-inf"
    assert fmt(True) == "true" and fmt(3) == "3"
