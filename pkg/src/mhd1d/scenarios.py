"""
Scenario runners behind the CLI. Each returns ``(exit_code, summary)`` and,
when given an output directory, writes the record CSVs, a JSON summary, a
plot-data file and PNG figures there.

Exit codes: 0 all assertions pass, 2 assertion failure, 3 blow-up signal,
4 configuration error.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import plotting
from .config import ConfigError, RunConfig, build_initial
from .diagnostics import (
    BootstrapParams,
    bootstrap_check,
    conserved_drift,
    default_gamma,
    fit_decay_rate,
    h_series,
    perturbation_monitor,
    physical_monitor,
)
from .dynamics import (
    BlowUpError,
    ModelParams,
    SolverState,
    TimeGrid,
    integrate,
    mollifier_multiplier,
)
from .operators import (
    OperatorTag,
    apply,
    assemble_matrix,
    matrix_vs_spectral_audit,
    q_contraction_sweep,
    rayleigh_sweep,
)
from .records import fmt
from .spectral import GridSpec, SpectralField

__all__ = [
    "EXIT_OK",
    "EXIT_ASSERT",
    "EXIT_BLOWUP",
    "EXIT_CONFIG",
    "run_scenario",
    "operator_audit",
    "sweep",
    "clm_exact",
    "AUDIT_TAGS",
]

EXIT_OK, EXIT_ASSERT, EXIT_BLOWUP, EXIT_CONFIG = 0, 2, 3, 4

AUDIT_TAGS = ("L", "B", "Q", "Lplus", "Lminus(0.0)", "Lminus(0.1)", "Lminus(0.2)")


def _check(name: str, value, threshold, ok: bool) -> dict:
    return {"name": name, "value": value, "threshold": threshold, "pass": bool(ok)}


def _json_default(x):
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(type(x))


def _clean(obj):
    """Floats rounded through 17 significant digits so the JSON is stable."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else fmt(v)
    return obj


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_clean(obj), indent=2, default=_json_default) + "\n")


def _snapshot_csv(grid: GridSpec, field: SpectralField) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["theta", "value"])
    for th, v in zip(grid.theta, field.values):
        w.writerow([fmt(th), fmt(v)])
    return buf.getvalue()


def _model(cfg: RunConfig, **changes) -> ModelParams:
    kw = dict(
        a=cfg.a, p=cfg.p, q=cfg.q, eps=cfg.eps, formulation=cfg.formulation,
        closure=cfg.closure, K=cfg.K, moll_width=cfg.moll_width, mollifier=cfg.mollifier,
    )
    kw.update(changes)
    try:
        return ModelParams(**kw)
    except ValueError as e:
        raise ConfigError(str(e)) from None


def _grid(cfg: RunConfig) -> GridSpec:
    try:
        return GridSpec(cfg.N)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None


def _timegrid(cfg: RunConfig) -> TimeGrid:
    try:
        return TimeGrid(cfg.dt, cfg.T, cfg.output_stride)
    except ValueError as e:
        raise ConfigError(str(e)) from None


def _emit_record(out: Path | None, rec, summary: dict, figures: list) -> None:
    if out is None:
        return
    out.mkdir(parents=True, exist_ok=True)
    (out / "record.csv").write_text(rec.to_csv())
    (out / "record_extended.csv").write_text(rec.extended_csv())
    plotting.write_plot_data(rec, out / "plot_data.dat")
    for kind in figures:
        plotting.record_figure(rec, out / f"{kind}.png", kind)
    if rec.final_state is not None:
        g = rec.final_state.grid
        (out / "snapshot_plus.csv").write_text(_snapshot_csv(g, rec.final_state.plus))
        (out / "snapshot_minus.csv").write_text(_snapshot_csv(g, rec.final_state.minus))
    _write_json(out / "summary.json", summary)


def _finish(summary: dict, checks: list) -> tuple:
    summary["assertions"] = checks
    ok = all(c["pass"] for c in checks)
    summary["status"] = "pass" if ok else "fail"
    return (EXIT_OK if ok else EXIT_ASSERT), summary


def _params(cfg: RunConfig) -> dict:
    return {k: getattr(cfg, k) for k in cfg.__dataclass_fields__ if k != "out_dir"}


# ---------------------------------------------------------------------------
# stability runs


def _stability(cfg: RunConfig, out: Path | None) -> tuple:
    positive = cfg.scenario == "qpos_stability"
    if cfg.formulation != "perturbation":
        raise ConfigError("stability scenarios use the perturbation formulation")
    m = _model(cfg)
    try:
        m.check_stability_regime(q_positive=positive if cfg.scenario != "custom" else None)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    grid = _grid(cfg)
    tg = _timegrid(cfg)
    plus = build_initial(cfg.init_plus, grid, cfg.normalize, cfg.mean_zero)
    minus = build_initial(cfg.init_minus, grid, cfg.normalize, cfg.mean_zero)
    for name, f in (("init_plus", plus), ("init_minus", minus)):
        if abs(f.values[0]) > 1e-10:
            raise ConfigError(f"{name} does not vanish at theta = 0 (value {f.values[0]:.3g})")
    s0 = SolverState(0.0, plus, minus)
    gamma = cfg.Gamma if cfg.Gamma > 0 else default_gamma(s0)
    beta = cfg.beta if cfg.beta > 0 else (0.35 if m.q == 0 else m.delta / 4.0)
    try:
        bp = BootstrapParams(gamma, beta, "star" if m.q == 0 else "star_star")
    except ValueError as e:
        raise ConfigError(str(e)) from None

    summary = {"scenario": cfg.scenario, "params": _params(cfg), "Gamma": gamma, "beta": beta}
    try:
        rec = integrate(s0, m, tg, [perturbation_monitor])
    except BlowUpError as e:
        summary.update(status="blowup", blowup_t=e.t, bkm_integral=e.bkm_integral, reason=e.reason)
        _emit_record(out, e.record, summary, ["energy"])
        return EXIT_BLOWUP, summary

    checks = []
    try:
        fit = fit_decay_rate(rec, "E_H0", (cfg.fit_t0, cfg.T))
    except ValueError as e:
        fit = {"error": str(e), "rate": float("nan"), "r2": float("nan")}
    boot = bootstrap_check(rec, bp)
    drift = conserved_drift(rec, m.q)
    hs = h_series(rec, m, cfg.tail_from if cfg.tail_from > 0 else None)
    summary.update(
        fits={"E_H0": fit},
        bootstrap=dict(boot, Gamma=gamma, beta=beta, variant=bp.variant),
        conserved_drift=drift,
        h={k: hs[k] for k in ("sup_abs", "final", "tail_oscillation")},
    )
    checks.append(_check("decay_rate", fit["rate"], beta, fit["rate"] >= beta))
    if not positive:
        checks.append(_check("decay_fit_r2", fit["r2"], cfg.min_r2, fit["r2"] > cfg.min_r2))
    checks.append(_check("bootstrap", boot["first_violation_t"], None, boot["pass"]))
    for name, v in drift.items():
        checks.append(_check(f"drift_{name}", v, cfg.drift_tol, v < cfg.drift_tol))
    if positive:
        checks.append(
            _check("h_tail_oscillation", hs["tail_oscillation"], cfg.tail_tol, hs["tail_oscillation"] < cfg.tail_tol)
        )
    code, summary = _finish(summary, checks)
    _emit_record(out, rec, summary, ["energy", "h", "conserved"])
    return code, summary


# ---------------------------------------------------------------------------
# physical-form validations


def clm_exact(theta: np.ndarray, t: float) -> np.ndarray:
    """CLM solution from cos(theta): Re z/(1 + (i t/2) z), z = e^{i theta}."""
    z = np.exp(1j * np.asarray(theta))
    return (z / (1.0 + 0.5j * t * z)).real


def _clm(cfg: RunConfig, out: Path | None) -> tuple:
    if not (cfg.a == 0 and cfg.p == 1 and cfg.q == 0) or cfg.formulation != "physical":
        raise ConfigError("clm_validation needs a=0, p=1, q=0 and the physical formulation")
    grid = _grid(cfg)
    tg = _timegrid(cfg)
    m = _model(cfg)
    w0 = build_initial(cfg.init_plus, grid)
    th = grid.theta

    def clm_monitor(s, _m):
        return {
            "clm_err": float(np.max(np.abs(s.plus.values - clm_exact(th, s.t)))),
            "w_at0": float(s.plus.values[0]),
            "bkm": physical_monitor(s, _m)["bkm"],
        }

    summary = {"scenario": cfg.scenario, "params": _params(cfg)}
    try:
        rec = integrate(SolverState(0.0, w0, w0), m, tg, [clm_monitor])
    except BlowUpError as e:
        summary.update(status="blowup", blowup_t=e.t, bkm_integral=e.bkm_integral, reason=e.reason)
        _emit_record(out, e.record, summary, [])
        return EXIT_BLOWUP, summary
    t = rec.column("t")
    checks = []
    i1 = np.flatnonzero(np.abs(t - 1.0) < 1e-9)
    if i1.size:
        err = float(rec.column("clm_err")[i1[0]])
        summary["linf_error_t1"] = err
        checks.append(_check("linf_error_t1", err, 1e-6, err < 1e-6))
    i2 = np.flatnonzero(np.abs(t - 2.0) < 1e-9)
    if i2.size:
        val = float(rec.column("w_at0")[i2[0]])
        summary["omega_0_t2"] = val
        checks.append(_check("omega_0_t2", val, [0.5, 1e-6], abs(val - 0.5) < 1e-6))
    if not checks:
        raise ConfigError("clm_validation needs samples at t = 1 or t = 2")
    code, summary = _finish(summary, checks)
    _emit_record(out, rec, summary, [])
    return code, summary


def _reduction(cfg: RunConfig, out: Path | None) -> tuple:
    m = _model(cfg)
    if m.formulation != "physical":
        raise ConfigError("degregorio_reduction uses the physical formulation")
    try:
        m.check_stability_regime()
    except ValueError as e:
        raise ConfigError(str(e)) from None
    grid = _grid(cfg)
    tg = _timegrid(cfg)
    w0 = build_initial(cfg.init_plus, grid)
    summary = {"scenario": cfg.scenario, "params": _params(cfg)}
    try:
        rec = integrate(SolverState(0.0, w0, w0), m, tg, [physical_monitor])
    except BlowUpError as e:
        summary.update(status="blowup", blowup_t=e.t, bkm_integral=e.bkm_integral, reason=e.reason)
        _emit_record(out, e.record, summary, [])
        return EXIT_BLOWUP, summary
    diff = float(np.max(rec.column("diff_linf")))
    summary["max_diff_linf"] = diff
    code, summary = _finish(summary, [_check("max_diff_linf", diff, 1e-10, diff < 1e-10)])
    _emit_record(out, rec, summary, [])
    return code, summary


def mollified_distances(cfg: RunConfig) -> dict:
    """Terminal L2 distance of each mollified run to the unmollified one."""
    grid = _grid(cfg)
    tg = _timegrid(cfg)
    widths = sorted(cfg.width_list, reverse=True)
    if 0.0 not in widths:
        widths.append(0.0)
    p0 = build_initial(cfg.init_plus, grid)
    m0 = build_initial(cfg.init_minus, grid)
    finals = {}
    for w in widths:
        m = _model(cfg, moll_width=w)
        phi = mollifier_multiplier(grid, w, cfg.mollifier)
        s0 = SolverState(0.0, SpectralField(grid, phi * p0.coeffs), SpectralField(grid, phi * m0.coeffs))
        finals[w] = integrate(s0, m, tg).final_state.as_array()
    ref = finals[0.0]
    weight = np.full(grid.n_modes, 2.0)
    weight[0] = weight[-1] = 1.0
    return {
        w: float(math.sqrt(2.0 * math.pi * np.sum(weight * np.abs(finals[w] - ref) ** 2)))
        for w in widths
    }


def _mollified(cfg: RunConfig, out: Path | None) -> tuple:
    if cfg.formulation != "physical":
        raise ConfigError("mollified_convergence uses the physical formulation")
    summary = {"scenario": cfg.scenario, "params": _params(cfg)}
    try:
        dist = mollified_distances(cfg)
    except BlowUpError as e:
        summary.update(status="blowup", blowup_t=e.t, reason=e.reason)
        return EXIT_BLOWUP, summary
    ws = list(dist)  # decreasing widths
    ds = [dist[w] for w in ws]
    decreasing = all(a > b for a, b in zip(ds, ds[1:]))
    summary["distances"] = {repr(w): d for w, d in dist.items()}
    code, summary = _finish(summary, [_check("strictly_decreasing", ds, None, decreasing)])
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        plotting.distance_figure(ws, ds, out / "mollified.png")
        _write_json(out / "summary.json", summary)
    return code, summary


# ---------------------------------------------------------------------------
# operator audit


def operator_audit(cfg: RunConfig, out: Path | None = None) -> tuple:
    if int(cfg.K) != cfg.K or cfg.K < 2:
        raise ConfigError(f"K must be an integer >= 2, got {cfg.K}")
    grid = _grid(cfg)
    if 3 * (cfg.K + 2) > grid.n_points:
        raise ConfigError(f"N={cfg.N} cannot resolve 3(K+2) = {3 * (cfg.K + 2)} modes")
    if not cfg.tol > 0:
        raise ConfigError(f"tol must be positive, got {cfg.tol}")
    rng = np.random.default_rng(cfg.seed)
    checks = []
    audits = []
    matrices = []
    for name in AUDIT_TAGS:
        tag = OperatorTag.parse(name)
        rep = matrix_vs_spectral_audit(tag, cfg.K, cfg.trials, cfg.tol, cfg.N, rng)
        audits.append(rep.to_json())
        matrices.append(assemble_matrix(tag, cfg.K).to_json())
        worst = max(rep.max_discrepancy, rep.max_spill_discrepancy)
        checks.append(_check(f"audit_{name}", worst, cfg.tol, rep.passed))
    sweeps = []
    for name in ("Lplus", "Lminus(0.0)", "Lminus(0.1)", "Lminus(0.2)"):
        r = rayleigh_sweep(name, cfg.K, cfg.rayleigh_trials, rng)
        sweeps.append(r)
        checks.append(_check(f"rayleigh_{name}", r["max_excess"], 1e-12, r["max_excess"] <= 1e-12))
    qc = q_contraction_sweep(cfg.K, cfg.rayleigh_trials, rng)
    checks.append(_check("q_contraction", qc["max_excess"], 1e-12, qc["max_excess"] <= 1e-12))
    ec0 = SpectralField.from_function(grid, lambda t: np.cos(t) - 1.0)
    qerr = float(np.max(np.abs(apply(OperatorTag("Q"), ec0).coeffs + ec0.coeffs)))
    checks.append(_check("Q_ec0", qerr, 1e-12, qerr < 1e-12))
    summary = {
        "scenario": "operator_audit",
        "params": _params(cfg),
        "audits": audits,
        "rayleigh": sweeps,
        "q_contraction": qc,
    }
    code, summary = _finish(summary, checks)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "audit.json", summary)
        _write_json(out / "matrices.json", matrices)
    return code, summary


# ---------------------------------------------------------------------------
# dispatch


def run_scenario(cfg: RunConfig, out_dir: str | Path | None = None) -> tuple:
    """Run ``cfg``; returns (exit_code, summary). Never raises on bad configs."""
    out = Path(out_dir) if out_dir is not None else None
    try:
        if cfg.scenario in ("q0_stability", "qpos_stability"):
            return _stability(cfg, out)
        if cfg.scenario == "clm_validation":
            return _clm(cfg, out)
        if cfg.scenario == "degregorio_reduction":
            return _reduction(cfg, out)
        if cfg.scenario == "mollified_convergence":
            return _mollified(cfg, out)
        if cfg.scenario == "operator_audit":
            return operator_audit(cfg, out)
        if cfg.scenario == "custom":
            return _custom(cfg, out)
        raise ConfigError(f"unknown scenario {cfg.scenario!r}")
    except ConfigError as e:
        return EXIT_CONFIG, {"scenario": cfg.scenario, "status": "config_error", "error": str(e)}


def _custom(cfg: RunConfig, out: Path | None) -> tuple:
    """Plain integration; the only assertion is the absence of blow-up."""
    if cfg.formulation == "perturbation":
        return _stability(cfg, out)
    m = _model(cfg)
    grid = _grid(cfg)
    tg = _timegrid(cfg)
    s0 = SolverState(0.0, build_initial(cfg.init_plus, grid), build_initial(cfg.init_minus, grid))
    summary = {"scenario": cfg.scenario, "params": _params(cfg)}
    try:
        rec = integrate(s0, m, tg, [physical_monitor])
    except BlowUpError as e:
        summary.update(status="blowup", blowup_t=e.t, bkm_integral=e.bkm_integral, reason=e.reason)
        _emit_record(out, e.record, summary, [])
        return EXIT_BLOWUP, summary
    summary["bkm_integral"] = rec.rows[-1]["bkm_int"]
    code, summary = _finish(summary, [])
    _emit_record(out, rec, summary, [])
    return code, summary


# ---------------------------------------------------------------------------
# sweeps

SWEEP_AXES = {"q": "q", "eps": "eps", "N": "N", "dt": "dt"}
SWEEP_COLUMNS = (
    "axis", "value", "exit_code", "status", "rate", "r2", "sup_h", "h_T",
    "tail_oscillation", "bootstrap_pass", "terminal_diff",
)


def _child(args):
    cfg, out = args
    try:
        code, summary = run_scenario(cfg, out)
    except Exception as e:  # a crashed child only marks its row
        return 1, {"status": "error", "error": repr(e)}
    return code, summary


def _sweep_cfg(template: RunConfig, axis: str, value: float) -> RunConfig:
    if axis == "q":
        return template.replace(q=value, p=1.0 - value)
    if axis == "N":
        return template.replace(N=int(value))
    return template.replace(**{axis: value})


def sweep(template: RunConfig, axis: str, values, out_dir: str | Path | None = None, workers: int | None = None):
    """Independent runs along one axis; returns (rows, csv_text)."""
    if axis in ("epsilon", "ε"):
        axis = "eps"
    if axis not in SWEEP_AXES:
        raise ConfigError(f"axis must be one of {tuple(SWEEP_AXES)}, got {axis!r}")
    values = [float(v) for v in values]
    if not values:
        raise ConfigError("sweep needs at least one value")
    out = Path(out_dir) if out_dir is not None else None
    jobs = []
    for v in values:
        child_out = None if out is None else out / f"{axis}_{v!r}"
        jobs.append((_sweep_cfg(template, axis, v), child_out))
    if workers == 1 or len(jobs) == 1:
        results = [_child(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_child, jobs))
    rows = []
    for (cfg, _), v, (code, summ) in zip(jobs, values, results):
        fit = summ.get("fits", {}).get("E_H0", {})
        h = summ.get("h", {})
        rows.append({
            "axis": axis,
            "value": v,
            "exit_code": code,
            "status": summ.get("status", ""),
            "rate": fit.get("rate", float("nan")),
            "r2": fit.get("r2", float("nan")),
            "sup_h": h.get("sup_abs", float("nan")),
            "h_T": h.get("final", float("nan")),
            "tail_oscillation": h.get("tail_oscillation", float("nan")),
            "bootstrap_pass": summ.get("bootstrap", {}).get("pass", False),
            "terminal_diff": float("nan"),
        })
    if axis == "dt" and out is not None:
        _terminal_diffs(rows, jobs)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow([r[c] if isinstance(r[c], str) else fmt(r[c]) for c in SWEEP_COLUMNS])
    text = buf.getvalue()
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "sweep.csv").write_text(text)
    return rows, text


def _read_snapshot(path: Path) -> np.ndarray | None:
    if not path.exists():
        return None
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    return data[:, 1]


def _terminal_diffs(rows, jobs) -> None:
    """Max-norm difference of each terminal state to the finest-dt run."""
    snaps = []
    for _, child_out in jobs:
        a = _read_snapshot(child_out / "snapshot_plus.csv")
        b = _read_snapshot(child_out / "snapshot_minus.csv")
        snaps.append(None if a is None or b is None else np.concatenate([a, b]))
    finest = int(np.argmin([r["value"] for r in rows]))
    if snaps[finest] is None:
        return
    for r, s in zip(rows, snaps):
        if s is not None and s.shape == snaps[finest].shape:
            r["terminal_diff"] = float(np.max(np.abs(s - snaps[finest])))
