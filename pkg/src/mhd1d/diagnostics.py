"""
Measurements on states and run records: H0 energies, conserved quantities,
the BKM integrand, the exponential envelope checks, decay fits and the Z1
drift h(t) = eps * eta-_{s,0}.

Every function here is a pure reader of its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import spectral as sp
from .basis import ebasis_arrays
from .dynamics import ModelParams, SolverState, to_physical
from .records import CSV_COLUMNS, RunRecord

__all__ = [
    "RunRecord",
    "CSV_COLUMNS",
    "BootstrapParams",
    "energy_EH0",
    "conserved_report",
    "bkm_report",
    "bootstrap_check",
    "fit_decay_rate",
    "h_series",
    "default_gamma",
    "ecoeffs",
    "perturbation_monitor",
    "physical_monitor",
    "conserved_drift",
]


def ecoeffs(field: sp.SpectralField):
    """Exact (s0, c0, s, c) of a field over all its resolved modes."""
    K = field.coeffs.shape[-1] - 2
    return ebasis_arrays(field.coeffs, K)


def _h0(s, c) -> float:
    return float(math.sqrt(np.sum(s * s) + np.sum(c * c)))


def energy_EH0(s: SolverState) -> float:
    """E_H0 = sqrt(H0(eta+)^2 + H0(eta-)^2)."""
    _, _, sp_, cp = ecoeffs(s.plus)
    _, _, sm, cm = ecoeffs(s.minus)
    return math.hypot(_h0(sp_, cp), _h0(sm, cm))


def _value_at0(c: np.ndarray) -> float:
    return float(c[0].real + 2.0 * c[1:-1].real.sum() + c[-1].real)


def _slope_at0(c: np.ndarray, k: np.ndarray) -> float:
    # d/dth at 0 of c0 + 2 Re sum c_k e^{ikth}
    return float(-2.0 * np.sum(k[1:-1] * c[1:-1].imag))


def conserved_report(s: SolverState) -> dict:
    k = s.grid.wavenumbers
    cp, cm = s.plus.coeffs, s.minus.coeffs
    s0, c0, _, c = ecoeffs(s.plus)
    kk = np.arange(1, c.shape[-1] + 1, dtype=float)
    mean = 2.0 * np.pi * float(cp[0].real)
    predicted = 2.0 * np.pi * (float(np.sum(c / (kk * (kk + 1)))) - float(c0))
    return {
        "etaP_mean": mean,
        "etaP_at0": _value_at0(cp),
        "etaM_at0": _value_at0(cm),
        "etaP_dth0": _slope_at0(cp, k),
        "etaM_dth0": _slope_at0(cm, k),
        "mean_identity_residual": abs(predicted - mean),
    }


def bkm_report(s: SolverState, m: ModelParams | None = None) -> dict:
    """E_Linf = |w+|_inf + |w-|_inf + |Hw+|_inf + |Hw-|_inf (grid suprema)."""
    if m is None or m.formulation == "physical":
        wp, wm = s.plus, s.minus
    else:
        wp, wm = to_physical(s, m)
    parts = [
        np.max(np.abs(f.values))
        for f in (wp, wm, sp.hilbert(wp), sp.hilbert(wm))
    ]
    return {"E_Linf": float(sum(parts))}


@dataclass(frozen=True)
class BootstrapParams:
    Gamma: float
    beta: float
    variant: str = "star"

    def __post_init__(self):
        if not self.Gamma > 0:
            raise ValueError(f"Gamma must be positive, got {self.Gamma}")
        if self.variant == "star":
            if not 0 < self.beta < 0.375:
                raise ValueError(f"variant star needs 0 < beta < 3/8, got {self.beta}")
        elif self.variant == "star_star":
            if not self.beta > 0:
                raise ValueError(f"beta must be positive, got {self.beta}")
        else:
            raise ValueError(f"variant must be star or star_star, got {self.variant!r}")

    @classmethod
    def for_q(cls, Gamma: float, q: float, beta: float | None = None) -> "BootstrapParams":
        """star for q = 0; star_star with beta = (1 - 4q)/4 by default for q > 0."""
        if q == 0:
            return cls(Gamma, 0.35 if beta is None else beta, "star")
        if not 0 < q < 0.25:
            raise ValueError(f"q must lie in [0, 1/4), got {q}")
        return cls(Gamma, (1.0 - 4.0 * q) / 4.0 if beta is None else beta, "star_star")


def default_gamma(s0: SolverState) -> float:
    """1.05 times the largest of H0(eta+), H0(eta-) and Z2(eta-) at t = 0."""
    _, _, sp_, cp = ecoeffs(s0.plus)
    _, c0m, sm, cm = ecoeffs(s0.minus)
    g = 1.05 * max(_h0(sp_, cp), _h0(sm, cm), abs(float(c0m)))
    if g == 0:
        # zero data: any positive Gamma works
        g = 1.0
    return g


def bootstrap_check(r: RunRecord, bp: BootstrapParams) -> dict:
    """Check E^2 < 2 G^2 e^{-2bt} and |eta-_{c,0}| < 5 G e^{-bt} at every sample."""
    if len(r) == 0:
        raise ValueError("empty record")
    t = r.column("t")
    E = r.column("E_H0")
    c0 = r.column("etaM_c0")
    G, b = bp.Gamma, bp.beta
    ok = (E * E < 2.0 * G * G * np.exp(-2.0 * b * t)) & (np.abs(c0) < 5.0 * G * np.exp(-b * t))
    bad = np.flatnonzero(~ok)
    first = float(t[bad[0]]) if bad.size else None
    return {"pass": bool(bad.size == 0), "first_violation_t": first}


def fit_decay_rate(r: RunRecord, field: str = "E_H0", window=(5.0, None)) -> dict:
    """Least-squares slope of -log(field) against t inside ``window``."""
    t = r.column("t")
    y = r.column(field)
    t0, t1 = window
    t1 = t[-1] if t1 is None else t1
    sel = (t >= t0 - 1e-12) & (t <= t1 + 1e-12)
    if sel.sum() < 10:
        raise ValueError(f"need at least 10 samples in [{t0}, {t1}], got {int(sel.sum())}")
    ts, ys = t[sel], y[sel]
    if not np.all(ys > 0):
        raise ValueError(f"{field} must be positive on the fit window")
    logy = np.log(ys)
    fit = stats.linregress(ts, logy)
    resid = logy - (fit.intercept + fit.slope * ts)
    ss_tot = float(np.sum((logy - logy.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res == 0.0 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return {"rate": float(-fit.slope), "r2": r2, "n": int(sel.sum()), "window": [float(t0), float(t1)]}


def h_series(r: RunRecord, m: ModelParams | None = None, tail_from: float | None = None) -> dict:
    """h(t) samples with sup|h|, h(T) and the tail oscillation after ``tail_from`` (default T/2)."""
    t = r.column("t")
    if "h" in r.columns:
        h = r.column("h")
    else:
        if m is None:
            raise ValueError("record has no h column; pass the model parameters")
        h = m.eps * r.column("etaM_s0")
    start = t[-1] / 2.0 if tail_from is None else tail_from
    tail = t >= start - 1e-12
    return {
        "t": t,
        "h": h,
        "sup_abs": float(np.max(np.abs(h))),
        "final": float(h[-1]),
        "tail_oscillation": float(np.max(np.abs(h[tail] - h[-1]))),
    }


def perturbation_monitor(s: SolverState, m: ModelParams) -> dict:
    """Standard row for perturbation runs: canonical columns plus extended ones."""
    s0p, c0p, sp_, cp = ecoeffs(s.plus)
    s0m, c0m, sm, cm = ecoeffs(s.minus)
    hp, hm = _h0(sp_, cp), _h0(sm, cm)
    k = np.arange(1, sp_.shape[-1] + 1, dtype=float)
    w = 2.0 / (k * (k + 1))
    f1w = (k * k + 3 * k + 1) / (k * k * (k + 1) ** 2)
    row = {
        "E_H0": math.hypot(hp, hm),
        "etaP_H0": hp,
        "etaM_H0": hm,
        "etaM_c0": float(c0m),
        "etaM_s0": float(s0m),
    }
    cons = conserved_report(s)
    row.update(
        etaP_mean=cons["etaP_mean"],
        etaP_at0=cons["etaP_at0"],
        etaM_at0=cons["etaM_at0"],
        bkm=bkm_report(s, m)["E_Linf"],
        h=m.eps * float(s0m),
        etaP_s0=float(s0p),
        etaP_c0=float(c0p),
        etaP_Y=math.sqrt(hp * hp + c0p * c0p + s0p * s0p),
        etaM_Y=math.sqrt(hm * hm + c0m * c0m + s0m * s0m),
        etaM_mean=2.0 * np.pi * float(s.minus.coeffs[0].real),
        mean_identity_residual=cons["mean_identity_residual"],
        F1=float(np.sum(f1w * cm)),
        G1=float(np.sum(w * sp_)),
        G2=float(np.sum(w * sm)),
        G3=float(np.sum((f1w - 2.0 * m.q * w) * cm)),
    )
    return row


def physical_monitor(s: SolverState, m: ModelParams) -> dict:
    wp, wm = s.plus.values, s.minus.values
    omega = -np.sin(s.grid.theta)
    return {
        "bkm": bkm_report(s)["E_Linf"],
        "diff_linf": float(np.max(np.abs(wp - wm))),
        "dist_equilibrium": float(max(np.max(np.abs(wp - omega)), np.max(np.abs(wm - omega)))),
        "wP_at0": float(wp[0]),
        "wM_at0": float(wm[0]),
    }


def conserved_drift(r: RunRecord, q: float = 0.0) -> dict:
    """Largest deviation of each conserved quantity from its initial value."""
    out = {}
    for name in ("etaP_mean", "etaP_at0", "etaM_at0", "etaP_s0"):
        col = r.column(name)
        out[name] = float(np.max(np.abs(col - col[0])))
    if q == 0.0:
        col = r.column("etaM_s0")
        out["etaM_s0"] = float(np.max(np.abs(col - col[0])))
    return out
