"""
Right-hand sides and explicit time stepping.

Physical form evolves (w+, w-) under

    w+_t = -a u- w+_th + p w+ Hw- + q w- Hw+      (and + <-> -)

with u_th = Hw, u(0) = 0. The perturbation form evolves (eta+, eta-) with
w+- = -sin + eps (eta+ +- eta-):

    eta+_t = L+ eta+ + eps N1,    eta-_t = L-(q) eta- + eps N2.

Quadratic terms are formed on a 3/2-padded grid. Two closures are offered:
``fourier`` keeps |k| <= N/3; ``ebasis`` projects onto the first K e-basis
modes while keeping the Fourier mean, so eta(0) = 0, the mean of eta and the
H0 energy balance are all respected by the discrete system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from . import spectral as sp
from .basis import project_to_span
from .records import RunRecord
from .spectral import GridSpec, SpectralField

__all__ = [
    "ModelParams",
    "SolverState",
    "TimeGrid",
    "BlowUpError",
    "rhs_physical",
    "rhs_perturbation",
    "mollified_rhs",
    "mollifier_multiplier",
    "make_rhs",
    "step_rk4",
    "integrate",
    "suggest_dt",
    "to_physical",
    "h1_norm",
]

BLOWUP_H1 = 1e8


@dataclass(frozen=True)
class ModelParams:
    a: float = 1.0
    p: float = 1.0
    q: float = 0.0
    eps: float = 0.0
    formulation: str = "physical"
    closure: str = "fourier"
    K: int = 64
    moll_width: float = 0.0
    mollifier: str = "gaussian"

    def __post_init__(self):
        if self.formulation not in ("physical", "perturbation"):
            raise ValueError(f"formulation must be physical or perturbation, got {self.formulation!r}")
        if self.closure not in ("fourier", "ebasis"):
            raise ValueError(f"closure must be fourier or ebasis, got {self.closure!r}")
        if self.closure == "ebasis" and self.formulation != "perturbation":
            raise ValueError("the ebasis closure applies to the perturbation form only")
        if self.mollifier not in ("gaussian", "cutoff"):
            raise ValueError(f"mollifier must be gaussian or cutoff, got {self.mollifier!r}")
        for name in ("a", "p", "q", "eps", "moll_width"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.eps < 0:
            raise ValueError(f"eps must be >= 0, got {self.eps}")
        if self.moll_width < 0:
            raise ValueError(f"moll_width must be >= 0, got {self.moll_width}")
        if self.moll_width > 0 and self.formulation != "physical":
            raise ValueError("mollification applies to the physical form only")
        if int(self.K) != self.K or self.K < 2:
            raise ValueError(f"K must be an integer >= 2, got {self.K}")

    @property
    def delta(self) -> float:
        return 1.0 - 4.0 * self.q

    def check_stability_regime(self, q_positive: bool | None = None) -> None:
        """a = 1, p + q = 1, q in [0, 1/4); optionally q = 0 or q > 0."""
        if self.a != 1.0:
            raise ValueError(f"stability runs need a = 1, got {self.a}")
        if not 0.0 <= self.q < 0.25:
            raise ValueError(f"stability runs need 0 <= q < 1/4, got {self.q}")
        if abs(self.p + self.q - 1.0) > 1e-14:
            raise ValueError(f"stability runs need p + q = 1, got p={self.p}, q={self.q}")
        if q_positive is True and self.q == 0.0:
            raise ValueError("this scenario needs q > 0")
        if q_positive is False and self.q != 0.0:
            raise ValueError(f"this scenario needs q = 0, got {self.q}")


@dataclass(frozen=True, eq=False)
class SolverState:
    t: float
    plus: SpectralField
    minus: SpectralField

    def __post_init__(self):
        if self.plus.grid != self.minus.grid:
            raise sp.GridMismatchError("plus and minus fields live on different grids")
        if not math.isfinite(self.t):
            raise ValueError("t must be finite")

    @property
    def grid(self) -> GridSpec:
        return self.plus.grid

    def as_array(self) -> np.ndarray:
        return np.stack([self.plus.coeffs, self.minus.coeffs])

    @classmethod
    def from_array(cls, t: float, grid: GridSpec, y: np.ndarray) -> "SolverState":
        return cls(float(t), SpectralField(grid, y[0]), SpectralField(grid, y[1]))


@dataclass(frozen=True)
class TimeGrid:
    dt: float
    T: float
    output_stride: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.T >= 0:
            raise ValueError(f"T must be >= 0, got {self.T}")
        if int(self.output_stride) != self.output_stride or self.output_stride < 1:
            raise ValueError(f"output_stride must be a positive integer, got {self.output_stride}")
        n = self.T / self.dt
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ValueError(f"T={self.T} is not a whole number of steps dt={self.dt}")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


class BlowUpError(RuntimeError):
    """Non-finite or runaway state; carries the time, BKM integral and partial record."""

    def __init__(self, t: float, bkm_integral: float, record: RunRecord | None = None, reason: str = ""):
        super().__init__(f"blow-up signal at t={t:.6g} ({reason}); BKM integral so far {bkm_integral:.6g}")
        self.t = t
        self.bkm_integral = bkm_integral
        self.record = record
        self.reason = reason


# ---------------------------------------------------------------------------
# array-level right-hand sides


def mollifier_multiplier(grid: GridSpec, width: float, kind: str = "gaussian") -> np.ndarray:
    k = grid.wavenumbers
    if width == 0:
        return np.ones_like(k)
    if kind == "gaussian":
        return np.exp(-((width * k) ** 2))
    if kind == "cutoff":
        return (k <= 1.0 / width).astype(float)
    raise ValueError(f"unknown mollifier {kind!r}")


class _Rhs:
    """Right-hand side on stacked coefficient arrays of shape (2, n_modes)."""

    def __init__(self, grid: GridSpec, m: ModelParams):
        self.grid = grid
        self.m = m
        self.k = grid.wavenumbers
        self.M = sp.padded_size(grid.n_points)
        th = 2.0 * np.pi * np.arange(self.M) / self.M
        self.S = np.sin(th)
        self.C = np.cos(th)
        if m.closure == "ebasis":
            K = int(m.K)
            if K + 1 > grid.k_max or 2 * K + 3 > self.M // 2:
                raise ValueError(
                    f"K={K} is too large for N={grid.n_points}: need K+1 <= {grid.k_max}"
                )
        self.phi = mollifier_multiplier(grid, m.moll_width, m.mollifier)
        self._proj = _projection_matrix(grid.n_modes, self.M // 2 + 1, int(m.K)) if m.closure == "ebasis" else None

    def close(self, values: np.ndarray) -> np.ndarray:
        if self.m.closure == "fourier":
            return sp.unpad_coeffs(values, self.grid.n_modes, self.grid.dealias_mask)
        full = np.fft.rfft(values) / self.M
        ri = np.concatenate([full.real, full.imag], axis=-1)
        out = ri @ self._proj
        n = self.grid.n_modes
        return out[..., :n] + 1j * out[..., n:]

    def _fields(self, c: np.ndarray, smooth: np.ndarray | None = None):
        d = c if smooth is None else smooth
        stack = np.stack([
            c,
            sp.derivative_coeffs(d, self.k),
            sp.velocity_coeffs(c, self.k),
            sp.hilbert_coeffs(c),
        ])
        return sp.pad_values(stack, self.M)

    def physical(self, y: np.ndarray) -> np.ndarray:
        m = self.m
        (wp, wm), (wpt, wmt), (up, um), (hp, hm) = self._fields(y)
        stretch_p = m.p * wp * hm + m.q * wm * hp
        stretch_m = m.p * wm * hp + m.q * wp * hm
        return self.close(np.stack([-m.a * um * wpt + stretch_p, -m.a * up * wmt + stretch_m]))

    def mollified(self, y: np.ndarray) -> np.ndarray:
        m = self.m
        phi = self.phi
        (wp, wm), (wpt, wmt), (up, um), (hp, hm) = self._fields(y, phi * y)
        adv = self.close(np.stack([um * wpt, up * wmt])) * phi
        stretch = self.close(np.stack([m.p * wp * hm + m.q * wm * hp, m.p * wm * hp + m.q * wp * hm]))
        return stretch - m.a * adv

    def perturbation_parts(self, y: np.ndarray):
        q = self.m.q
        S, C = self.S, self.C
        (ep, em), (ept, emt), (vp, vm), (hp, hm) = self._fields(y)
        lin_p = (ep + vp) * C - (ept + hp) * S
        lin_m = (em - vm) * C - (emt - hm) * S - 2.0 * q * (C * em + S * hm)
        n1 = ep * hp - ept * vp - (em * hm - emt * vm)
        n2 = em * hp - emt * vp - (ep * hm - ept * vm) - 2.0 * q * (em * hp - ep * hm)
        return lin_p, lin_m, n1, n2

    def perturbation(self, y: np.ndarray) -> np.ndarray:
        lin_p, lin_m, n1, n2 = self.perturbation_parts(y)
        eps = self.m.eps
        return self.close(np.stack([lin_p + eps * n1, lin_m + eps * n2]))

    def __call__(self, y: np.ndarray) -> np.ndarray:
        if self.m.formulation == "perturbation":
            return self.perturbation(y)
        if self.m.moll_width > 0:
            return self.mollified(y)
        return self.physical(y)


@lru_cache(maxsize=8)
def _projection_matrix(n_modes: int, n_full: int, K: int) -> np.ndarray:
    """Real matrix of project_to_span acting on [Re c, Im c] of a padded spectrum."""
    eye = np.eye(2 * n_full)
    full = eye[:, :n_full] + 1j * eye[:, n_full:]
    out = project_to_span(full, K, n_modes)
    P = np.concatenate([out.real, out.imag], axis=-1)
    P.setflags(write=False)
    return P


def make_rhs(grid: GridSpec, m: ModelParams) -> Callable[[np.ndarray], np.ndarray]:
    """Array-level RHS y -> dy/dt for stacked coefficients of shape (2, n_modes)."""
    return _Rhs(grid, m)


# ---------------------------------------------------------------------------
# field-level operations


def _pair(s: SolverState, y: np.ndarray):
    return SpectralField(s.grid, y[0]), SpectralField(s.grid, y[1])


def rhs_physical(s: SolverState, m: ModelParams):
    if m.formulation != "physical":
        raise ValueError("rhs_physical needs the physical formulation")
    return _pair(s, _Rhs(s.grid, m).physical(s.as_array()))


def rhs_perturbation(s: SolverState, m: ModelParams):
    """Returns (deta+/dt, deta-/dt, N1, N2) under the closure named in ``m``."""
    if m.formulation != "perturbation":
        raise ValueError("rhs_perturbation needs the perturbation formulation")
    r = _Rhs(s.grid, m)
    lin_p, lin_m, n1, n2 = r.perturbation_parts(s.as_array())
    closed = r.close(np.stack([lin_p + m.eps * n1, lin_m + m.eps * n2, n1, n2]))
    g = s.grid
    return tuple(SpectralField(g, c) for c in closed)


def mollified_rhs(s: SolverState, m: ModelParams, moll_width: float | None = None):
    """Physical RHS with the advection term mollified on both sides.

    ``moll_width`` overrides ``m.moll_width``; zero gives ``rhs_physical``.
    """
    width = m.moll_width if moll_width is None else float(moll_width)
    if width < 0:
        raise ValueError(f"moll_width must be >= 0, got {width}")
    if m.formulation != "physical":
        raise ValueError("mollified_rhs needs the physical formulation")
    if width == 0:
        return rhs_physical(s, m)
    mm = ModelParams(**{**m.__dict__, "moll_width": width})
    return _pair(s, _Rhs(s.grid, mm).mollified(s.as_array()))


def h1_norm(y: np.ndarray, k: np.ndarray) -> float:
    """Combined H1 norm of the stacked fields."""
    w = 1.0 + k * k
    w = np.where(k == 0, 1.0, 2.0 * w)
    w[-1] = 1.0 + k[-1] ** 2
    return float(np.sqrt(2.0 * np.pi * np.sum(w * np.abs(y) ** 2)))


def _rk4(y: np.ndarray, dt: float, f) -> np.ndarray:
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check_finite(y: np.ndarray, k: np.ndarray) -> str:
    if not np.all(np.isfinite(y)):
        return "non-finite state"
    if h1_norm(y, k) > BLOWUP_H1:
        return f"H1 norm above {BLOWUP_H1:g}"
    return ""


def step_rk4(s: SolverState, dt: float, rhs) -> SolverState:
    """One classical RK4 step.

    ``rhs`` maps a SolverState to a tuple whose first two entries are the
    time derivatives of ``plus`` and ``minus``.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    grid = s.grid

    def f(y):
        out = rhs(SolverState.from_array(s.t, grid, y))
        return np.stack([out[0].coeffs, out[1].coeffs])

    with np.errstate(all="ignore"):
        y = _rk4(s.as_array(), dt, f)
    reason = _check_finite(y, grid.wavenumbers)
    if reason:
        raise BlowUpError(s.t + dt, float("nan"), None, reason)
    return SolverState.from_array(s.t + dt, grid, y)


def to_physical(s: SolverState, m: ModelParams):
    """(w+, w-) as SpectralFields; the identity for the physical form."""
    if m.formulation == "physical":
        return s.plus, s.minus
    omega = SpectralField.from_function(s.grid, lambda th: -np.sin(th))
    return omega + m.eps * (s.plus + s.minus), omega + m.eps * (s.plus - s.minus)


def integrate(
    s0: SolverState,
    m: ModelParams,
    tg: TimeGrid,
    monitors: Sequence[Callable] = (),
) -> RunRecord:
    """Advance ``s0`` to ``tg.T`` with fixed-step RK4.

    Each monitor is called as ``monitor(state, m)`` every ``output_stride``
    steps (and at the start and end) and returns a dict of scalars. If a
    monitor reports ``bkm`` the running trapezoid integral is stored as
    ``bkm_int``.
    """
    grid = s0.grid
    f = make_rhs(grid, m)
    rec = RunRecord(meta={"N": grid.n_points, "dt": tg.dt, "T": tg.T})
    bkm_int = 0.0
    last = None

    def sample(state: SolverState):
        nonlocal bkm_int, last
        row = {"t": state.t}
        for mon in monitors:
            row.update(mon(state, m))
        if "bkm" in row:
            if last is not None:
                bkm_int += 0.5 * (row["bkm"] + last[1]) * (state.t - last[0])
            row["bkm_int"] = bkm_int
            last = (state.t, row["bkm"])
        rec.append(row)

    sample(s0)
    y = s0.as_array()
    n = tg.n_steps
    k = grid.wavenumbers
    for i in range(1, n + 1):
        with np.errstate(all="ignore"):
            y = _rk4(y, tg.dt, f)
        reason = _check_finite(y, k)
        if reason:
            rec.blowup_t = s0.t + i * tg.dt
            raise BlowUpError(rec.blowup_t, bkm_int, rec, reason)
        if i % tg.output_stride == 0 or i == n:
            sample(SolverState.from_array(s0.t + i * tg.dt, grid, y))
    rec.final_state = SolverState.from_array(s0.t + n * tg.dt, grid, y)
    return rec


def suggest_dt(s: SolverState, m: ModelParams, c_cfl: float = 0.5) -> float:
    wp, wm = to_physical(s, m)
    umax = max(1.0, sp.linf_norm(sp.velocity_from_vorticity(wp)), sp.linf_norm(sp.velocity_from_vorticity(wm)))
    return c_cfl * s.grid.dtheta / umax
