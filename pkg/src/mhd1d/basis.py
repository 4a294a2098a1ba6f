"""
Coefficients in the orthonormal e-basis of Y = Z1 + H and the associated
seminorms and projections.

Basis functions (k >= 1):

    e_{s,0} = sin t                       (spans Z1)
    e_{c,0} = cos t - 1                   (spans Z2)
    e_{s,k} = sin((k+1)t)/(k+1) - sin(kt)/k
    e_{c,k} = (cos((k+1)t) - 1)/(k+1) - (cos(kt) - 1)/k

All norms are evaluated in coefficient space; the weight |sin(t/2)|^-2 is only
ever integrated by the audit helper ``h_inner_quadrature``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np

from . import spectral as sp
from .spectral import GridSpec, SpectralField

__all__ = [
    "EBasisCoeffs",
    "SpaceTag",
    "NotInYError",
    "TruncationError",
    "to_ebasis",
    "from_ebasis",
    "seminorms",
    "project",
    "mean_identity_residual",
    "hardy_ratio_report",
    "h_inner_quadrature",
]


class NotInYError(ValueError):
    """The field does not vanish at theta = 0, so it has a Z0 component."""


class TruncationError(ValueError):
    """The field carries Fourier modes beyond K + 1."""

    def __init__(self, message: str, tail: float):
        super().__init__(message)
        self.tail = tail


class SpaceTag(enum.Enum):
    Z0 = "Z0"
    Z1 = "Z1"
    Z2 = "Z2"
    H_full = "H_full"
    H0 = "H0"


@dataclass(frozen=True, eq=False)
class EBasisCoeffs:
    """f = s0 sin + c0 (cos - 1) + sum_k (s[k-1] e_{s,k} + c[k-1] e_{c,k})."""

    K: int
    s0: float
    c0: float
    s: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        for name in ("s", "c"):
            arr = np.array(getattr(self, name), dtype=float).reshape(-1)
            if arr.shape != (self.K,):
                raise ValueError(f"{name} must have length K={self.K}, got {arr.shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "s0", float(self.s0))
        object.__setattr__(self, "c0", float(self.c0))

    @classmethod
    def zeros(cls, K: int) -> "EBasisCoeffs":
        return cls(K, 0.0, 0.0, np.zeros(K), np.zeros(K))

    @classmethod
    def unit(cls, K: int, family: str, k: int) -> "EBasisCoeffs":
        """Basis vector e_{family,k} with family in {'s', 'c'}."""
        s, c = np.zeros(K), np.zeros(K)
        s0 = c0 = 0.0
        if family == "s":
            if k == 0:
                s0 = 1.0
            else:
                s[k - 1] = 1.0
        elif family == "c":
            if k == 0:
                c0 = 1.0
            else:
                c[k - 1] = 1.0
        else:
            raise ValueError(f"family must be 's' or 'c', got {family!r}")
        return cls(K, s0, c0, s, c)

    @classmethod
    def from_vector(cls, vec: np.ndarray) -> "EBasisCoeffs":
        """Inverse of ``as_vector``: layout [s0, s_1..s_K, c0, c_1..c_K]."""
        vec = np.asarray(vec, dtype=float)
        K = vec.size // 2 - 1
        return cls(K, vec[0], vec[K + 1], vec[1 : K + 1], vec[K + 2 :])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([[self.s0], self.s, [self.c0], self.c])

    @property
    def mean_constant(self) -> float:
        """Fourier constant mode implied by the cosine coefficients."""
        k = np.arange(1, self.K + 1)
        return float(np.sum(self.c / (k * (k + 1))) - self.c0)

    def __add__(self, other: "EBasisCoeffs") -> "EBasisCoeffs":
        if other.K != self.K:
            raise ValueError("truncation orders differ")
        return EBasisCoeffs.from_vector(self.as_vector() + other.as_vector())

    def __mul__(self, scalar: float) -> "EBasisCoeffs":
        return EBasisCoeffs.from_vector(float(scalar) * self.as_vector())

    __rmul__ = __mul__

    def to_json(self) -> str:
        return json.dumps(
            {"K": self.K, "s0": self.s0, "c0": self.c0, "s": self.s.tolist(), "c": self.c.tolist()}
        )

    @classmethod
    def from_json(cls, text: str) -> "EBasisCoeffs":
        d = json.loads(text)
        return cls(int(d["K"]), d["s0"], d["c0"], d["s"], d["c"])


# ---------------------------------------------------------------------------
# array kernels shared with the time integrator


def ebasis_arrays(coeffs: np.ndarray, K: int):
    """Exact e-coefficients up to index K of the field with half-spectrum ``coeffs``.

    Sums run over every available Fourier mode, so for a field with a tail
    beyond K + 1 the result is its H-orthogonal projection onto the first K
    modes (plus the exact Z1/Z2 parts). Works on stacked arrays.
    """
    n = coeffs.shape[-1]
    m = np.arange(n, dtype=float)
    a = 2.0 * coeffs.real
    b = -2.0 * coeffs.imag
    # f_{s,k} = sum_{j > k} j b_j, likewise for the cosine family
    rs = np.cumsum((m * b)[..., ::-1], axis=-1)[..., ::-1]
    rc = np.cumsum((m * a)[..., ::-1], axis=-1)[..., ::-1]
    pad = max(0, K + 2 - n)
    if pad:
        zeros = np.zeros(coeffs.shape[:-1] + (pad,))
        rs = np.concatenate([rs, zeros], axis=-1)
        rc = np.concatenate([rc, zeros], axis=-1)
    s = rs[..., 2 : K + 2]
    c = rc[..., 2 : K + 2]
    s0 = rs[..., 1]
    c0 = rc[..., 1]
    return s0, c0, s, c


def coeffs_from_ebasis(s0, c0, s, c, n_modes: int) -> np.ndarray:
    """Half-spectrum coefficients (length n_modes) of an e-basis combination."""
    s = np.asarray(s, dtype=float)
    c = np.asarray(c, dtype=float)
    K = s.shape[-1]
    if K + 2 > n_modes:
        raise ValueError(f"{n_modes} modes cannot hold e-basis order K={K}")
    lead = s.shape[:-1]
    zero = np.zeros(lead + (1,))
    s_ext = np.concatenate([s, zero], axis=-1)
    c_ext = np.concatenate([c, zero], axis=-1)
    m = np.arange(2, K + 2, dtype=float)
    b = np.zeros(lead + (K + 2,))
    a = np.zeros(lead + (K + 2,))
    b[..., 1] = s0 - s_ext[..., 0]
    a[..., 1] = c0 - c_ext[..., 0]
    b[..., 2:] = (s_ext[..., :-1] - s_ext[..., 1:]) / m
    a[..., 2:] = (c_ext[..., :-1] - c_ext[..., 1:]) / m
    k = np.arange(1, K + 1, dtype=float)
    out = np.zeros(lead + (n_modes,), dtype=complex)
    out[..., 0] = np.sum(c / (k * (k + 1)), axis=-1) - c0
    out[..., 1 : K + 2] = 0.5 * (a[..., 1:] - 1j * b[..., 1:])
    return out


def project_to_span(coeffs: np.ndarray, K: int, n_modes: int) -> np.ndarray:
    """Project onto span{e_{s,0..K}, e_{c,0..K}} keeping the Fourier mean exact.

    H0 and Z1 coordinates are the exact ones; the Z2 coordinate is chosen from
    the mean identity so that the integral of the field is unchanged.
    """
    s0, _, s, c = ebasis_arrays(coeffs, K)
    k = np.arange(1, K + 1, dtype=float)
    c0 = np.sum(c / (k * (k + 1)), axis=-1) - coeffs[..., 0].real
    return coeffs_from_ebasis(s0, c0, s, c, n_modes)


# ---------------------------------------------------------------------------
# operations


def _value_at_zero(coeffs: np.ndarray) -> float:
    # f(0) = c_0 + 2 sum_{k>=1} Re c_k, Nyquist counted once
    return float(coeffs[0].real + 2.0 * coeffs[1:-1].real.sum() + coeffs[-1].real)


def to_ebasis(f: SpectralField, K: int, *, tol: float = 1e-10, strict: bool = True) -> EBasisCoeffs:
    """Expand a band-limited field of Y in the e-basis up to order K.

    Raises NotInYError if f(0) != 0 and TruncationError if Fourier modes above
    K + 1 are present (relative size above 1e-12); ``strict=False`` skips the
    tail check and returns the projection onto the first K modes.
    """
    if K < 0:
        raise ValueError(f"K must be >= 0, got {K}")
    coeffs = f.coeffs
    scale = max(1.0, float(np.max(np.abs(coeffs))))
    f0 = _value_at_zero(coeffs)
    if abs(f0) > tol * scale:
        raise NotInYError(f"field is not in Y: f(0) = {f0:.3e}")
    if strict and coeffs.shape[-1] > K + 2:
        tail = float(np.max(np.abs(coeffs[K + 2 :])))
        if tail > 1e-12 * scale:
            raise TruncationError(
                f"Fourier modes above K+1={K + 1} are not negligible (max {tail:.3e})", tail
            )
    s0, c0, s, c = ebasis_arrays(coeffs, K)
    return EBasisCoeffs(K, s0, c0, s, c)


def from_ebasis(c: EBasisCoeffs, grid: GridSpec) -> SpectralField:
    if c.K + 1 > grid.k_max:
        raise ValueError(
            f"grid with N={grid.n_points} resolves modes up to {grid.k_max}, "
            f"order K={c.K} needs mode {c.K + 1}"
        )
    return SpectralField(grid, coeffs_from_ebasis(c.s0, c.c0, c.s, c.c, grid.n_modes))


def seminorms(c: EBasisCoeffs) -> dict:
    h0 = float(np.sqrt(np.sum(c.s**2) + np.sum(c.c**2)))
    z1 = abs(c.s0)
    z2 = abs(c.c0)
    h = float(np.hypot(z2, h0))
    y = float(np.hypot(z1, h))
    return {"Y": y, "H": h, "H0": h0, "Z1": z1, "Z2": z2}


def project(c: EBasisCoeffs, tag: SpaceTag) -> EBasisCoeffs:
    tag = SpaceTag(tag)
    K = c.K
    if tag is SpaceTag.Z0:
        raise ValueError("Z0 (constants) is not a subspace of Y")
    if tag is SpaceTag.Z1:
        return EBasisCoeffs(K, c.s0, 0.0, np.zeros(K), np.zeros(K))
    if tag is SpaceTag.Z2:
        return EBasisCoeffs(K, 0.0, c.c0, np.zeros(K), np.zeros(K))
    if tag is SpaceTag.H0:
        return EBasisCoeffs(K, 0.0, 0.0, c.s, c.c)
    return EBasisCoeffs(K, 0.0, c.c0, c.s, c.c)


def mean_identity_residual(c: EBasisCoeffs, observed_mean: float) -> float:
    """|2 pi (sum_k c_k/(k(k+1)) - c0) - observed_mean|.

    ``observed_mean`` is the integral of the field over the torus.
    """
    return abs(2.0 * np.pi * c.mean_constant - observed_mean)


def hardy_ratio_report(c: EBasisCoeffs, n_points: int = 4096) -> dict:
    """Grid estimates of ||f/sin(t/2)||_inf and ||v(f)/sin(t/2)||_inf over [[f]]_H.

    At the node t = 0 the quotients are replaced by their limits 2 f'(0) and
    2 Hf(0).
    """
    if c.s0 != 0.0:
        raise ValueError("hardy ratios are defined on H (s0 must be 0)")
    h = seminorms(c)["H"]
    if h == 0.0:
        raise ValueError("zero H seminorm")
    grid = GridSpec(n_points)
    f = from_ebasis(c, grid)
    k = grid.wavenumbers
    fv = f.values
    vv = sp.to_values(sp.velocity_coeffs(f.coeffs, k), n_points)
    half = np.sin(0.5 * grid.theta)
    qf = np.empty(n_points)
    qv = np.empty(n_points)
    qf[1:] = fv[1:] / half[1:]
    qv[1:] = vv[1:] / half[1:]
    qf[0] = 2.0 * sp.point_eval(sp.derivative(f), 0.0)
    qv[0] = 2.0 * sp.point_eval(sp.hilbert(f), 0.0)
    return {"ratio_f": float(np.max(np.abs(qf))) / h, "ratio_v": float(np.max(np.abs(qv))) / h}


def h_inner_quadrature(f: SpectralField, g: SpectralField) -> float:
    """(1/4 pi) int f' g' / sin^2(t/2) by the trapezoidal rule.

    Audit helper only. The node t = 0 uses the limit 4 f''(0) g''(0), valid
    when f'(0) = g'(0) = 0 (true on H).
    """
    grid = f.grid
    df = sp.derivative(f)
    dg = sp.derivative(g)
    w = np.sin(0.5 * grid.theta) ** 2
    integrand = np.empty(grid.n_points)
    integrand[1:] = df.values[1:] * dg.values[1:] / w[1:]
    integrand[0] = 4.0 * sp.point_eval(sp.derivative(df), 0.0) * sp.point_eval(sp.derivative(dg), 0.0)
    return float(integrand.sum() * grid.dtheta / (4.0 * np.pi))
