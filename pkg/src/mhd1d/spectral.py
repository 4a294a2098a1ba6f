"""
Fourier representation of real periodic fields on the torus (-pi, pi].

Fields are stored either as grid samples (``RealField``) or as normalized
half-spectrum coefficients (``SpectralField``) so that

    f(theta) = c_0 + 2 Re sum_{k>=1} c_k exp(i k theta).

The grid is theta_j = 2 pi j / N wrapped into (-pi, pi], so theta = 0 is the
node j = 0 and theta = pi is the node j = N/2.

The module-level ``*_coeffs`` helpers work on bare coefficient arrays and are
what the time integrator uses; the field-level functions wrap them.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "GridSpec",
    "RealField",
    "SpectralField",
    "GridMismatchError",
    "hilbert",
    "derivative",
    "velocity_from_vorticity",
    "dealiased_product",
    "point_eval",
    "linf_norm",
]


class GridMismatchError(ValueError):
    """Raised when two fields living on different grids are combined."""


@dataclass(frozen=True)
class GridSpec:
    n_points: int

    def __post_init__(self):
        n = self.n_points
        if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
            raise TypeError(f"n_points must be an integer, got {n!r}")
        if n < 16 or n % 2:
            raise ValueError(f"n_points must be even and >= 16, got {n}")

    @cached_property
    def theta(self) -> np.ndarray:
        j = np.arange(self.n_points)
        th = 2.0 * np.pi * j / self.n_points
        th[j > self.n_points // 2] -= 2.0 * np.pi
        th.setflags(write=False)
        return th

    @property
    def dtheta(self) -> float:
        return 2.0 * np.pi / self.n_points

    @property
    def n_modes(self) -> int:
        """Length of the half spectrum, N/2 + 1."""
        return self.n_points // 2 + 1

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        k = np.arange(self.n_modes, dtype=float)
        k.setflags(write=False)
        return k

    @property
    def k_max(self) -> int:
        """Largest wavenumber kept by the 2/3 rule (3|k| < N)."""
        return (self.n_points - 1) // 3

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        m = np.arange(self.n_modes) <= self.k_max
        m.setflags(write=False)
        return m


# ---------------------------------------------------------------------------
# coefficient-level kernels


def to_coeffs(values: np.ndarray) -> np.ndarray:
    return np.fft.rfft(values) / values.shape[-1]


def to_values(coeffs: np.ndarray, n_points: int) -> np.ndarray:
    return np.fft.irfft(coeffs * n_points, n=n_points)


def hilbert_coeffs(c: np.ndarray) -> np.ndarray:
    # multiplier -i sgn(k); Nyquist zeroed
    out = -1j * c
    out[..., 0] = 0.0
    out[..., -1] = 0.0
    return out


def derivative_coeffs(c: np.ndarray, k: np.ndarray) -> np.ndarray:
    out = 1j * k * c
    out[..., -1] = 0.0
    return out


def antiderivative_gauged(c: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Periodic antiderivative of a mean-free field, constant fixed by f(0) = 0."""
    out = np.zeros_like(c)
    out[..., 1:-1] = c[..., 1:-1] / (1j * k[1:-1])
    # f(0) = c_0 + 2 Re sum_{k>=1} c_k
    out[..., 0] = -2.0 * out[..., 1:].real.sum(axis=-1)
    return out


def velocity_coeffs(c: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Coefficients of u with u_theta = H f and u(0) = 0."""
    # H then integrate: (-i sgn k)/(i k) = -1/|k| for k >= 1
    out = np.zeros_like(c)
    out[..., 1:-1] = -c[..., 1:-1] / k[1:-1]
    out[..., 0] = -2.0 * out[..., 1:].real.sum(axis=-1)
    return out


def pad_values(c: np.ndarray, n_pad: int) -> np.ndarray:
    """Samples on an n_pad grid of the band-limited function with coefficients c."""
    m = n_pad // 2 + 1
    padded = np.zeros(c.shape[:-1] + (m,), dtype=complex)
    n = min(m, c.shape[-1])
    padded[..., :n] = c[..., :n]
    return np.fft.irfft(padded * n_pad, n=n_pad)


def unpad_coeffs(values: np.ndarray, n_modes: int, mask: np.ndarray) -> np.ndarray:
    """Transform padded samples back and keep the dealiased band of n_modes."""
    full = np.fft.rfft(values) / values.shape[-1]
    out = full[..., :n_modes].copy()
    out[..., ~mask] = 0.0
    return out


def padded_size(n_points: int) -> int:
    # 3/2 padding makes products exact for |k| < N/2
    m = (3 * n_points) // 2
    return m + (m % 2)


def eval_coeffs(c: np.ndarray, theta, n_points: int) -> np.ndarray:
    """Trigonometric interpolant of real coefficients at arbitrary theta."""
    theta = np.asarray(theta, dtype=float)
    k = np.arange(c.shape[-1])
    phase = np.exp(1j * np.multiply.outer(theta, k[1:-1]))
    val = c[0].real + 2.0 * (phase @ c[1:-1]).real
    # Nyquist term as c_{N/2} cos(N theta / 2), exact at the nodes
    val = val + c[-1].real * np.cos(0.5 * n_points * theta)
    return val


# ---------------------------------------------------------------------------
# field types


@dataclass(frozen=True, eq=False)
class RealField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n_points,):
            raise ValueError(
                f"expected {self.grid.n_points} samples, got shape {v.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("RealField values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: GridSpec, func) -> "RealField":
        return cls(grid, func(grid.theta))

    def to_spectral(self) -> "SpectralField":
        return SpectralField(self.grid, to_coeffs(self.values))


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Half-spectrum coefficients c_0..c_{N/2} of a real field."""

    grid: GridSpec
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.shape != (self.grid.n_modes,):
            raise ValueError(
                f"expected {self.grid.n_modes} coefficients, got shape {c.shape}"
            )
        if not np.all(np.isfinite(c)):
            raise ValueError("SpectralField coefficients must be finite")
        # real field: mean and Nyquist coefficients are real
        c[0] = c[0].real
        c[-1] = c[-1].real
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_function(cls, grid: GridSpec, func) -> "SpectralField":
        return RealField.from_function(grid, func).to_spectral()

    @classmethod
    def zeros(cls, grid: GridSpec) -> "SpectralField":
        return cls(grid, np.zeros(grid.n_modes, dtype=complex))

    def to_real(self) -> RealField:
        return RealField(self.grid, to_values(self.coeffs, self.grid.n_points))

    @property
    def values(self) -> np.ndarray:
        return to_values(self.coeffs, self.grid.n_points)

    @property
    def mean(self) -> float:
        return float(self.coeffs[0].real)

    def dealiased(self) -> "SpectralField":
        return SpectralField(self.grid, np.where(self.grid.dealias_mask, self.coeffs, 0))

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_grid(self, other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_grid(self, other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs)


def _check_grid(f, g):
    if f.grid != g.grid:
        raise GridMismatchError(
            f"grid mismatch: {f.grid.n_points} vs {g.grid.n_points} points"
        )


# ---------------------------------------------------------------------------
# operations


def hilbert(f: SpectralField) -> SpectralField:
    """Hilbert transform on the torus; multiplier -i sgn(k)."""
    return SpectralField(f.grid, hilbert_coeffs(f.coeffs))


def derivative(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, derivative_coeffs(f.coeffs, f.grid.wavenumbers))


def velocity_from_vorticity(omega: SpectralField) -> RealField:
    """Return u with u_theta = H omega and u(0) = 0."""
    c = velocity_coeffs(omega.coeffs, omega.grid.wavenumbers)
    values = to_values(c, omega.grid.n_points)
    # the gauge holds to round-off; pin the node exactly
    values[0] = 0.0
    return RealField(omega.grid, values)


def dealiased_product(f: SpectralField, g: SpectralField) -> SpectralField:
    """Product f*g, formed exactly on a 3/2-padded grid, then cut to |k| < N/3."""
    _check_grid(f, g)
    grid = f.grid
    m = padded_size(grid.n_points)
    prod = pad_values(f.coeffs, m) * pad_values(g.coeffs, m)
    return SpectralField(grid, unpad_coeffs(prod, grid.n_modes, grid.dealias_mask))


def point_eval(f: SpectralField, theta: float) -> float:
    return float(eval_coeffs(f.coeffs, theta, f.grid.n_points))


def linf_norm(f: RealField) -> float:
    """Grid supremum of |f|."""
    return float(np.max(np.abs(f.values)))
