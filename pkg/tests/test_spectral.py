import numpy as np
import pytest
import sympy
from hypothesis import given, strategies as st

from conftest import random_bandlimited
from mhd1d import spectral as sp
from mhd1d.spectral import (
    GridMismatchError,
    GridSpec,
    RealField,
    SpectralField,
    dealiased_product,
    derivative,
    hilbert,
    linf_norm,
    point_eval,
    velocity_from_vorticity,
)

G = GridSpec(256)


def field(fn):
    return SpectralField.from_function(G, fn)


def close(f: SpectralField, fn, tol=1e-12):
    return np.max(np.abs(f.values - fn(G.theta))) < tol


# --- grid ---------------------------------------------------------------


@pytest.mark.parametrize("n", [15, 17, 8, 0, -4])
def test_grid_rejects_bad_sizes(n):
    with pytest.raises(ValueError):
        GridSpec(n)


def test_grid_rejects_non_integer():
    with pytest.raises(TypeError):
        GridSpec(64.0)


def test_theta_zero_and_pi_are_nodes():
    th = G.theta
    assert th[0] == 0.0
    assert th[G.n_points // 2] == pytest.approx(np.pi, abs=1e-15)
    assert np.all((th > -np.pi) & (th <= np.pi))


def test_dealias_band():
    assert G.k_max == 85
    assert G.dealias_mask.sum() == 86


def test_realfield_rejects_nan():
    v = np.zeros(G.n_points)
    v[3] = np.nan
    with pytest.raises(ValueError):
        RealField(G, v)


def test_spectralfield_rejects_wrong_shape():
    with pytest.raises(ValueError):
        SpectralField(G, np.zeros(10))


# --- hilbert / derivative / velocity --------------------------------------


def test_hilbert_examples():
    assert close(hilbert(field(np.sin)), lambda t: -np.cos(t))
    assert close(hilbert(field(np.cos)), np.sin)
    assert close(hilbert(field(np.ones_like)), np.zeros_like)


def test_hilbert_mean_is_zero():
    f = random_bandlimited(G, 40, np.random.default_rng(0))
    assert hilbert(f).coeffs[0] == 0


def test_derivative_examples():
    assert close(derivative(field(np.sin)), np.cos)
    assert close(derivative(field(lambda t: np.cos(2 * t))), lambda t: -2 * np.sin(2 * t))
    assert close(derivative(field(lambda t: 3 + 0 * t)), np.zeros_like)


def test_nyquist_zeroed():
    f = field(lambda t: np.cos(128 * t))
    assert derivative(f).coeffs[-1] == 0
    assert hilbert(f).coeffs[-1] == 0


def test_velocity_of_equilibrium():
    u = velocity_from_vorticity(field(lambda t: -np.sin(t)))
    assert np.max(np.abs(u.values - np.sin(G.theta))) < 1e-12
    assert u.values[0] == 0.0


def test_velocity_of_zero():
    assert linf_norm(velocity_from_vorticity(SpectralField.zeros(G))) == 0.0


def test_velocity_of_cos2_against_symbolic_antiderivative():
    th = sympy.symbols("theta")
    # H cos 2th = sin 2th; u' = sin 2th, u(0) = 0
    u_sym = sympy.integrate(sympy.sin(2 * th), (th, 0, th))
    assert sympy.simplify(sympy.diff(u_sym, th) - sympy.sin(2 * th)) == 0
    u_exact = sympy.lambdify(th, u_sym, "numpy")
    u = velocity_from_vorticity(field(lambda t: np.cos(2 * t)))
    assert np.max(np.abs(u.values - u_exact(G.theta))) < 1e-12
    assert np.max(np.abs(u.values - (1 - np.cos(2 * G.theta)) / 2)) < 1e-12


# --- products -------------------------------------------------------------


def test_product_examples():
    s, c = field(np.sin), field(np.cos)
    assert close(dealiased_product(s, s), lambda t: (1 - np.cos(2 * t)) / 2)
    assert close(dealiased_product(s, c), lambda t: np.sin(2 * t) / 2)
    h = random_bandlimited(G, 60, np.random.default_rng(1))
    one = field(np.ones_like)
    assert np.max(np.abs(dealiased_product(one, h).coeffs - h.dealiased().coeffs)) < 1e-14


def test_product_grid_mismatch():
    with pytest.raises(GridMismatchError):
        dealiased_product(field(np.sin), SpectralField.from_function(GridSpec(128), np.sin))
    with pytest.raises(GridMismatchError):
        field(np.sin) + SpectralField.from_function(GridSpec(128), np.sin)


def _convolve(a, b, n_modes):
    # full two-sided convolution of real-field half spectra
    def two_sided(c):
        return np.concatenate([np.conj(c[:0:-1]), c])

    A, B = two_sided(a), two_sided(b)
    full = np.convolve(A, B)
    mid = len(full) // 2
    return full[mid : mid + n_modes]


@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_product_matches_convolution(seed):
    rng = np.random.default_rng(seed)
    kmax = G.n_points // 6  # product fits inside the kept band
    f = random_bandlimited(G, kmax, rng)
    g = random_bandlimited(G, kmax, rng)
    got = dealiased_product(f, g).coeffs
    want = _convolve(f.coeffs[: kmax + 1], g.coeffs[: kmax + 1], 2 * kmax + 1)
    assert np.max(np.abs(got[: 2 * kmax + 1] - want)) < 1e-12
    assert np.max(np.abs(got[2 * kmax + 1 :])) < 1e-13


@given(st.integers(min_value=0, max_value=2**32 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_product_bilinear_symmetric(seed, alpha, beta):
    rng = np.random.default_rng(seed)
    f, g, h = (random_bandlimited(G, 80, rng) for _ in range(3))
    fg = dealiased_product(f, g).coeffs
    assert np.max(np.abs(fg - dealiased_product(g, f).coeffs)) < 1e-13
    lhs = dealiased_product(alpha * f + beta * h, g).coeffs
    rhs = alpha * fg + beta * dealiased_product(h, g).coeffs
    assert np.max(np.abs(lhs - rhs)) < 1e-11


# --- properties -----------------------------------------------------------


@given(st.integers(min_value=0, max_value=2**32 - 1), st.integers(1, 127))
def test_hilbert_squared_is_minus_identity(seed, kmax):
    f = random_bandlimited(G, kmax, np.random.default_rng(seed))
    hh = hilbert(hilbert(f)).values
    assert np.max(np.abs(hh + (f.values - f.mean))) < 1e-10


@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_velocity_derivative_is_hilbert(seed):
    w = random_bandlimited(G, 100, np.random.default_rng(seed))
    u = velocity_from_vorticity(w).to_spectral()
    assert np.max(np.abs(derivative(u).values - hilbert(w).values)) < 1e-10
    assert velocity_from_vorticity(w).values[0] == 0.0


@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_roundtrip_real_spectral(seed):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(G.n_points)
    back = RealField(G, v).to_spectral().to_real().values
    assert np.max(np.abs(back - v)) <= 1e-12 * np.max(np.abs(v))


@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_point_eval_at_nodes(seed):
    rng = np.random.default_rng(seed)
    f = RealField(G, rng.standard_normal(G.n_points)).to_spectral()
    idx = rng.integers(0, G.n_points, size=8)
    for j in idx:
        assert point_eval(f, G.theta[j]) == pytest.approx(f.values[j], abs=1e-11)


def test_point_eval_examples():
    assert point_eval(field(np.sin), 0.0) == pytest.approx(0.0, abs=1e-15)
    assert point_eval(field(lambda t: np.cos(t) - 1), 0.0) == pytest.approx(0.0, abs=1e-15)
    assert point_eval(field(np.cos), np.pi) == pytest.approx(-1.0, abs=1e-14)


def test_point_eval_off_grid():
    f = field(lambda t: np.sin(3 * t) + 0.5 * np.cos(t))
    x = 0.123456
    assert point_eval(f, x) == pytest.approx(np.sin(3 * x) + 0.5 * np.cos(x), abs=1e-13)


def test_linf_examples():
    assert linf_norm(RealField.from_function(G, np.sin)) == pytest.approx(1.0, abs=1e-15)
    assert linf_norm(RealField(G, np.zeros(G.n_points))) == 0.0
    assert linf_norm(RealField.from_function(G, lambda t: 3 * np.cos(t))) == pytest.approx(3.0)


def test_fields_are_immutable():
    f = field(np.sin)
    with pytest.raises(ValueError):
        f.coeffs[1] = 0
    with pytest.raises(ValueError):
        G.theta[0] = 1.0


def test_padded_size_even():
    for n in (16, 18, 256, 250):
        m = sp.padded_size(n)
        assert m % 2 == 0 and m >= 3 * n // 2


def test_hilbert_squared_500_fields():
    rng = np.random.default_rng(500)
    worst = 0.0
    for _ in range(500):
        f = random_bandlimited(G, int(rng.integers(1, 128)), rng)
        worst = max(worst, np.max(np.abs(hilbert(hilbert(f)).values + f.values - f.mean)))
    assert worst < 1e-10
