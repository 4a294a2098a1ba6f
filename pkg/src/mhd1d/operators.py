"""
Linearized operators around the equilibrium -sin(theta).

    L f = {f, sin},   B f = {v(f), sin},   Q f = cos f + sin Hf,
    L+ = L + B,       L-(q) = L - B - 2q Q,

with {f, g} = f g' - f' g and v(f)' = Hf, v(f)(0) = 0.

Each operator is available as a pseudo-spectral action on fields (``apply``)
and as a matrix on the truncated e-basis (``assemble_matrix``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import spectral as sp
from .basis import EBasisCoeffs, from_ebasis, to_ebasis
from .spectral import GridSpec, SpectralField, dealiased_product

__all__ = [
    "OperatorTag",
    "EBasisMatrix",
    "AuditReport",
    "coefficient",
    "apply",
    "assemble_matrix",
    "quadratic_form_H0",
    "matrix_vs_spectral_audit",
    "rayleigh_constant",
    "rayleigh_sweep",
    "q_contraction_sweep",
]

_KINDS = ("L", "B", "Q", "Lplus", "Lminus")


@dataclass(frozen=True)
class OperatorTag:
    kind: str
    q: float = 0.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown operator {self.kind!r}; expected one of {_KINDS}")
        if self.kind == "Lminus":
            if not 0.0 <= self.q < 0.25:
                raise ValueError(f"Lminus needs q in [0, 1/4), got {self.q}")
        elif self.q != 0.0:
            raise ValueError(f"q only applies to Lminus, got q={self.q} for {self.kind}")

    @classmethod
    def parse(cls, text: str) -> "OperatorTag":
        """Accepts 'L', 'B', 'Q', 'Lplus', 'Lminus' or 'Lminus(0.1)'."""
        text = text.strip()
        if text.startswith("Lminus(") and text.endswith(")"):
            return cls("Lminus", float(text[len("Lminus(") : -1]))
        return cls(text)

    def __str__(self) -> str:
        return f"Lminus({self.q!r})" if self.kind == "Lminus" else self.kind


# ---------------------------------------------------------------------------
# closed-form coefficients


def _d_plus(k: int) -> Fraction:
    return Fraction((k - 1) ** 2 * (k + 1), 2 * k * k)


def _d_minus(k: int) -> Fraction:
    return Fraction((k - 1) * (k + 1) ** 2, 2 * k * k)


_COEFFS = {
    "a+": lambda k: Fraction(k + 1, 2) * (1 - Fraction(1, k)),
    "b+": lambda k: Fraction(k - 1, 2) * (1 - Fraction(1, k)),
    "a-": lambda k: Fraction(k + 1, 2) * (1 + Fraction(1, k)),
    "b-": lambda k: Fraction(k - 1, 2) * (1 + Fraction(1, k)),
    "d+": _d_plus,
    "d-": _d_minus,
    "gap+": lambda k: _d_plus(k + 1) - _d_plus(k),
    "gap-": lambda k: _d_minus(k + 1) - _d_minus(k),
}


def coefficient(kind: str, k: int, exact: bool = False):
    """Closed-form coefficient a±_k, b±_k, d±_k or gap±(k) = d±_{k+1} - d±_k."""
    kind = kind.replace("−", "-")
    if kind not in _COEFFS:
        raise ValueError(f"unknown coefficient kind {kind!r}")
    if int(k) != k or k < 1:
        raise ValueError(f"k must be an integer >= 1, got {k}")
    val = _COEFFS[kind](int(k))
    return val if exact else float(val)


# ---------------------------------------------------------------------------
# pseudo-spectral action


def _bracket_with_sin(f: SpectralField) -> SpectralField:
    grid = f.grid
    sin = SpectralField.from_function(grid, np.sin)
    cos = SpectralField.from_function(grid, np.cos)
    return dealiased_product(f, cos) - dealiased_product(sp.derivative(f), sin)


def _v(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, sp.velocity_coeffs(f.coeffs, f.grid.wavenumbers))


def _apply_q(f: SpectralField) -> SpectralField:
    grid = f.grid
    sin = SpectralField.from_function(grid, np.sin)
    cos = SpectralField.from_function(grid, np.cos)
    return dealiased_product(cos, f) + dealiased_product(sin, sp.hilbert(f))


def apply(tag: OperatorTag, f: SpectralField) -> SpectralField:
    if isinstance(tag, str):
        tag = OperatorTag.parse(tag)
    if tag.kind == "L":
        return _bracket_with_sin(f)
    if tag.kind == "B":
        return _bracket_with_sin(_v(f))
    if tag.kind == "Q":
        return _apply_q(f)
    if tag.kind == "Lplus":
        return _bracket_with_sin(f + _v(f))
    out = _bracket_with_sin(f - _v(f))
    if tag.q:
        out = out - 2.0 * tag.q * _apply_q(f)
    return out


# ---------------------------------------------------------------------------
# e-basis matrices


@dataclass(frozen=True, eq=False)
class EBasisMatrix:
    """Operator restricted to span{e_{s,0..K}} and span{e_{c,0..K}}.

    Index 0 of each block is the Z1 (sine) or Z2 (cosine) direction.
    ``spill_s``/``spill_c`` hold the coefficient of e_{.,K+1} produced by
    column K, which the truncated matrix drops.
    """

    tag: OperatorTag
    K: int
    s_block: np.ndarray
    c_block: np.ndarray
    spill_s: float = 0.0
    spill_c: float = 0.0

    def __post_init__(self):
        for name in ("s_block", "c_block"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def matvec(self, c: EBasisCoeffs) -> EBasisCoeffs:
        if c.K != self.K:
            raise ValueError(f"coefficient order {c.K} does not match matrix order {self.K}")
        vs = self.s_block @ np.concatenate([[c.s0], c.s])
        vc = self.c_block @ np.concatenate([[c.c0], c.c])
        return EBasisCoeffs(self.K, vs[0], vc[0], vs[1:], vc[1:])

    def dense(self) -> np.ndarray:
        """Block-diagonal matrix in the ``EBasisCoeffs.as_vector`` layout."""
        n = self.K + 1
        out = np.zeros((2 * n, 2 * n))
        out[:n, :n] = self.s_block
        out[n:, n:] = self.c_block
        return out

    @property
    def s0_row(self) -> np.ndarray:
        return self.s_block[0]

    @property
    def c0_row(self) -> np.ndarray:
        return self.c_block[0]

    def to_json(self) -> dict:
        def triplets(block):
            i, j = np.nonzero(block)
            return [[int(a), int(b), float(block[a, b])] for a, b in zip(i, j)]

        return {
            "tag": self.tag.kind,
            "K": self.K,
            "q": self.tag.q,
            "s_block": triplets(self.s_block),
            "c_block": triplets(self.c_block),
            "s0_row": self.s0_row.tolist(),
            "c0_row": self.c0_row.tolist(),
            "spill": {"s": self.spill_s, "c": self.spill_c},
        }


def _blocks_plus_minus(K: int, sign: int):
    """Exact blocks of L+ (sign=+1) or L-(0) (sign=-1) as Fraction arrays."""
    d = _d_plus if sign > 0 else _d_minus
    zero = Fraction(0)
    s = [[zero] * (K + 1) for _ in range(K + 1)]
    for j in range(1, K + 1):
        # L e_j = -d_{j+1} e_{j+1} - gap_j e_j + d_j e_{j-1}
        if j + 1 <= K:
            s[j + 1][j] = -d(j + 1)
        s[j][j] = -(d(j + 1) - d(j))
        s[j - 1][j] += d(j)
    c = [row[:] for row in s]
    for k in range(1, K + 1):
        if sign > 0:
            c[0][k] += Fraction(k * k - k - 1, k * k * (k + 1) ** 2)
        else:
            c[0][k] += Fraction(k * k + 3 * k + 1, k * k * (k + 1) ** 2)
    if sign < 0:
        c[0][0] = Fraction(-2)
    return s, c, -d(K + 1)


def _blocks_q(K: int):
    """Exact blocks of Q; the k = 1 columns follow the Fourier shift rule."""
    zero = Fraction(0)
    s = [[zero] * (K + 1) for _ in range(K + 1)]
    c = [[zero] * (K + 1) for _ in range(K + 1)]
    c[0][0] = Fraction(-1)
    for k in range(1, K + 1):
        w = Fraction(1, k * (k + 1))
        s[0][k] += w
        c[0][k] += 2 * w
        if k >= 2:
            s[k - 1][k] += Fraction(k, k + 1)
            c[k - 1][k] += Fraction(k, k + 1)
            for j in range(1, k - 1):
                s[j][k] += w
                c[j][k] += w
    return s, c


def _to_float(block) -> np.ndarray:
    return np.array([[float(x) for x in row] for row in block])


def assemble_matrix(tag: OperatorTag, K: int) -> EBasisMatrix:
    if isinstance(tag, str):
        tag = OperatorTag.parse(tag)
    if int(K) != K or K < 2:
        raise ValueError(f"K must be an integer >= 2, got {K}")
    return _assemble(tag, int(K))


@lru_cache(maxsize=64)
def _assemble(tag: OperatorTag, K: int) -> EBasisMatrix:
    sp_, cp_, spill_p = _blocks_plus_minus(K, +1)
    sm_, cm_, spill_m = _blocks_plus_minus(K, -1)
    half = Fraction(1, 2)

    def combine(x, y, wx, wy):
        return [[wx * a + wy * b for a, b in zip(ra, rb)] for ra, rb in zip(x, y)]

    if tag.kind == "Lplus":
        s, c, spill = sp_, cp_, spill_p
    elif tag.kind == "L":
        s, c = combine(sp_, sm_, half, half), combine(cp_, cm_, half, half)
        spill = half * (spill_p + spill_m)
    elif tag.kind == "B":
        s, c = combine(sp_, sm_, half, -half), combine(cp_, cm_, half, -half)
        spill = half * (spill_p - spill_m)
    elif tag.kind == "Q":
        s, c = _blocks_q(K)
        spill = Fraction(0)
    else:
        s, c, spill = sm_, cm_, spill_m
        if tag.q:
            qs, qc = _blocks_q(K)
            # Fraction(float) is the exact binary value of q
            w = -2 * Fraction(tag.q)
            s = combine(s, qs, Fraction(1), w)
            c = combine(c, qc, Fraction(1), w)
    return EBasisMatrix(tag, K, _to_float(s), _to_float(c), float(spill), float(spill))


def quadratic_form_H0(tag: OperatorTag, c: EBasisCoeffs) -> float:
    """<c, A c> over the H0 coordinates (s_k, c_k with k >= 1)."""
    Ac = assemble_matrix(tag, max(c.K, 2)).matvec(_pad_to(c, max(c.K, 2)))
    cc = _pad_to(c, Ac.K)
    return float(np.dot(cc.s, Ac.s) + np.dot(cc.c, Ac.c))


def _pad_to(c: EBasisCoeffs, K: int) -> EBasisCoeffs:
    if c.K == K:
        return c
    s = np.zeros(K)
    cc = np.zeros(K)
    s[: c.K] = c.s
    cc[: c.K] = c.c
    return EBasisCoeffs(K, c.s0, c.c0, s, cc)


# ---------------------------------------------------------------------------
# cross-validation


@dataclass
class AuditReport:
    tag: str
    K: int
    n_points: int
    trials: int
    tol: float
    max_discrepancy: float
    max_spill_discrepancy: float
    passed: bool
    worst_index: list = field(default_factory=list)

    def to_json(self) -> dict:
        return dict(self.__dict__)


def matrix_vs_spectral_audit(
    tag: OperatorTag,
    K: int,
    trials: int,
    tol: float,
    n_points: int = 256,
    rng: np.random.Generator | None = None,
) -> AuditReport:
    """Compare the pseudo-spectral action with the assembled matrix on random vectors.

    Rows 0..K are compared directly; row K+1 (the dropped spill) is compared
    against ``spill * c_K``.
    """
    if isinstance(tag, str):
        tag = OperatorTag.parse(tag)
    grid = GridSpec(n_points)
    # results reach Fourier mode K + 2; products need 3(K + 2) <= N
    if 3 * (K + 2) > grid.n_points:
        raise ValueError(f"N={n_points} cannot resolve 3(K+2) = {3 * (K + 2)} modes")
    rng = np.random.default_rng() if rng is None else rng
    A = assemble_matrix(tag, K)
    worst = 0.0
    worst_spill = 0.0
    worst_idx: list = []
    for _ in range(trials):
        vec = rng.standard_normal(2 * (K + 1))
        c = EBasisCoeffs.from_vector(vec)
        g = apply(tag, from_ebasis(c, grid))
        got = to_ebasis(g, K + 1)
        want = A.matvec(c)
        got_vec = np.concatenate([[got.s0], got.s[:K], [got.c0], got.c[:K]])
        diff = np.abs(got_vec - want.as_vector())
        if diff.max() > worst:
            worst = float(diff.max())
            worst_idx = [int(np.argmax(diff))]
        spill = max(abs(got.s[K] - A.spill_s * c.s[K - 1]), abs(got.c[K] - A.spill_c * c.c[K - 1]))
        worst_spill = max(worst_spill, float(spill))
    passed = worst < tol and worst_spill < tol
    return AuditReport(str(tag), K, n_points, trials, tol, worst, worst_spill, passed, worst_idx)


def rayleigh_constant(tag: OperatorTag) -> float:
    """Decay constant c with <f, A f>_H0 <= -c [f]^2 on H0."""
    if isinstance(tag, str):
        tag = OperatorTag.parse(tag)
    if tag.kind == "Lplus":
        return 0.375
    if tag.kind == "Lminus":
        return (1.0 - 4.0 * tag.q) / 2.0
    raise ValueError(f"no decay constant for {tag}")


def rayleigh_sweep(tag: OperatorTag, K: int, trials: int, rng: np.random.Generator | None = None) -> dict:
    """Worst excess of <c, A c>_H0 + const*[c]^2 over random H0 vectors."""
    if isinstance(tag, str):
        tag = OperatorTag.parse(tag)
    rng = np.random.default_rng() if rng is None else rng
    const = rayleigh_constant(tag)
    worst = -np.inf
    for _ in range(trials):
        c = EBasisCoeffs(K, 0.0, 0.0, rng.standard_normal(K), rng.standard_normal(K))
        norm2 = float(np.dot(c.s, c.s) + np.dot(c.c, c.c))
        worst = max(worst, quadratic_form_H0(tag, c) + const * norm2)
    return {"tag": str(tag), "K": K, "trials": trials, "constant": const, "max_excess": float(worst)}


def q_contraction_sweep(K: int, trials: int, rng: np.random.Generator | None = None) -> dict:
    """Worst [P_H0 Q c] - [c]_H0 over random coefficient vectors."""
    rng = np.random.default_rng() if rng is None else rng
    Q = assemble_matrix(OperatorTag("Q"), K)
    worst = -np.inf
    for _ in range(trials):
        c = EBasisCoeffs.from_vector(rng.standard_normal(2 * (K + 1)))
        Qc = Q.matvec(c)
        lhs = math.sqrt(float(np.dot(Qc.s, Qc.s) + np.dot(Qc.c, Qc.c)))
        rhs = math.sqrt(float(np.dot(c.s, c.s) + np.dot(c.c, c.c)))
        worst = max(worst, lhs - rhs)
    return {"K": K, "trials": trials, "max_excess": float(worst)}
