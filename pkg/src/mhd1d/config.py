"""
Flat ``key = value`` run configuration and the initial-data mini-language.

An initial-data spec is a comma-separated list of ``name=amplitude`` terms:

    es<k>, ec<k>   e-basis functions (k >= 0; es0 = sin, ec0 = cos - 1)
    sin<k>, cos<k> Fourier modes (k >= 1)
    const          the constant function

for example ``es1=1, ec1=1, ec2=1`` or ``sin1=-1, cos2=0.05``.
"""

from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, fields

import numpy as np

from .basis import coeffs_from_ebasis
from .records import fmt
from .spectral import GridSpec, SpectralField

__all__ = ["RunConfig", "ConfigError", "SCENARIOS", "parse_init", "build_initial", "parse_config", "emit_config"]

SCENARIOS = (
    "q0_stability",
    "qpos_stability",
    "clm_validation",
    "degregorio_reduction",
    "mollified_convergence",
    "operator_audit",
    "custom",
)


class ConfigError(ValueError):
    """Invalid configuration; the CLI maps it to exit status 4."""


@dataclass(frozen=True)
class RunConfig:
    scenario: str = "custom"
    N: int = 256
    K: int = 64
    a: float = 1.0
    p: float = 1.0
    q: float = 0.0
    eps: float = 0.01
    formulation: str = "perturbation"
    closure: str = "ebasis"
    moll_width: float = 0.0
    mollifier: str = "gaussian"
    dt: float = 1e-3
    T: float = 30.0
    output_stride: int = 100
    init_plus: str = "es1=1, ec1=1, ec2=1"
    init_minus: str = "es1=1, ec1=1, ec2=1"
    normalize: bool = True
    mean_zero: bool = True
    Gamma: float = 0.0  # 0 selects the default from the initial data
    beta: float = 0.0  # 0 selects the scenario default
    fit_t0: float = 5.0
    min_r2: float = 0.99
    tail_from: float = 0.0  # 0 selects T/2
    drift_tol: float = 1e-8
    tail_tol: float = 1e-6
    widths: str = "0.2, 0.1, 0.05, 0"
    trials: int = 100
    tol: float = 1e-9
    rayleigh_trials: int = 1000
    seed: int = 0
    out_dir: str = "out"

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    @property
    def width_list(self) -> list:
        return [float(w) for w in self.widths.split(",") if w.strip()]


_PRESETS = {
    "q0_stability": dict(q=0.0, p=1.0, T=30.0),
    "qpos_stability": dict(q=0.1, p=0.9, T=40.0),
    "clm_validation": dict(
        a=0.0, p=1.0, q=0.0, formulation="physical", closure="fourier", T=2.0,
        init_plus="cos1=1", init_minus="cos1=1", normalize=False, mean_zero=False,
    ),
    "degregorio_reduction": dict(
        q=0.0, formulation="physical", closure="fourier", T=10.0,
        init_plus="sin1=-1, cos2=0.05, sin3=0.02", init_minus="sin1=-1, cos2=0.05, sin3=0.02",
        normalize=False, mean_zero=False,
    ),
    "mollified_convergence": dict(
        q=0.0, formulation="physical", closure="fourier", T=1.0, output_stride=1000,
        init_plus="sin1=-1, cos2=0.1, sin3=0.05", init_minus="sin1=-1, cos2=-0.05, sin2=0.05",
        normalize=False, mean_zero=False,
    ),
    "operator_audit": dict(K=32, formulation="physical", closure="fourier"),
    "custom": {},
}


def preset(scenario: str) -> RunConfig:
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
    return RunConfig(scenario=scenario, **_PRESETS[scenario])


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(key: str, text: str):
    typ = _TYPES[key]
    try:
        if typ in ("int", int):
            return int(text)
        if typ in ("float", float):
            val = float(text)
            if not math.isfinite(val):
                raise ValueError
            return val
        if typ in ("bool", bool):
            low = text.lower()
            if low in ("true", "yes", "1"):
                return True
            if low in ("false", "no", "0"):
                return False
            raise ValueError
    except ValueError:
        raise ConfigError(f"bad value for {key}: {text!r}") from None
    return text


def parse_config(text: str, overrides: dict | None = None) -> RunConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    items = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, val = (x.strip() for x in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        items[key] = val
    items.update({k: str(v) for k, v in (overrides or {}).items()})
    cfg = preset(items.pop("scenario", "custom"))
    return cfg.replace(**{k: _convert(k, v) for k, v in items.items()})


def emit_config(cfg: RunConfig) -> str:
    lines = []
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        lines.append(f"{f.name} = {fmt(v) if not isinstance(v, str) else v}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# initial data

_TERM = re.compile(r"^(es|ec|sin|cos|const)(\d*)$")


def parse_init(spec: str) -> list:
    """[(family, k, amplitude)] from an initial-data spec."""
    terms = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ConfigError(f"initial-data term {part!r} needs name=amplitude")
        name, amp = (x.strip() for x in part.split("=", 1))
        mt = _TERM.match(name)
        if not mt:
            raise ConfigError(f"unknown initial-data term {name!r}")
        fam, idx = mt.group(1), mt.group(2)
        if fam == "const":
            if idx:
                raise ConfigError("const takes no index")
            k = 0
        else:
            if not idx:
                raise ConfigError(f"{fam} needs an index")
            k = int(idx)
            if fam in ("sin", "cos") and k < 1:
                raise ConfigError(f"{name}: Fourier modes start at 1")
        try:
            a = float(amp)
        except ValueError:
            raise ConfigError(f"bad amplitude {amp!r} for {name}") from None
        terms.append((fam, k, a))
    return terms


def build_initial(spec: str, grid: GridSpec, normalize: bool = False, mean_zero: bool = False) -> SpectralField:
    """Field described by ``spec``.

    ``normalize`` rescales the e-basis part to unit H0 seminorm (before the
    Z2 part is set). ``mean_zero`` then chooses the ec0 amplitude so that the
    field has zero integral.
    """
    terms = parse_init(spec)
    kmax = max([k for fam, k, _ in terms if fam in ("es", "ec")], default=0)
    K = max(kmax, 1)
    s0 = c0 = 0.0
    s = np.zeros(K)
    c = np.zeros(K)
    extra = np.zeros(grid.n_modes, dtype=complex)
    for fam, k, amp in terms:
        if fam == "es":
            if k == 0:
                s0 += amp
            else:
                s[k - 1] += amp
        elif fam == "ec":
            if k == 0:
                c0 += amp
            else:
                c[k - 1] += amp
        else:
            if k >= grid.n_modes - 1 or k > grid.k_max:
                raise ConfigError(f"mode {k} is not resolved on N={grid.n_points}")
            if fam == "sin":
                extra[k] += -0.5j * amp
            elif fam == "cos":
                extra[k] += 0.5 * amp
            else:
                extra[0] += amp
    if K + 1 > grid.k_max:
        raise ConfigError(f"e-basis order {K} is not resolved on N={grid.n_points}")
    if normalize:
        norm = math.sqrt(float(np.dot(s, s) + np.dot(c, c)))
        if norm == 0:
            raise ConfigError("cannot normalize: the H0 part of the initial data is zero")
        s, c = s / norm, c / norm
    if mean_zero:
        k = np.arange(1, K + 1, dtype=float)
        # mean identity: integral = 2 pi (sum c_k/(k(k+1)) - c0) + 2 pi * (Fourier constant)
        c0 = float(np.sum(c / (k * (k + 1)))) + float(extra[0].real)
    coeffs = coeffs_from_ebasis(s0, c0, s, c, grid.n_modes) + extra
    return SpectralField(grid, coeffs)
