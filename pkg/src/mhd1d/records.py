"""Time-series container shared by the integrator and the diagnostics."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["RunRecord", "CSV_COLUMNS", "fmt"]

# exact column order of the primary CSV
CSV_COLUMNS = (
    "t",
    "E_H0",
    "etaP_H0",
    "etaM_H0",
    "etaM_c0",
    "etaM_s0",
    "etaP_mean",
    "etaP_at0",
    "etaM_at0",
    "bkm",
    "bkm_int",
    "h",
)


def fmt(x) -> str:
    """Full double precision, 17 significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


@dataclass
class RunRecord:
    """Time-ordered rows of named scalar diagnostics.

    ``blowup_t`` is set when the run was cut short by a blow-up signal; the
    rows stored before it are all finite.
    """

    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    blowup_t: float | None = None
    final_state: object = None

    def append(self, row: dict) -> None:
        t = float(row["t"])
        if self.rows and not t > self.rows[-1]["t"]:
            raise ValueError(f"sample times must increase strictly: {t} after {self.rows[-1]['t']}")
        self.rows.append(dict(row))

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def columns(self) -> list:
        seen = {}
        for r in self.rows:
            for k in r:
                seen.setdefault(k, None)
        return list(seen)

    def column(self, name: str) -> np.ndarray:
        return np.array([r.get(name, np.nan) for r in self.rows], dtype=float)

    @property
    def t(self) -> np.ndarray:
        return self.column("t")

    def to_csv(self, columns=None) -> str:
        """CSV text; defaults to the canonical columns, missing values as nan."""
        cols = list(CSV_COLUMNS if columns is None else columns)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in self.rows:
            w.writerow([fmt(r.get(c, float("nan"))) for c in cols])
        return buf.getvalue()

    def extended_csv(self) -> str:
        """Every recorded column, canonical ones first."""
        extra = [c for c in self.columns if c not in CSV_COLUMNS]
        return self.to_csv(list(CSV_COLUMNS) + extra)

    @classmethod
    def from_csv(cls, text: str) -> "RunRecord":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        rec = cls()
        for line in reader:
            rec.append({k: float(v) for k, v in zip(header, line)})
        return rec
