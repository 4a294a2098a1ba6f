"""Pseudo-spectral simulator and e-basis operator lab for the 1-D MHD model

    w+_t + a u- w+_th = p w+ Hw- + q w- Hw+   (and + <-> -)

on the torus, linearized around w = -sin(theta).
"""

from .basis import EBasisCoeffs, SpaceTag, from_ebasis, to_ebasis
from .dynamics import ModelParams, SolverState, TimeGrid, integrate
from .operators import OperatorTag, apply, assemble_matrix
from .records import RunRecord
from .spectral import GridSpec, RealField, SpectralField

__version__ = "0.1.0"

__all__ = [
    "GridSpec",
    "RealField",
    "SpectralField",
    "EBasisCoeffs",
    "SpaceTag",
    "to_ebasis",
    "from_ebasis",
    "OperatorTag",
    "apply",
    "assemble_matrix",
    "ModelParams",
    "SolverState",
    "TimeGrid",
    "integrate",
    "RunRecord",
]
