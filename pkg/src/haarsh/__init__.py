"""Deterministic Haar-series potentials on Z^d and certified localization checks."""

from .hull import HullParams, hull, hull_truncated, potential
from .lattice import LatticeCube, LocalOperator, assemble, eigensystem
from .schedule import ModelParams, ScaleSchedule
from .theta import ThetaField
from .torus import golden_mean

__version__ = "0.1.0"

__all__ = [
    "HullParams", "LatticeCube", "LocalOperator", "ModelParams", "ScaleSchedule",
    "ThetaField", "assemble", "eigensystem", "golden_mean", "hull", "hull_truncated",
    "potential", "__version__",
]
