"""Spectral verification of heat-semigroup and fractional-kernel estimates on periodic grids."""

from __future__ import annotations

__version__ = "0.1.0"

from .config import RunConfig, load_config
from .estimators import FractionalPower, HeatSemigroup
from .grid import GridSpec, assemble_operator, make_coefficient, make_potential
from .reports import BoundReport, BoundSpec
from .spectral import SpectralDecomposition, decompose

__all__ = [
    "BoundReport",
    "BoundSpec",
    "FractionalPower",
    "GridSpec",
    "HeatSemigroup",
    "RunConfig",
    "SpectralDecomposition",
    "__version__",
    "assemble_operator",
    "decompose",
    "load_config",
    "make_coefficient",
    "make_potential",
]
