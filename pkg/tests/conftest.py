from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import pytest

from subheat.config import load_config
from subheat.grid import GridSpec, assemble_operator, make_coefficient, make_potential
from subheat.pipeline import Lab
from subheat.spectral import decompose


def cache_dir() -> str:
    return os.environ.get("SUBHEAT_CACHE") or str(Path.home() / ".cache" / "subheat")


@pytest.fixture(scope="session")
def lab():
    """The default configuration, sharing the on-disk eigendecomposition cache."""
    cfg = load_config(overrides={"cache_dir": cache_dir()}, environ={})
    return Lab(cfg)


@pytest.fixture(scope="session")
def grid8():
    return GridSpec.cube(3, 8)


@pytest.fixture(scope="session")
def spec8_free(grid8):
    """8^3 torus, A = I, V = 0."""
    return decompose(assemble_operator(grid8, make_coefficient(grid8, "identity")))


@pytest.fixture(scope="session")
def spec8_spike(grid8):
    """8^3 torus, shear A, spike V."""
    coeff = make_coefficient(grid8, "shear", amplitude=0.3, phase=np.pi / 2)
    V = make_potential(grid8, "spike", center=[0.5] * 3, width=0.15, height=30.0, background=2.0)
    return decompose(assemble_operator(grid8, coeff, V))


@pytest.fixture(scope="session")
def grid1d():
    return GridSpec.cube(1, 64)


@pytest.fixture(scope="session")
def spec1d_free(grid1d):
    return decompose(assemble_operator(grid1d, make_coefficient(grid1d, "identity")))
