"""
Dense spectral calculus for a DiscreteOperator.

Every operator function g(L) is applied as Q diag(g(lambda)) Q^T.  Kernel
columns are returned in density units (matrix entry / cell volume) so that
cell sums times the cell volume mimic integrals.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .grid import DiscreteOperator, GridSpec

log = logging.getLogger(__name__)

ZERO_EIG_TOL = 1e-10


@dataclass
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    grid: GridSpec
    operator_hash: str = ""
    raw_min: float = 0.0

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    @property
    def lam_max(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def zero_mask(self) -> np.ndarray:
        """Eigenvalues treated as exact zeros (the kernel of L)."""
        return self.eigenvalues <= ZERO_EIG_TOL * max(self.lam_max, 1.0)

    def coefficients(self, f: np.ndarray) -> np.ndarray:
        return self.eigenvectors.T @ f

    def synthesize(self, c: np.ndarray) -> np.ndarray:
        return self.eigenvectors @ c

    def apply(self, multiplier, f: np.ndarray) -> np.ndarray:
        """g(L) f for a multiplier given as an array over the spectrum or a callable."""
        g = multiplier(self.eigenvalues) if callable(multiplier) else np.asarray(multiplier)
        c = self.coefficients(f)
        if c.ndim == 1:
            return self.synthesize(g * c)
        return self.synthesize(g[:, None] * c)

    def column(self, multiplier, y: int) -> np.ndarray:
        """Column y of g(L) in density units."""
        g = multiplier(self.eigenvalues) if callable(multiplier) else np.asarray(multiplier)
        return self.synthesize(g * self.eigenvectors[y]) / self.grid.cell_volume

    def columns(self, multiplier, ys) -> np.ndarray:
        g = multiplier(self.eigenvalues) if callable(multiplier) else np.asarray(multiplier)
        ys = np.asarray(ys)
        return self.synthesize(g[:, None] * self.eigenvectors[ys].T) / self.grid.cell_volume

    def power(self, s: float) -> np.ndarray:
        """lambda^s with 0^s := 0 on the kernel."""
        lam = np.where(self.zero_mask, 0.0, self.eigenvalues)
        out = np.zeros_like(lam)
        nz = ~self.zero_mask
        out[nz] = lam[nz] ** s
        return out

    def reconstruction_error(self, matrix) -> float:
        m = matrix.toarray() if hasattr(matrix, "toarray") else np.asarray(matrix)
        q = self.eigenvectors
        return float(np.abs(m - (q * self.eigenvalues) @ q.T).max())

    def gram_error(self) -> float:
        q = self.eigenvectors
        return float(np.abs(q.T @ q - np.eye(self.n)).max())


@dataclass
class KernelSlice:
    values: np.ndarray
    grid: GridSpec
    source_point: int
    t: float = 0.0
    alpha: float = 1.0
    beta: float = 0.0
    path: str = "spectral"
    meta: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# decomposition and disk cache
# ---------------------------------------------------------------------------


def _cache_paths(cache_dir, key):
    base = Path(cache_dir) / f"spectrum_{key}"
    return base.with_suffix(".bin"), base.with_suffix(".json")


def save_decomposition(spec: SpectralDecomposition, cache_dir) -> Path:
    """Binary layout: n, eigenvalues, eigenvectors row-major; little-endian float64."""
    Path(cache_dir).mkdir(parents=True, exist_ok=True)
    binp, jsonp = _cache_paths(cache_dir, spec.operator_hash)
    with open(binp, "wb") as fh:
        fh.write(np.asarray([spec.n], dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(spec.eigenvalues, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(spec.eigenvectors, dtype="<f8").tobytes())
    jsonp.write_text(
        json.dumps({"operator_hash": spec.operator_hash, "grid": spec.grid.to_json(), "raw_min": spec.raw_min}, indent=2, sort_keys=True)
    )
    return binp


def load_decomposition(cache_dir, key: str, grid: GridSpec) -> Optional[SpectralDecomposition]:
    binp, jsonp = _cache_paths(cache_dir, key)
    if not binp.exists() or not jsonp.exists():
        return None
    meta = json.loads(jsonp.read_text())
    if meta.get("operator_hash") != key:
        log.warning("cache sidecar hash mismatch for %s; rebuilding", key)
        return None
    raw = np.fromfile(binp, dtype="<f8")
    n = int(raw[0])
    if raw.size != 1 + n + n * n or n != grid.n_points:
        log.warning("cache file %s has the wrong size; rebuilding", binp)
        return None
    return SpectralDecomposition(raw[1:1 + n].copy(), raw[1 + n:].reshape(n, n), grid, key, meta.get("raw_min", 0.0))


def decompose(op: DiscreteOperator, cache_dir=None) -> SpectralDecomposition:
    """Dense symmetric eigendecomposition, optionally cached by operator hash."""
    key = op.operator_hash()
    if cache_dir is not None:
        cached = load_decomposition(cache_dir, key, op.grid)
        if cached is not None:
            return cached
    m = op.matrix.toarray()
    w, q = scipy.linalg.eigh(m, driver="evr", overwrite_a=True, check_finite=False)
    del m
    raw_min = float(w[0])
    if raw_min < -ZERO_EIG_TOL * max(w[-1], 1.0):
        raise ValueError(f"operator has a negative eigenvalue {raw_min:g}")
    w = np.maximum(w, 0.0)
    spec = SpectralDecomposition(w, q, op.grid, key, raw_min)
    if cache_dir is not None:
        save_decomposition(spec, cache_dir)
    return spec


# ---------------------------------------------------------------------------
# semigroups and powers
# ---------------------------------------------------------------------------


def heat_multiplier(t: float) -> Callable:
    return lambda lam: np.exp(-t * lam)


def heat_apply(spec: SpectralDecomposition, t: float, f: np.ndarray) -> np.ndarray:
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return np.array(f, dtype=float, copy=True)
    return spec.apply(heat_multiplier(t), f)


def heat_kernel_column(spec: SpectralDecomposition, t: float, y: int) -> KernelSlice:
    if t <= 0:
        raise ValueError("t must be positive")
    return KernelSlice(spec.column(heat_multiplier(t), y), spec.grid, y, t=t)


def q_multiplier(t: float, m: int) -> Callable:
    return lambda lam: (-t * lam) ** m * np.exp(-t * lam)


def q_kernel(spec: SpectralDecomposition, t: float, m: int, y: int) -> KernelSlice:
    """Kernel of t^m d^m/dt^m e^{-tL}."""
    if t <= 0 or m < 1:
        raise ValueError("need t > 0 and m >= 1")
    return KernelSlice(spec.column(q_multiplier(t, m), y), spec.grid, y, t=t, beta=m, meta={"m": m})


def frac_power_apply(spec: SpectralDecomposition, s: float, f: np.ndarray) -> np.ndarray:
    if s <= 0:
        raise ValueError("s must be positive")
    return spec.apply(spec.power(s), f)


def frac_heat_multiplier(spec: SpectralDecomposition, alpha: float, t: float) -> np.ndarray:
    return np.exp(-t * spec.power(alpha))


def frac_heat_apply_spectral(spec: SpectralDecomposition, alpha: float, t: float, f: np.ndarray) -> np.ndarray:
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return np.array(f, dtype=float, copy=True)
    return spec.apply(frac_heat_multiplier(spec, alpha, t), f)


def frac_heat_column_spectral(spec: SpectralDecomposition, alpha: float, t: float, y: int) -> KernelSlice:
    return KernelSlice(spec.column(frac_heat_multiplier(spec, alpha, t), y), spec.grid, y, t=t, alpha=alpha)


# ---------------------------------------------------------------------------
# spatial gradients
# ---------------------------------------------------------------------------


def gradient(grid: GridSpec, f: np.ndarray) -> np.ndarray:
    """Centered periodic differences, shape (n_points, dim) (plus trailing dims of f)."""
    parts = []
    for k in range(grid.dim):
        h = grid.spacing[k]
        parts.append((grid.shift(f, k, 1) - grid.shift(f, k, -1)) / (2 * h))
    return np.stack(parts, axis=1)


def gradient_of_slice(slice_: KernelSlice, grid: Optional[GridSpec] = None):
    """Returns (gradient field (n_points, dim), magnitude field)."""
    grid = slice_.grid if grid is None else grid
    g = gradient(grid, slice_.values)
    return g, np.linalg.norm(g, axis=1)
