"""
Periodic grids and the discrete operator L = -div(A(x) grad) + V(x).

The torus [0, W_1) x ... x [0, W_d) stands in for R^n.  Grid functions are
flat float64 arrays in C order over ``grid.sizes``.

The operator is assembled in energy form

    M = 1/2 (G+^T A G+ + G-^T A G-) + diag(V)

where G+ / G- stack the periodic forward / backward differences.  On the
diagonal blocks this is the flux-form stencil with arithmetic face averages
of a_ii; the off-diagonal blocks are the average of the (+,+) and (-,-)
cross stencils.  The form is symmetric, positive semidefinite for
pointwise positive definite A, and annihilates constants when V = 0.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import sparse

DEFAULT_MAX_POINTS = 8192


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    dim: int
    sizes: tuple
    spacing: tuple
    max_points: int = DEFAULT_MAX_POINTS

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        spacing = tuple(float(h) for h in self.spacing)
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "spacing", spacing)
        if not 1 <= self.dim <= 3:
            raise GridError(f"dim must be 1, 2 or 3, got {self.dim}")
        if len(sizes) != self.dim or len(spacing) != self.dim:
            raise GridError("sizes and spacing need one entry per axis")
        if min(sizes) < 4:
            raise GridError(f"need at least 4 points per axis, got {sizes}")
        if min(spacing) <= 0:
            raise GridError("spacing must be positive")
        if self.n_points > self.max_points:
            raise GridError(
                f"{self.n_points} points exceeds the cap of {self.max_points}"
            )

    @classmethod
    def cube(cls, dim: int, n: int, width: float = 1.0, **kw) -> "GridSpec":
        """Equal-sided grid with ``n`` points per axis on a torus of side ``width``."""
        return cls(dim, (n,) * dim, (width / n,) * dim, **kw)

    @property
    def n_points(self) -> int:
        return int(np.prod(self.sizes))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def widths(self) -> np.ndarray:
        return np.asarray(self.sizes) * np.asarray(self.spacing)

    @property
    def half_width(self) -> float:
        """Largest radius for which a ball does not wrap onto itself."""
        return float(self.widths.min() / 2)

    def coords(self) -> np.ndarray:
        """Point coordinates, shape (n_points, dim)."""
        axes = [np.arange(n) * h for n, h in zip(self.sizes, self.spacing)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def index(self, multi_index: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(int(i) % n for i, n in zip(multi_index, self.sizes)), self.sizes))

    def multi_index(self, flat: int) -> tuple:
        return tuple(int(i) for i in np.unravel_index(int(flat), self.sizes))

    def center_index(self) -> int:
        return self.index([n // 2 for n in self.sizes])

    def nearest_index(self, position: Sequence[float]) -> int:
        """Grid point closest to a physical position (wrapped onto the torus)."""
        pos = np.asarray(position, dtype=float)
        return self.index([int(np.rint(p / h)) for p, h in zip(pos, self.spacing)])

    def displacement(self, y: int) -> np.ndarray:
        """Torus displacement x - y for every grid point x, wrapped to [-W/2, W/2)."""
        x = self.coords()
        d = x - x[y]
        w = self.widths
        return d - w * np.floor(d / w + 0.5)

    def distance(self, y: int) -> np.ndarray:
        return np.linalg.norm(self.displacement(y), axis=1)

    def shift(self, f: np.ndarray, axis: int, steps: int) -> np.ndarray:
        """Periodic shift: result[x] = f[x + steps * e_axis]."""
        g = np.reshape(f, self.sizes + np.shape(f)[1:])
        return np.roll(g, -steps, axis=axis).reshape(np.shape(f))

    def to_json(self) -> dict:
        return {"dim": self.dim, "sizes": list(self.sizes), "spacing": list(self.spacing)}

    @classmethod
    def from_json(cls, d: dict, max_points: int = DEFAULT_MAX_POINTS) -> "GridSpec":
        sizes = d["sizes"]
        dim = int(d.get("dim", len(sizes)))
        if "spacing" in d:
            spacing = d["spacing"]
        else:
            width = d.get("width", 1.0)
            widths = width if isinstance(width, list) else [width] * dim
            spacing = [w / n for w, n in zip(widths, sizes)]
        if isinstance(spacing, (int, float)):
            spacing = [spacing] * dim
        return cls(dim, tuple(sizes), tuple(spacing), max_points=max_points)


@dataclass
class CoefficientField:
    """Symmetric d x d coefficient matrix per grid point, shape (n_points, d, d)."""

    values: np.ndarray
    lambda_ell: float = 1.0
    holder_K: float = 1.0
    name: str = "custom"
    func: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)


@dataclass
class A3Report:
    periodic_ok: bool
    divergence_residual: float


@dataclass
class DiscreteOperator:
    matrix: sparse.csr_matrix
    grid: GridSpec
    has_potential: bool
    provenance: dict
    potential: np.ndarray
    coefficient: CoefficientField

    @property
    def n(self) -> int:
        return self.grid.n_points

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def operator_hash(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps(self.grid.to_json(), sort_keys=True).encode())
        m = self.matrix.tocsr()
        m.sort_indices()
        for arr in (m.indptr, m.indices, m.data):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()[:32]


# ---------------------------------------------------------------------------
# coefficient and potential generators
# ---------------------------------------------------------------------------


def _ellipticity(values: np.ndarray) -> float:
    w = np.linalg.eigvalsh(values)
    if w.max() <= 0:
        return float(w.min())
    return float(min(w.min(), 1.0 / w.max()))


def _field_from_func(grid: GridSpec, func, name: str) -> CoefficientField:
    values = func(grid.coords())
    return CoefficientField(values, _ellipticity(values), 1.0, name, func)


def identity_coefficient(grid: GridSpec) -> CoefficientField:
    d = grid.dim

    def func(x):
        return np.broadcast_to(np.eye(d), (len(x), d, d)).copy()

    return _field_from_func(grid, func, "identity")


def constant_diagonal(grid: GridSpec, diagonal: Sequence[float]) -> CoefficientField:
    diag = np.diag(np.asarray(diagonal, dtype=float))
    if diag.shape != (grid.dim, grid.dim):
        raise GridError("diagonal needs one entry per axis")

    def func(x):
        return np.broadcast_to(diag, (len(x), grid.dim, grid.dim)).copy()

    return _field_from_func(grid, func, "constant_diagonal")


def diagonal_cosine(grid: GridSpec, amplitude: float = 0.3, phase: float = 0.0) -> CoefficientField:
    """A(x) = diag(1 + amplitude * cos(2 pi x_k / W_k + phase)).

    Diagonal fields keep the assembled matrix a Z-matrix (non-positive
    off-diagonal entries), so the discrete semigroup stays positive.
    """
    if not 0 <= amplitude < 1:
        raise GridError("amplitude must lie in [0, 1)")
    d = grid.dim
    w = grid.widths

    def func(x):
        a = np.zeros((len(x), d, d))
        for k in range(d):
            a[:, k, k] = 1 + amplitude * np.cos(2 * np.pi * x[:, k] / w[k] + phase)
        return a

    return _field_from_func(grid, func, "diagonal_cosine")


def shear_coefficient(grid: GridSpec, amplitude: float = 0.3, axes=(0, 1), phase: float = 0.0) -> CoefficientField:
    """A(x) = I + amplitude * sin(2 pi x_i / W_i + phase) (e_i e_j^T + e_j e_i^T).

    ``phase = pi/2`` gives the cosine perturbation.
    """
    if grid.dim < 2:
        raise GridError("shear coefficient needs dim >= 2")
    i, j = axes
    d = grid.dim
    w = grid.widths[i]

    def func(x):
        a = np.broadcast_to(np.eye(d), (len(x), d, d)).copy()
        s = amplitude * np.sin(2 * np.pi * x[:, i] / w + phase)
        a[:, i, j] += s
        a[:, j, i] += s
        return a

    return _field_from_func(grid, func, "shear")


def fourier_coefficient(
    grid: GridSpec, amplitude: float = 0.2, n_modes: int = 3, seed: int = 0
) -> CoefficientField:
    """Identity plus a seeded low-mode symmetric trigonometric perturbation.

    Each mode is ``c_m cos(2 pi k_m . x / W + phi_m) S_m`` with ``S_m`` a
    random symmetric matrix of spectral norm one; ``amplitude`` bounds the
    total perturbation norm so ellipticity holds with lambda >= 1 - amplitude.
    """
    rng = np.random.default_rng(seed)
    d = grid.dim
    modes = []
    for _ in range(n_modes):
        k = rng.integers(-2, 3, size=d)
        if not k.any():
            k[0] = 1
        s = rng.standard_normal((d, d))
        s = (s + s.T) / 2
        s /= np.abs(np.linalg.eigvalsh(s)).max()
        modes.append((k, rng.uniform(0, 2 * np.pi), s))
    widths = grid.widths
    scale = amplitude / n_modes

    def func(x):
        a = np.broadcast_to(np.eye(d), (len(x), d, d)).copy()
        for k, phase, s in modes:
            c = scale * np.cos(2 * np.pi * (x / widths) @ k + phase)
            a += c[:, None, None] * s
        return a

    return _field_from_func(grid, func, "fourier_series")


def make_coefficient(grid: GridSpec, kind: str = "identity", **params) -> CoefficientField:
    if kind == "identity":
        return identity_coefficient(grid)
    if kind == "constant_diagonal":
        return constant_diagonal(grid, params["diagonal"])
    if kind == "shear":
        return shear_coefficient(
            grid, params.get("amplitude", 0.3), tuple(params.get("axes", (0, 1))), params.get("phase", 0.0)
        )
    if kind == "diagonal_cosine":
        return diagonal_cosine(grid, params.get("amplitude", 0.3), params.get("phase", 0.0))
    if kind == "fourier_series":
        return fourier_coefficient(
            grid, params.get("amplitude", 0.2), params.get("n_modes", 3), params.get("seed", 0)
        )
    if kind == "file":
        values = load_grid_function(params["path"])[0].reshape(grid.n_points, grid.dim, grid.dim)
        return CoefficientField(values, _ellipticity(values), 1.0, "file")
    raise GridError(f"unknown coefficient kind {kind!r}")


def make_potential(grid: GridSpec, kind: str = "zero", **params) -> np.ndarray:
    """Potential generators.

    ``spike`` is a periodized Gaussian bump ``height * exp(-|x - c|^2 / (2 width^2))``
    on top of a constant ``background``; ``width`` defaults to 1.5 grid cells.
    """
    x = grid.coords()
    w = grid.widths
    if kind == "zero":
        return np.zeros(grid.n_points)
    if kind == "constant":
        return np.full(grid.n_points, float(params.get("value", 1.0)))
    if kind == "cosine":
        axis = params.get("axis", 0)
        v = params.get("mean", 1.0) + params.get("amplitude", 0.5) * np.cos(
            2 * np.pi * params.get("mode", 1) * x[:, axis] / w[axis]
        )
        return np.maximum(v, 0.0)
    if kind == "spike":
        center = params.get("center")
        c = grid.coords()[grid.center_index()] if center is None else np.asarray(center, dtype=float)
        width = params.get("width", 1.5 * min(grid.spacing))
        d = x - c
        d -= w * np.floor(d / w + 0.5)
        r2 = (d**2).sum(axis=1)
        return params.get("background", 0.0) + params.get("height", 100.0) * np.exp(-r2 / (2 * width**2))
    if kind == "random":
        rng = np.random.default_rng(params.get("seed", 0))
        return params.get("scale", 1.0) * rng.random(grid.n_points)
    if kind == "file":
        return load_grid_function(params["path"])[0]
    raise GridError(f"unknown potential kind {kind!r}")


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------


def difference_matrix(grid: GridSpec, axis: int, direction: int = 1) -> sparse.csr_matrix:
    """Periodic one-sided difference along ``axis``: forward (+1) or backward (-1)."""
    n = grid.sizes[axis]
    h = grid.spacing[axis]
    eye = sparse.identity(n, format="csr")
    shift = sparse.csr_matrix(
        (np.ones(n), (np.arange(n), (np.arange(n) + direction) % n)), shape=(n, n)
    )
    d1 = (shift - eye) * (direction / h)
    factors = [sparse.identity(m, format="csr") for m in grid.sizes]
    factors[axis] = d1
    out = factors[0]
    for f in factors[1:]:
        out = sparse.kron(out, f, format="csr")
    return out.tocsr()


def _coefficient_block(coeff: CoefficientField, grid: GridSpec) -> sparse.csr_matrix:
    d = grid.dim
    blocks = [[sparse.diags(coeff.values[:, i, j]) for j in range(d)] for i in range(d)]
    return sparse.bmat(blocks, format="csr")


def assemble_operator(
    grid: GridSpec, coeff: CoefficientField, potential: Optional[np.ndarray] = None, check: bool = True
) -> DiscreteOperator:
    """Assemble L = -div(A grad) + V as a sparse symmetric matrix."""
    if potential is None:
        potential = np.zeros(grid.n_points)
    potential = np.asarray(potential, dtype=float).ravel()
    if potential.shape != (grid.n_points,):
        raise GridError("potential has the wrong number of grid values")
    if np.any(potential < 0):
        raise GridError("potential must be nonnegative")
    values = np.asarray(coeff.values, dtype=float)
    if values.shape != (grid.n_points, grid.dim, grid.dim):
        raise GridError("coefficient field has the wrong shape")
    if not np.allclose(values, np.swapaxes(values, 1, 2), rtol=0, atol=1e-14):
        raise GridError("coefficient matrix is not symmetric")
    if check:
        lam = _ellipticity(values)
        if lam <= 0:
            raise GridError("coefficient field is not uniformly elliptic")

    a = _coefficient_block(coeff, grid)
    m = None
    for direction in (1, -1):
        g = sparse.vstack([difference_matrix(grid, k, direction) for k in range(grid.dim)], format="csr")
        part = g.T @ a @ g
        m = part if m is None else m + part
    m = 0.5 * m
    m = 0.5 * (m + m.T)
    if np.any(potential):
        m = m + sparse.diags(potential)
    m = m.tocsr()
    m.sum_duplicates()
    m.eliminate_zeros()
    return DiscreteOperator(
        matrix=m,
        grid=grid,
        has_potential=bool(np.any(potential)),
        provenance={"coefficient": coeff.name},
        potential=potential,
        coefficient=coeff,
    )


# ---------------------------------------------------------------------------
# (A1)(A2)(A3)
# ---------------------------------------------------------------------------


def centered_difference(grid: GridSpec, f: np.ndarray, axis: int) -> np.ndarray:
    h = grid.spacing[axis]
    return (grid.shift(f, axis, 1) - grid.shift(f, axis, -1)) / (2 * h)


def column_divergence(grid: GridSpec, values: np.ndarray) -> np.ndarray:
    """Discrete sum_i d_i a_ij for each column j, shape (n_points, d)."""
    d = grid.dim
    out = np.zeros((grid.n_points, d))
    for j in range(d):
        for i in range(d):
            out[:, j] += centered_difference(grid, values[:, i, j], i)
    return out


def check_conditions(coeff: CoefficientField, grid: GridSpec, holder_exponent: float = 1.0) -> dict:
    """Report-only validation of ellipticity, smoothness and periodicity."""
    values = np.asarray(coeff.values, dtype=float)
    w = np.linalg.eigvalsh(values)
    lam = float(min(w.min(), 1.0 / w.max()))
    symmetric = bool(np.allclose(values, np.swapaxes(values, 1, 2), rtol=0, atol=1e-14))
    a1 = {"pass": bool(symmetric and lam > 0 and lam <= 1), "lambda": lam, "symmetric": symmetric}

    # discrete C^{1+a} norm: sup|A| + sup|grad A| + Holder quotient of grad A over one-step pairs
    flat = values.reshape(grid.n_points, -1)
    sup = float(np.abs(flat).max())
    grads = [centered_difference(grid, flat, k) for k in range(grid.dim)]
    sup_grad = float(max(np.abs(g).max() for g in grads))
    quotient = 0.0
    for g in grads:
        for k in range(grid.dim):
            diff = np.abs(grid.shift(g, k, 1) - g).max()
            quotient = max(quotient, float(diff) / grid.spacing[k] ** holder_exponent)
    a2 = {"norm": sup + sup_grad + quotient, "sup": sup, "sup_grad": sup_grad, "holder_quotient": quotient}

    periodic_ok = True
    if coeff.func is not None:
        x = grid.coords()
        base = coeff.func(x)
        for k in range(grid.dim):
            z = np.zeros(grid.dim)
            z[k] = grid.widths[k]
            periodic_ok &= bool(np.allclose(coeff.func(x + z), base, rtol=0, atol=1e-12))
    div = column_divergence(grid, values)
    a3 = A3Report(periodic_ok=periodic_ok, divergence_residual=float(np.abs(div).max()))
    return {"A1": a1, "A2": a2, "A3": a3}


# ---------------------------------------------------------------------------
# grid-function persistence
# ---------------------------------------------------------------------------


def save_grid_function(path, values: np.ndarray, grid: GridSpec, **meta) -> None:
    """Flat little-endian float64 binary plus ``<path>.json`` sidecar."""
    path = Path(path)
    arr = np.ascontiguousarray(values, dtype="<f8")
    path.write_bytes(arr.tobytes())
    sidecar = {"grid": grid.to_json(), "shape": list(arr.shape), **meta}
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))


def load_grid_function(path):
    path = Path(path)
    sidecar = json.loads(Path(str(path) + ".json").read_text())
    arr = np.frombuffer(path.read_bytes(), dtype="<f8").reshape(sidecar["shape"]).copy()
    return arr, GridSpec.from_json(sidecar["grid"], max_points=max(DEFAULT_MAX_POINTS, int(np.prod(sidecar["grid"]["sizes"]))))
