"""scikit-learn style transformers over a fixed discrete operator.

Rows of ``X`` are grid functions (n_samples, n_points).  ``fit`` performs
(or loads) the eigendecomposition; ``transform`` applies a spectral
multiplier to every row.  Only the data-independent operator calculus is
wrapped here; the verification sweeps stay plain functions.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .grid import DiscreteOperator
from .spectral import decompose
from .subordination import subordination_multiplier


class _SpectralTransformer(TransformerMixin, BaseEstimator):
    def __init__(self, operator: Optional[DiscreteOperator] = None, cache_dir=None):
        self.operator = operator
        self.cache_dir = cache_dir

    def fit(self, X=None, y=None):
        if self.operator is None:
            raise ValueError("an operator is required")
        self.spectrum_ = decompose(self.operator, self.cache_dir)
        self.n_features_in_ = self.spectrum_.n
        if X is not None:
            self._validate(X)
        return self

    def _validate(self, X) -> np.ndarray:
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.spectrum_.n:
            raise ValueError(f"X has {X.shape[1]} features, the operator has {self.spectrum_.n} grid points")
        return X

    def _multiplier(self) -> np.ndarray:
        raise NotImplementedError

    def transform(self, X):
        check_is_fitted(self, "spectrum_")
        X = self._validate(X)
        return self.spectrum_.apply(self._multiplier(), X.T).T


class HeatSemigroup(_SpectralTransformer):
    """exp(-t L^alpha) applied row-wise; ``path='subordination'`` mixes heat semigroups by eta_t."""

    def __init__(self, operator=None, t: float = 0.1, alpha: float = 1.0, path: str = "spectral", cache_dir=None):
        super().__init__(operator, cache_dir)
        self.t = t
        self.alpha = alpha
        self.path = path

    def fit(self, X=None, y=None):
        if self.t < 0:
            raise ValueError("t must be nonnegative")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if self.path not in ("spectral", "subordination"):
            raise ValueError(f"unknown path {self.path!r}")
        if self.path == "subordination" and self.alpha == 1:
            raise ValueError("the subordination path needs alpha < 1")
        return super().fit(X, y)

    def _multiplier(self):
        spec = self.spectrum_
        if self.path == "subordination":
            return subordination_multiplier(spec, self.alpha, self.t)
        return np.exp(-self.t * spec.power(self.alpha))


class FractionalPower(_SpectralTransformer):
    """L^s applied row-wise (0^s := 0); the inverse exists when L has a trivial kernel."""

    def __init__(self, operator=None, s: float = 0.5, cache_dir=None):
        super().__init__(operator, cache_dir)
        self.s = s

    def fit(self, X=None, y=None):
        if self.s <= 0:
            raise ValueError("s must be positive")
        return super().fit(X, y)

    def _multiplier(self):
        return self.spectrum_.power(self.s)

    def inverse_transform(self, X):
        check_is_fitted(self, "spectrum_")
        X = self._validate(X)
        if self.spectrum_.zero_mask.any():
            raise ValueError("L has a kernel; L^s is not invertible")
        return self.spectrum_.apply(self.spectrum_.power(-self.s), X.T).T
