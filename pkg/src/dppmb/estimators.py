"""scikit-learn style wrappers around k-DPP selection and MaxMin picking.

Both estimators are row selectors: ``fit`` decides which rows to keep and
``transform`` returns those rows.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import dpp
from .kernels import dice_gram, tanimoto_gram
from .metrics import maxmin_diverse_actives

KERNELS = ("tanimoto", "dice", "precomputed")


def _generator(random_state):
    if isinstance(random_state, np.random.Generator):
        return random_state
    return np.random.default_rng(random_state)


def check_fingerprints(x) -> np.ndarray:
    """2-d array of 0/1 values as booleans."""
    x = check_array(x, dtype=None, ensure_min_samples=1)
    if not np.isin(x, (0, 1)).all():
        raise ValueError("fingerprints must contain only 0/1 values")
    return x.astype(bool)


def check_counts(x) -> np.ndarray:
    x = check_array(x, dtype=np.float64, ensure_min_samples=1)
    if np.any(x < 0) or np.any(x != np.round(x)):
        raise ValueError("counts must be non-negative integers")
    return x.astype(np.int64)


def check_kernel(x) -> np.ndarray:
    x = check_array(x, dtype=np.float64, ensure_min_samples=1)
    if x.shape[0] != x.shape[1]:
        raise ValueError(f"precomputed kernel must be square, got {x.shape}")
    if not np.allclose(x, x.T, rtol=0, atol=1e-12):
        raise ValueError("precomputed kernel must be symmetric")
    return 0.5 * (x + x.T)


class KDPPSelector(TransformerMixin, BaseEstimator):
    """Pick ``k`` rows by exact k-DPP sampling over a similarity kernel.

    ``kernel`` chooses how the L-ensemble is built from ``X``: Tanimoto on
    binary fingerprints, Dice on count vectors, or ``X`` itself.
    """

    def __init__(self, k: int = 8, kernel: str = "tanimoto", ridge: float = dpp.RIDGE,
                 random_state=None):
        self.k = k
        self.kernel = kernel
        self.ridge = ridge
        self.random_state = random_state

    def _kernel_matrix(self, x) -> np.ndarray:
        if self.kernel == "tanimoto":
            return tanimoto_gram(check_fingerprints(x))
        if self.kernel == "dice":
            return dice_gram(check_counts(x))
        if self.kernel == "precomputed":
            return check_kernel(x)
        raise ValueError(f"kernel must be one of {KERNELS}, got {self.kernel!r}")

    def fit(self, X, y=None):
        l = self._kernel_matrix(X)
        if not isinstance(self.k, (int, np.integer)) or not 1 <= self.k <= l.shape[0]:
            raise ValueError(f"k must be an integer in [1, {l.shape[0]}], got {self.k!r}")
        self.kernel_ = l
        self.sampler_ = dpp.prepare(l, int(self.k), ridge=self.ridge)
        self._rng = _generator(self.random_state)
        self.support_ = np.array(dpp.sample(self.sampler_, self._rng), dtype=np.intp)
        self.n_features_in_ = np.asarray(X).shape[1]
        return self

    def sample(self, n_draws: int = 1) -> np.ndarray:
        """Fresh independent subsets, shape (n_draws, k)."""
        check_is_fitted(self, "sampler_")
        return np.array([dpp.sample(self.sampler_, self._rng) for _ in range(n_draws)], dtype=np.intp)

    def transform(self, X):
        check_is_fitted(self, "support_")
        X = check_array(X, dtype=None)
        if X.shape[0] != self.kernel_.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows; fitted on {self.kernel_.shape[0]}")
        return X[self.support_]


class MaxMinPicker(TransformerMixin, BaseEstimator):
    """Greedy MaxMin packing under Tanimoto distance on binary fingerprints."""

    def __init__(self, threshold: float = 0.7, random_state=None):
        self.threshold = threshold
        self.random_state = random_state

    def fit(self, X, y=None):
        fps = check_fingerprints(X)
        count, picked = maxmin_diverse_actives(fps, self.threshold, _generator(self.random_state))
        self.support_ = np.array(picked, dtype=np.intp)
        self.n_selected_ = count
        self.n_samples_fit_ = fps.shape[0]
        self.n_features_in_ = fps.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "support_")
        X = check_array(X, dtype=None)
        if X.shape[0] != self.n_samples_fit_:
            raise ValueError(f"X has {X.shape[0]} rows; fitted on {self.n_samples_fit_}")
        return X[self.support_]
