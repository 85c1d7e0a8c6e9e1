"""Sensitivity-based feature importance over the trained ensemble.

Importance of a feature is the mean absolute partial derivative of the
logit with respect to that (standardized) input, averaged over samples
and ensemble members, normalized to sum one. A squared-gradient variant
is available for comparison.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .ingest import Dataset, FEATURE_NAMES, N_FEATURES
from .ensemble import Ensemble
from .mlp import MLPParams


class DegenerateImportance(ValueError):
    """Every gradient vanished; importances cannot be normalized."""


def gradient_wrt_input(params: MLPParams, x_std: np.ndarray) -> np.ndarray:
    """Exact input-gradient of the logit f, for one point or a batch."""
    x = np.asarray(x_std, dtype=np.float64)
    single = x.ndim == 1
    X = x.reshape(-1, N_FEATURES)
    h = expit(X @ params.W1.T + params.b1)  # (n, 2)
    # df/dx = W1^T (w2 * h (1-h))
    grad = (params.w2 * h * (1.0 - h)) @ params.W1  # (n, 10)
    return grad[0] if single else grad


def feature_importance(ensemble: Ensemble, dataset: Dataset, mode: str = "abs") -> np.ndarray:
    """Normalized per-feature importance vector over a dataset.

    mode "abs" averages |df/dx_j|; mode "squared" averages (df/dx_j)^2.
    """
    if len(dataset) == 0:
        raise ValueError("importance undefined for an empty dataset")
    if mode not in ("abs", "squared"):
        raise ValueError(f"unknown mode: {mode}")
    X = ensemble.standardizer.apply(dataset.features)
    total = np.zeros(N_FEATURES)
    for params in ensemble.members:
        g = gradient_wrt_input(params, X)
        total += np.abs(g).mean(axis=0) if mode == "abs" else (g * g).mean(axis=0)
    s = total.sum()
    if s <= 0.0:
        raise DegenerateImportance("all gradients are zero")
    return total / s


def importance_table(importance: np.ndarray) -> list[tuple[str, float]]:
    """(feature name, weight) pairs sorted by descending importance."""
    order = np.argsort(-importance)
    return [(FEATURE_NAMES[j], float(importance[j])) for j in order]
