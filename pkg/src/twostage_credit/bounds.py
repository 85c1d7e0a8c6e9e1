"""Stage two: mean-variance search for lower bounds on unconfident points.

For a query x, the optimizer searches points x' that agree with x outside
the monotone feature set, are coordinate-wise <= x on it, and stay inside
the training-set feature bounds. Among candidates where the ensemble is
confident (variance strictly below epsilon) it returns the one with the
largest mean probability; that value lower-bounds the query's probability
of default under the monotonicity assumption.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .ingest import Dataset, FeatureBounds, INTEGER_FEATURES, N_FEATURES, FEATURE_NAMES
from .ensemble import Ensemble, ensemble_stats_batch, DEFAULT_EPSILON

# Features the probability of default is assumed non-decreasing in
# (0-based): x3, x5, x7, x9, x10.
DEFAULT_MONOTONE = (2, 4, 6, 8, 9)

GRID_CHUNK = 262144  # candidates evaluated per numpy batch


@dataclass
class MonotoneSpec:
    """Monotone-increasing feature indices and grid resolution settings."""

    alpha: tuple[int, ...] = DEFAULT_MONOTONE
    real_resolution: int = 32
    level_cap: int = 32

    def __post_init__(self):
        if not self.alpha:
            raise ValueError("monotone feature set must be nonempty")
        if len(set(self.alpha)) != len(self.alpha):
            raise ValueError("duplicate monotone feature index")
        for j in self.alpha:
            if not 0 <= j < N_FEATURES:
                raise ValueError(f"feature index out of range: {j}")
        if self.real_resolution < 2 or self.level_cap < 2:
            raise ValueError("grid resolution must be >= 2")


@dataclass
class BoundResult:
    feasible: bool
    witness: np.ndarray | None
    lower_bound: float | None
    witness_sigma2: float | None
    candidates_evaluated: int


@dataclass
class DecisionOutcome:
    """Routing result: confident prediction, bound-backed rejection, or undecided."""

    kind: str  # "confident" | "decided_by_bound" | "undecided"
    pod: float | None = None  # mean probability at x when confident
    bound: BoundResult | None = None
    reason: str | None = None  # "infeasible" | "bound-below-tau"


def _feature_levels(j: int, x_j: float, lo: float, cap: int, real_resolution: int) -> np.ndarray:
    if x_j < lo:
        warnings.warn(
            f"query {FEATURE_NAMES[j]}={x_j} below training minimum {lo}; clamped",
            stacklevel=3,
        )
        return np.array([lo])
    if j in INTEGER_FEATURES:
        lo_i, hi_i = int(np.ceil(lo)), int(np.floor(round(x_j)))
        if hi_i < lo_i:
            return np.array([lo])
        levels = np.arange(lo_i, hi_i + 1, dtype=np.float64)
        if len(levels) > cap:
            pick = np.unique(np.round(np.linspace(0, len(levels) - 1, cap)).astype(int))
            levels = levels[pick]
        return levels
    if x_j == lo:
        return np.array([lo])
    return np.linspace(lo, x_j, min(real_resolution, cap))


def candidate_grid(x: np.ndarray, spec: MonotoneSpec, bounds: FeatureBounds) -> np.ndarray:
    """Finite search set: Cartesian product of per-feature level sets.

    Non-monotone coordinates stay frozen at x's values; endpoints are
    always level members, so x itself is in the grid.
    """
    x = np.asarray(x, dtype=np.float64).reshape(N_FEATURES)
    if not np.all(np.isfinite(x)):
        raise ValueError("query point has non-finite entries")
    level_sets = [
        _feature_levels(j, x[j], bounds.min[j], spec.level_cap, spec.real_resolution)
        for j in spec.alpha
    ]
    mesh = np.meshgrid(*level_sets, indexing="ij")
    n = mesh[0].size
    grid = np.tile(x, (n, 1))
    for k, j in enumerate(spec.alpha):
        grid[:, j] = mesh[k].ravel()
    return grid


def lower_bound(ensemble: Ensemble, x: np.ndarray, spec: MonotoneSpec,
                epsilon: float, bounds: FeatureBounds) -> BoundResult:
    """Exhaustive mean-variance search over the candidate grid.

    Feasible candidates satisfy sigma2 < epsilon strictly; the winner
    maximizes mu, with ties broken by smallest L1 distance from x in
    standardized units, then lexicographic candidate order. The result is
    independent of grid evaluation order.
    """
    x = np.asarray(x, dtype=np.float64).reshape(N_FEATURES)
    grid = candidate_grid(x, spec, bounds)
    n = len(grid)

    best = None  # (mu, -l1, lex-key, index-in-chunk snapshot)
    for start in range(0, n, GRID_CHUNK):
        chunk = grid[start : start + GRID_CHUNK]
        mu, sigma2 = ensemble_stats_batch(ensemble, chunk)
        ok = sigma2 < epsilon
        if not ok.any():
            continue
        idx = np.flatnonzero(ok)
        mu_ok = mu[idx]
        top = mu_ok.max()
        cand = idx[mu_ok == top]
        # tie-break: L1 distance in standardized units, then lexicographic
        z = np.abs(ensemble.standardizer.apply(chunk[cand]) - ensemble.standardizer.apply(x)).sum(axis=1)
        order = np.lexsort(tuple(chunk[cand][:, j] for j in reversed(range(N_FEATURES))) + (z,))
        pick = cand[order[0]]
        entry = (float(mu[pick]), float(z[order[0]]), tuple(chunk[pick]), float(sigma2[pick]), chunk[pick].copy())
        if best is None or _better(entry, best):
            best = entry

    if best is None:
        return BoundResult(feasible=False, witness=None, lower_bound=None,
                           witness_sigma2=None, candidates_evaluated=n)
    mu_b, _, _, sigma2_b, witness = best
    return BoundResult(feasible=True, witness=witness, lower_bound=mu_b,
                       witness_sigma2=sigma2_b, candidates_evaluated=n)


def _better(a, b) -> bool:
    if a[0] != b[0]:
        return a[0] > b[0]
    if a[1] != b[1]:
        return a[1] < b[1]
    return a[2] < b[2]


def decide(ensemble: Ensemble, x: np.ndarray, epsilon: float, tau: float,
           spec: MonotoneSpec, bounds: FeatureBounds) -> DecisionOutcome:
    """Route one applicant through the two stages.

    Confident (variance <= epsilon): report the ensemble mean directly.
    Otherwise a feasible lower bound strictly above tau justifies a
    rejection; anything else is left undecided for human review.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must be in (0, 1)")
    mu, sigma2 = ensemble_stats_batch(ensemble, np.asarray(x).reshape(1, -1))
    if sigma2[0] <= epsilon:
        return DecisionOutcome(kind="confident", pod=float(mu[0]))
    result = lower_bound(ensemble, x, spec, epsilon, bounds)
    if not result.feasible:
        return DecisionOutcome(kind="undecided", bound=result, reason="infeasible")
    if result.lower_bound > tau:
        return DecisionOutcome(kind="decided_by_bound", bound=result)
    return DecisionOutcome(kind="undecided", bound=result, reason="bound-below-tau")


def lower_bounds_for_set(ensemble: Ensemble, dataset: Dataset, epsilon: float,
                         spec: MonotoneSpec, bounds: FeatureBounds) -> list[BoundResult]:
    return [lower_bound(ensemble, dataset.features[i], spec, epsilon, bounds)
            for i in range(len(dataset))]


def undecided_portion(ensemble: Ensemble, unconfident_set: Dataset, epsilon: float,
                      tau: float, spec: MonotoneSpec, bounds: FeatureBounds,
                      results: list[BoundResult] | None = None) -> float:
    """Fraction of the unconfident set that stays undecided at threshold tau.

    Precomputed BoundResults may be passed to sweep several tau values
    without re-running the grid search.
    """
    if len(unconfident_set) == 0:
        raise ValueError("undecided portion undefined for an empty unconfident set")
    if results is None:
        results = lower_bounds_for_set(ensemble, unconfident_set, epsilon, spec, bounds)
    undecided = sum(1 for r in results if not (r.feasible and r.lower_bound > tau))
    return undecided / len(unconfident_set)
