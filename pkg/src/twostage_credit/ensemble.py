"""Deep ensemble: m independently seeded networks on the full training set.

Disagreement between members (sample variance of their probabilities)
measures how far an input sits from the training distribution. The
variance threshold epsilon splits any dataset into confident and
unconfident parts.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit

from .ingest import Dataset, Standardizer, fit_standardizer
from .mlp import MLPParams, TrainConfig, TrainingDiverged, train
from . import serialize

DEFAULT_MEMBERS = 10
DEFAULT_EPSILON = 1e-3


@dataclass
class PredictionStats:
    """Ensemble mean probability and sample (m-1) variance at one point."""

    mu: float
    sigma2: float


@dataclass
class ConfidenceLabel:
    confident: bool
    stats: PredictionStats


@dataclass
class Ensemble:
    """m trained members sharing one standardizer; immutable once built."""

    members: list[MLPParams]
    standardizer: Standardizer
    base_seed: int
    config: TrainConfig

    def __post_init__(self):
        if len(self.members) < 2:
            raise ValueError("ensemble needs m >= 2 members for a sample variance")

    @property
    def m(self) -> int:
        return len(self.members)


def member_seed(base_seed: int, index: int) -> int:
    # XOR derivation: adding members never perturbs existing ones.
    return base_seed ^ index


def train_ensemble(train_set: Dataset, m: int, base_seed: int, config: TrainConfig,
                   standardizer: Standardizer | None = None) -> Ensemble:
    """Train m members on the full training set (no bagging), one seed each."""
    if m < 2:
        raise ValueError("m must be >= 2")
    std = standardizer if standardizer is not None else fit_standardizer(train_set)
    X = std.apply(train_set.features)
    y = train_set.labels
    members = []
    for i in range(m):
        cfg = replace(config, seed=member_seed(base_seed, i))
        try:
            members.append(train(cfg, X, y))
        except TrainingDiverged as exc:
            raise TrainingDiverged(f"member {i} (seed {cfg.seed}): {exc}") from exc
    return Ensemble(members=members, standardizer=std, base_seed=base_seed, config=config)


def member_probs(ensemble: Ensemble, X_raw: np.ndarray) -> np.ndarray:
    """(n, m) matrix of per-member probabilities at raw-unit inputs."""
    X = ensemble.standardizer.apply(np.atleast_2d(np.asarray(X_raw, dtype=np.float64)))
    cols = []
    for p in ensemble.members:
        h = expit(X @ p.W1.T + p.b1)
        cols.append(expit(h @ p.w2 + p.b2))
    return np.column_stack(cols)


def ensemble_stats_batch(ensemble: Ensemble, X_raw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized (mu, sigma2) arrays for a batch of raw-unit points."""
    probs = member_probs(ensemble, X_raw)
    mu = probs.mean(axis=1)
    sigma2 = probs.var(axis=1, ddof=1)
    return mu, sigma2


def ensemble_stats(ensemble: Ensemble, x_raw: np.ndarray) -> PredictionStats:
    mu, sigma2 = ensemble_stats_batch(ensemble, np.asarray(x_raw).reshape(1, -1))
    return PredictionStats(mu=float(mu[0]), sigma2=float(sigma2[0]))


def classify_confidence(ensemble: Ensemble, x_raw: np.ndarray, epsilon: float = DEFAULT_EPSILON) -> ConfidenceLabel:
    """Unconfident iff sigma2 > epsilon (strict); sigma2 == epsilon is confident."""
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    stats = ensemble_stats(ensemble, x_raw)
    return ConfidenceLabel(confident=stats.sigma2 <= epsilon, stats=stats)


def split_by_confidence(ensemble: Ensemble, dataset: Dataset, epsilon: float = DEFAULT_EPSILON) -> tuple[Dataset, Dataset]:
    """Partition a dataset by the variance criterion, order preserved."""
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    if len(dataset) == 0:
        return (dataset.subset(np.array([], dtype=int), "confident"),
                dataset.subset(np.array([], dtype=int), "unconfident"))
    _, sigma2 = ensemble_stats_batch(ensemble, dataset.features)
    unconf = sigma2 > epsilon
    return (dataset.subset(np.flatnonzero(~unconf), "confident"),
            dataset.subset(np.flatnonzero(unconf), "unconfident"))


def save_ensemble(ensemble: Ensemble, out_dir: str) -> dict[str, str]:
    """Write manifest + one params file per member; returns file digests."""
    os.makedirs(out_dir, exist_ok=True)
    digests: dict[str, str] = {}
    for i, p in enumerate(ensemble.members):
        name = f"member_{i:03d}.params"
        data = serialize.params_to_text(p).encode()
        _atomic_write(os.path.join(out_dir, name), data)
        digests[name] = serialize.content_digest(data)
    std_data = serialize.standardizer_to_text(ensemble.standardizer).encode()
    _atomic_write(os.path.join(out_dir, "standardizer.txt"), std_data)
    digests["standardizer.txt"] = serialize.content_digest(std_data)

    cfg = ensemble.config
    manifest = {
        "format": "ensemble-manifest-v1",
        "m": str(ensemble.m),
        "base_seed": str(ensemble.base_seed),
        "member_seeds": " ".join(str(member_seed(ensemble.base_seed, i)) for i in range(ensemble.m)),
        "epochs": str(cfg.epochs),
        "batch_size": str(cfg.batch_size),
        "learning_rate": repr(cfg.learning_rate),
        "optimizer": cfg.optimizer,
        "init_scale": repr(cfg.init_scale),
    }
    for name in sorted(digests):
        manifest[f"digest.{name}"] = digests[name]
    data = serialize.format_flat_kv(manifest).encode()
    _atomic_write(os.path.join(out_dir, "manifest.txt"), data)
    digests["manifest.txt"] = serialize.content_digest(data)
    return digests


def load_ensemble(in_dir: str) -> Ensemble:
    with open(os.path.join(in_dir, "manifest.txt")) as fh:
        manifest = serialize.parse_flat_kv(fh.read())
    if manifest.get("format") != "ensemble-manifest-v1":
        raise ValueError(f"unsupported manifest format: {manifest.get('format')!r}")
    m = int(manifest["m"])
    members = []
    for i in range(m):
        with open(os.path.join(in_dir, f"member_{i:03d}.params")) as fh:
            members.append(serialize.params_from_text(fh.read()))
    with open(os.path.join(in_dir, "standardizer.txt")) as fh:
        std = serialize.standardizer_from_text(fh.read())
    config = TrainConfig(
        epochs=int(manifest["epochs"]),
        batch_size=int(manifest["batch_size"]),
        learning_rate=float(manifest["learning_rate"]),
        optimizer=manifest["optimizer"],
        init_scale=float(manifest["init_scale"]),
        seed=int(manifest["base_seed"]),
    )
    return Ensemble(members=members, standardizer=std, base_seed=int(manifest["base_seed"]), config=config)


def _atomic_write(path: str, data: bytes) -> None:
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)
