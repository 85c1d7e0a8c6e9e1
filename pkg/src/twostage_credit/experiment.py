"""Auxiliary loan-approval censoring experiment and the AUC metric.

The experiment mimics how lenders censor outcomes: a first network,
trained on the training split, plays the role of the historical approval
rule; the ensemble then trains only on the applicants that rule would
have approved. Measuring how much of the rule's rejected test region the
variance criterion flags tells us whether out-of-distribution inputs are
being caught.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import rankdata

from .ingest import Dataset, Standardizer, fit_standardizer, split_train_test
from .mlp import MLPParams, TrainConfig, predict_proba, train
from .ensemble import Ensemble, train_ensemble, ensemble_stats_batch, member_probs, DEFAULT_MEMBERS, DEFAULT_EPSILON


class DegenerateExperiment(RuntimeError):
    """The censoring split left an empty selected or rejected set."""


class UndefinedAUC(ValueError):
    """AUC needs at least one positive and one negative label."""


def auc(scores, labels) -> float:
    """Area under the ROC curve, Mann-Whitney formulation with tie credit.

    Equals P(score_pos > score_neg) + 0.5 P(score_pos == score_neg) over
    random positive/negative pairs, computed exactly via average ranks.
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUC("labels must contain both classes")
    ranks = rankdata(scores)  # average ranks handle ties exactly
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def censor_split(probs: np.ndarray, dataset: Dataset, tau: float) -> tuple[Dataset, Dataset]:
    """Split by a historical approval rule: selected iff predicted PoD < tau."""
    if not 0.0 < tau <= 1.0:
        raise ValueError("tau must be in (0, 1]")
    probs = np.asarray(probs, dtype=np.float64).reshape(-1)
    if len(probs) != len(dataset):
        raise ValueError("probs/dataset length mismatch")
    selected = probs < tau
    return (dataset.subset(np.flatnonzero(selected), f"{dataset.provenance}-selected"),
            dataset.subset(np.flatnonzero(~selected), f"{dataset.provenance}-rejected"))


@dataclass
class ExperimentConfig:
    seed: int = 0
    train_fraction: float = 0.75
    censor_tau: float = 0.5
    m: int = DEFAULT_MEMBERS
    epsilon: float = DEFAULT_EPSILON
    train: TrainConfig = field(default_factory=TrainConfig)


@dataclass
class ExperimentReport:
    f1_default_rate_train: float  # fraction of D1 the approval rule rejects
    d22_fraction: float  # fraction of the test set the rule rejects
    f2_test_auc: float  # AUC of the ensemble-mean score on D2
    f2_member_mean_auc: float  # mean of per-member AUCs, for comparison
    unconfident_fraction_test: float
    coverage_of_d22: float  # rejected test rows flagged unconfident
    seed: int
    m: int
    epsilon: float
    censor_tau: float

    def as_flat_kv(self) -> dict[str, str]:
        return {
            "f1_default_rate_train": repr(self.f1_default_rate_train),
            "d22_fraction": repr(self.d22_fraction),
            "f2_test_auc": repr(self.f2_test_auc),
            "f2_member_mean_auc": repr(self.f2_member_mean_auc),
            "unconfident_fraction_test": repr(self.unconfident_fraction_test),
            "coverage_of_d22": repr(self.coverage_of_d22),
            "seed": str(self.seed),
            "m": str(self.m),
            "epsilon": repr(self.epsilon),
            "censor_tau": repr(self.censor_tau),
        }


def run_selection_experiment(dataset: Dataset,
                             config: ExperimentConfig) -> tuple[ExperimentReport, Ensemble, Dataset]:
    """Run the censoring experiment end to end on a cleaned dataset.

    Pipeline: 75/25 split; train the approval rule f1 on the training
    split; censor both splits at censor_tau; train the ensemble on the
    approved training rows only; score the full test split. Returns the
    report plus the censored-data ensemble and the rejected test subset,
    so callers can inspect or visualize them.
    """
    train_set, test_set = split_train_test(dataset, config.train_fraction, config.seed)
    f1_cfg = replace(config.train, seed=config.seed)
    std1 = fit_standardizer(train_set)
    f1 = train(f1_cfg, std1.apply(train_set.features), train_set.labels)

    p_train = predict_proba(f1, std1.apply(train_set.features))
    p_test = predict_proba(f1, std1.apply(test_set.features))
    d11, d12 = censor_split(p_train, train_set, config.censor_tau)
    d21, d22 = censor_split(p_test, test_set, config.censor_tau)
    if len(d11) == 0 or len(d22) == 0:
        raise DegenerateExperiment(
            f"censoring left selected-train={len(d11)}, rejected-test={len(d22)} rows"
        )

    ens = train_ensemble(d11, config.m, config.seed, config.train)

    mu_test, sigma2_test = ensemble_stats_batch(ens, test_set.features)
    probs = member_probs(ens, test_set.features)
    member_aucs = [auc(probs[:, i], test_set.labels) for i in range(config.m)]

    unconf_test = sigma2_test > config.epsilon
    _, sigma2_d22 = ensemble_stats_batch(ens, d22.features)
    coverage = float((sigma2_d22 > config.epsilon).mean())

    report = ExperimentReport(
        f1_default_rate_train=float((p_train >= config.censor_tau).mean()),
        d22_fraction=len(d22) / len(test_set),
        f2_test_auc=auc(mu_test, test_set.labels),
        f2_member_mean_auc=float(np.mean(member_aucs)),
        unconfident_fraction_test=float(unconf_test.mean()),
        coverage_of_d22=coverage,
        seed=config.seed,
        m=config.m,
        epsilon=config.epsilon,
        censor_tau=config.censor_tau,
    )
    return report, ens, d22
