"""Two-stage confident prediction for credit scoring.

Stage one trains a deep ensemble of small networks and flags inputs where
the members disagree (high prediction variance) as unconfident. Stage two
searches, for each unconfident input, a nearby coordinate-wise dominated
point on the monotone features where the ensemble is confident; its mean
probability of default is a lower bound for the query, which either
justifies a rejection or routes the case to human review.
"""

from .ingest import (
    COLUMN_NAMES,
    FEATURE_NAMES,
    Dataset,
    FeatureBounds,
    SchemaError,
    Standardizer,
    drop_missing,
    parse_dataset,
    split_train_test,
)
from .mlp import MLPParams, TrainConfig, TrainingDiverged, init_params, forward, predict_proba, train
from .ensemble import Ensemble, PredictionStats, train_ensemble, ensemble_stats, classify_confidence, split_by_confidence
from .bounds import MonotoneSpec, BoundResult, DecisionOutcome, candidate_grid, lower_bound, decide, undecided_portion
from .experiment import ExperimentConfig, ExperimentReport, auc, censor_split, run_selection_experiment
from .sensitivity import feature_importance, gradient_wrt_input

__all__ = [
    "COLUMN_NAMES",
    "FEATURE_NAMES",
    "Dataset",
    "FeatureBounds",
    "SchemaError",
    "Standardizer",
    "drop_missing",
    "parse_dataset",
    "split_train_test",
    "MLPParams",
    "TrainConfig",
    "TrainingDiverged",
    "init_params",
    "forward",
    "predict_proba",
    "train",
    "Ensemble",
    "PredictionStats",
    "train_ensemble",
    "ensemble_stats",
    "classify_confidence",
    "split_by_confidence",
    "MonotoneSpec",
    "BoundResult",
    "DecisionOutcome",
    "candidate_grid",
    "lower_bound",
    "decide",
    "undecided_portion",
    "ExperimentConfig",
    "ExperimentReport",
    "auc",
    "censor_split",
    "run_selection_experiment",
    "feature_importance",
    "gradient_wrt_input",
]
