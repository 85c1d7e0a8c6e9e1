"""Command-line pipeline: ingest -> train -> decide / experiment / importance / plotdata.

Every command reads a flat key=value config (defaults from the shipped
reference config), takes a handful of override flags, and writes
deterministic artifacts with content digests into the output directory.

Exit codes: 0 success, 2 schema/parse error, 3 degenerate experiment,
4 divergent training, 1 anything else.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import serialize
from .ingest import (
    Dataset, FeatureBounds, SchemaError, EmptyDatasetError,
    parse_dataset, drop_missing, split_train_test, fit_standardizer, fit_bounds,
    dataset_to_csv, FEATURE_NAMES, N_FEATURES, INTEGER_FEATURES,
)
from .mlp import TrainConfig, TrainingDiverged
from .ensemble import (
    Ensemble, train_ensemble, ensemble_stats_batch, split_by_confidence,
    save_ensemble, load_ensemble,
)
from .bounds import MonotoneSpec, decide, lower_bounds_for_set, undecided_portion
from .experiment import ExperimentConfig, run_selection_experiment, DegenerateExperiment
from .sensitivity import feature_importance, importance_table

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_DEGENERATE = 3
EXIT_DIVERGED = 4

REFERENCE_CONFIG = {
    # paths
    "data_path": "data/credit.csv",
    "out_dir": "out",
    # randomness: one root seed drives split, ensemble, and experiment
    "seed": "0",
    # dataset split
    "train_fraction": "0.75",
    # ensemble
    "members": "10",
    "epsilon": "1e-3",
    # decision thresholds (percent-free fractions), first entry is primary
    "tau": "0.5 0.4 0.3 0.2 0.1",
    # censoring experiment approval threshold
    "censor_tau": "0.5",
    # monotone-increasing features searched by the bound optimizer
    "alpha": "x3 x5 x7 x9 x10",
    "grid_resolution": "32",
    "grid_level_cap": "32",
    # training hyperparameters
    "epochs": "200",
    "batch_size": "256",
    "learning_rate": "0.01",
    "init_scale": "0.5",
    # plot data
    "plot_background_rows": "2000",
}


@dataclass
class RunConfig:
    data_path: str
    out_dir: str
    seed: int
    train_fraction: float
    members: int
    epsilon: float
    taus: list[float]
    censor_tau: float
    alpha: tuple[int, ...]
    grid_resolution: int
    grid_level_cap: int
    train: TrainConfig
    plot_background_rows: int

    @property
    def spec(self) -> MonotoneSpec:
        return MonotoneSpec(alpha=self.alpha, real_resolution=self.grid_resolution,
                            level_cap=self.grid_level_cap)


def load_config(path: str | None, overrides: argparse.Namespace) -> RunConfig:
    kv = dict(REFERENCE_CONFIG)
    if path:
        with open(path) as fh:
            kv.update(serialize.parse_flat_kv(fh.read()))
    if getattr(overrides, "seed", None) is not None:
        kv["seed"] = str(overrides.seed)
    if getattr(overrides, "epsilon", None) is not None:
        kv["epsilon"] = repr(overrides.epsilon)
    if getattr(overrides, "tau", None) is not None:
        kv["tau"] = overrides.tau.replace(",", " ")
    if getattr(overrides, "members", None) is not None:
        kv["members"] = str(overrides.members)
    if getattr(overrides, "out", None) is not None:
        kv["out_dir"] = overrides.out
    if getattr(overrides, "data", None) is not None:
        kv["data_path"] = overrides.data

    alpha = tuple(FEATURE_NAMES.index(name) for name in kv["alpha"].split())
    seed = int(kv["seed"])
    return RunConfig(
        data_path=kv["data_path"],
        out_dir=kv["out_dir"],
        seed=seed,
        train_fraction=float(kv["train_fraction"]),
        members=int(kv["members"]),
        epsilon=float(kv["epsilon"]),
        taus=[float(t) for t in kv["tau"].split()],
        censor_tau=float(kv["censor_tau"]),
        alpha=alpha,
        grid_resolution=int(kv["grid_resolution"]),
        grid_level_cap=int(kv["grid_level_cap"]),
        train=TrainConfig(
            epochs=int(kv["epochs"]),
            batch_size=int(kv["batch_size"]),
            learning_rate=float(kv["learning_rate"]),
            init_scale=float(kv["init_scale"]),
            seed=seed,
        ),
        plot_background_rows=int(kv["plot_background_rows"]),
    )


def _write(path: str, data: bytes) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)
    return serialize.content_digest(data)


def _load_cleaned(cfg: RunConfig) -> Dataset:
    path = os.path.join(cfg.out_dir, "cleaned.csv")
    if not os.path.exists(path):
        raise FileNotFoundError(f"run 'ingest' first: {path} not found")
    with open(path, "rb") as fh:
        return drop_missing(parse_dataset(fh.read(), provenance="cleaned"))


def _load_bounds(cfg: RunConfig) -> FeatureBounds:
    with open(os.path.join(cfg.out_dir, "bounds.txt")) as fh:
        kv = serialize.parse_flat_kv(fh.read())
    return FeatureBounds(
        min=np.array([float(v) for v in kv["min"].split()]),
        max=np.array([float(v) for v in kv["max"].split()]),
    )


def cmd_ingest(cfg: RunConfig) -> int:
    with open(cfg.data_path, "rb") as fh:
        raw = parse_dataset(fh.read())
    cleaned = drop_missing(raw)
    train_set, test_set = split_train_test(cleaned, cfg.train_fraction, cfg.seed)
    bounds = fit_bounds(train_set)

    digests = {}
    digests["cleaned.csv"] = _write(os.path.join(cfg.out_dir, "cleaned.csv"), dataset_to_csv(cleaned))
    bounds_kv = {
        "min": " ".join(repr(float(v)) for v in bounds.min),
        "max": " ".join(repr(float(v)) for v in bounds.max),
    }
    digests["bounds.txt"] = _write(os.path.join(cfg.out_dir, "bounds.txt"),
                                   serialize.format_flat_kv(bounds_kv).encode())
    manifest = {
        "format": "ingest-manifest-v1",
        "seed": str(cfg.seed),
        "train_fraction": repr(cfg.train_fraction),
        "rows_raw": str(len(raw)),
        "rows_missing": str(int(raw.missing.sum())),
        "rows_cleaned": str(len(cleaned)),
        "rows_train": str(len(train_set)),
        "rows_test": str(len(test_set)),
    }
    for name in sorted(digests):
        manifest[f"digest.{name}"] = digests[name]
    _write(os.path.join(cfg.out_dir, "ingest_manifest.txt"),
           serialize.format_flat_kv(manifest).encode())
    print(f"ingest: {len(raw)} rows, {int(raw.missing.sum())} missing, "
          f"{len(train_set)} train / {len(test_set)} test")
    return EXIT_OK


def cmd_train(cfg: RunConfig) -> int:
    if cfg.members < 2:
        print("error: --members must be >= 2 (ensemble variance needs m-1 > 0)", file=sys.stderr)
        return EXIT_SCHEMA
    cleaned = _load_cleaned(cfg)
    train_set, _ = split_train_test(cleaned, cfg.train_fraction, cfg.seed)
    ens = train_ensemble(train_set, cfg.members, cfg.seed, cfg.train)
    save_ensemble(ens, os.path.join(cfg.out_dir, "ensemble"))
    print(f"train: {cfg.members} members saved to {cfg.out_dir}/ensemble")
    return EXIT_OK


def _read_queries(path: str) -> np.ndarray:
    """Query table: CSV with the ten feature columns (x1..x10 header optional)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r]
    if not rows:
        return np.zeros((0, N_FEATURES))
    start = 1 if not _is_numeric_row(rows[0]) else 0
    out = []
    for r in rows[start:]:
        if len(r) != N_FEATURES:
            raise SchemaError(f"query row has {len(r)} columns, expected {N_FEATURES}")
        out.append([float(c) for c in r])
    return np.array(out).reshape(-1, N_FEATURES)


def _is_numeric_row(row: list[str]) -> bool:
    try:
        [float(c) for c in row]
        return True
    except ValueError:
        return False


def cmd_decide(cfg: RunConfig, queries_path: str | None) -> int:
    ens = load_ensemble(os.path.join(cfg.out_dir, "ensemble"))
    bounds = _load_bounds(cfg)
    if queries_path:
        X = _read_queries(queries_path)
    else:
        cleaned = _load_cleaned(cfg)
        _, test_set = split_train_test(cleaned, cfg.train_fraction, cfg.seed)
        X = test_set.features

    tau_primary = cfg.taus[0]
    spec = cfg.spec
    rows = []
    counts = {tau: {"confident": 0, "decided_by_bound": 0, "undecided": 0} for tau in cfg.taus}
    if len(X):
        mu_all, sigma2_all = ensemble_stats_batch(ens, X)
    for i in range(len(X)):
        outcome = decide(ens, X[i], cfg.epsilon, tau_primary, spec, bounds)
        witness = ""
        lb = ""
        if outcome.bound is not None and outcome.bound.feasible:
            witness = ";".join(repr(float(v)) for v in outcome.bound.witness)
            lb = repr(outcome.bound.lower_bound)
        rows.append([str(i), repr(float(mu_all[i])), repr(float(sigma2_all[i])),
                     outcome.kind, outcome.reason or "", lb, witness])
        for tau in cfg.taus:
            if sigma2_all[i] <= cfg.epsilon:
                counts[tau]["confident"] += 1
            elif outcome.bound is not None and outcome.bound.feasible and outcome.bound.lower_bound > tau:
                counts[tau]["decided_by_bound"] += 1
            else:
                counts[tau]["undecided"] += 1

    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["id", "mu", "sigma2", "outcome", "reason", "lower_bound", "witness"])
    writer.writerows(rows)
    _write(os.path.join(cfg.out_dir, "decisions.csv"), out.getvalue().encode())

    n = max(len(X), 1)
    report = {"format": "decision-report-v1", "rows": str(len(X)),
              "epsilon": repr(cfg.epsilon), "tau_primary": repr(tau_primary)}
    for tau in cfg.taus:
        c = counts[tau]
        report[f"tau_{tau}.confident"] = str(c["confident"])
        report[f"tau_{tau}.decided_by_bound"] = str(c["decided_by_bound"])
        report[f"tau_{tau}.undecided"] = str(c["undecided"])
        report[f"tau_{tau}.undecided_fraction"] = repr(c["undecided"] / n)
    _write(os.path.join(cfg.out_dir, "decision_report.txt"),
           serialize.format_flat_kv(report).encode())
    print(f"decide: {len(X)} rows -> {cfg.out_dir}/decisions.csv")
    return EXIT_OK


def cmd_experiment(cfg: RunConfig) -> int:
    cleaned = _load_cleaned(cfg)
    exp_cfg = ExperimentConfig(seed=cfg.seed, train_fraction=cfg.train_fraction,
                               censor_tau=cfg.censor_tau, m=cfg.members,
                               epsilon=cfg.epsilon, train=cfg.train)
    report, _, _ = run_selection_experiment(cleaned, exp_cfg)
    kv = {"format": "experiment-report-v1"}
    kv.update(report.as_flat_kv())
    _write(os.path.join(cfg.out_dir, "experiment_report.txt"),
           serialize.format_flat_kv(kv).encode())
    for k, v in report.as_flat_kv().items():
        print(f"{k} = {v}")
    return EXIT_OK


def cmd_importance(cfg: RunConfig) -> int:
    ens = load_ensemble(os.path.join(cfg.out_dir, "ensemble"))
    cleaned = _load_cleaned(cfg)
    imp = feature_importance(ens, cleaned)
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["feature", "importance"])
    for name, value in importance_table(imp):
        writer.writerow([name, repr(value)])
    _write(os.path.join(cfg.out_dir, "importance.csv"), out.getvalue().encode())
    print(out.getvalue(), end="")
    return EXIT_OK


def cmd_plotdata(cfg: RunConfig) -> int:
    """Emit (x3, x7, x9, label) rows for the OOD visualization.

    Unconfident rows are restricted to 10 < x3+x7+x9 < 20; a
    deterministic subsample of the confident set is added as background.
    """
    ens = load_ensemble(os.path.join(cfg.out_dir, "ensemble"))
    cleaned = _load_cleaned(cfg)
    confident, unconfident = split_by_confidence(ens, cleaned, cfg.epsilon)

    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["x3", "x7", "x9", "label"])
    s = unconfident.features[:, [2, 6, 8]].sum(axis=1) if len(unconfident) else np.array([])
    keep = (s > 10) & (s < 20)
    for i in np.flatnonzero(keep):
        writer.writerow([int(unconfident.features[i, 2]), int(unconfident.features[i, 6]),
                         int(unconfident.features[i, 8]), "unconfident"])
    rng = np.random.default_rng(cfg.seed)
    n_bg = min(cfg.plot_background_rows, len(confident))
    for i in np.sort(rng.choice(len(confident), size=n_bg, replace=False)) if n_bg else []:
        writer.writerow([int(confident.features[i, 2]), int(confident.features[i, 6]),
                         int(confident.features[i, 8]), "confident"])
    _write(os.path.join(cfg.out_dir, "plotdata.csv"), out.getvalue().encode())
    print(f"plotdata: {int(keep.sum())} unconfident + {n_bg} background rows")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twostage-credit",
                                     description="Two-stage confident credit scoring pipeline")
    parser.add_argument("--config", metavar="PATH", help="flat key=value config file")
    parser.add_argument("--seed", type=int, metavar="N", help="root seed override")
    parser.add_argument("--epsilon", type=float, metavar="F", help="variance threshold override")
    parser.add_argument("--tau", metavar="F[,F...]", help="decision threshold list override")
    parser.add_argument("--members", type=int, metavar="N", help="ensemble size override")
    parser.add_argument("--out", metavar="DIR", help="output directory override")
    parser.add_argument("--data", metavar="PATH", help="input CSV override")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest", help="parse, clean, split, and persist the dataset")
    sub.add_parser("train", help="train and persist the ensemble")
    p_decide = sub.add_parser("decide", help="route query points through both stages")
    p_decide.add_argument("--queries", metavar="PATH", help="query table (default: test split)")
    sub.add_parser("experiment", help="run the censoring (OOD) experiment")
    sub.add_parser("importance", help="sensitivity-based feature importance")
    sub.add_parser("plotdata", help="emit the OOD visualization table")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args)
        if args.command == "ingest":
            return cmd_ingest(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "decide":
            return cmd_decide(cfg, args.queries)
        if args.command == "experiment":
            return cmd_experiment(cfg)
        if args.command == "importance":
            return cmd_importance(cfg)
        if args.command == "plotdata":
            return cmd_plotdata(cfg)
        raise AssertionError(f"unhandled command {args.command}")
    except (SchemaError, EmptyDatasetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except DegenerateExperiment as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
