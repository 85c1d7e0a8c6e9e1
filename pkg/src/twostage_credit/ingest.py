"""Dataset parsing, cleaning, standardization, and train/test splitting.

Owns the 10-feature credit-scoring schema (label column first) and the
per-feature bounds that the bound optimizer searches within.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

# Column order of the source CSV: label first, then the ten features.
COLUMN_NAMES = (
    "SeriousDlqin2yrs",
    "RevolvingUtilizationOfUnsecuredLines",
    "age",
    "NumberOfTime30-59DaysPastDueNotWorse",
    "DebtRatio",
    "MonthlyIncome",
    "NumberOfOpenCreditLinesAndLoans",
    "NumberOfTimes90DaysLate",
    "NumberRealEstateLoansOrLines",
    "NumberOfTime60-89DaysPastDueNotWorse",
    "NumberOfDependents",
)

FEATURE_NAMES = ("x1", "x2", "x3", "x4", "x5", "x6", "x7", "x8", "x9", "x10")
N_FEATURES = 10

# Zero-based feature indices that hold integer counts (x2, x3, x6..x10).
INTEGER_FEATURES = (1, 2, 5, 6, 7, 8, 9)


class SchemaError(ValueError):
    """The input table does not match the expected column layout."""


class EmptyDatasetError(ValueError):
    """An operation produced or received a dataset with no usable rows."""


@dataclass
class Dataset:
    """An ordered collection of labeled applicants.

    ``features`` is an (n, 10) float array in raw units, ``labels`` an
    (n,) array of {0, 1}. ``missing`` flags rows with at least one
    unparseable or absent field; it is all-False after cleaning.
    """

    features: np.ndarray
    labels: np.ndarray
    provenance: str = "raw"
    missing: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64).reshape(-1, N_FEATURES)
        self.labels = np.asarray(self.labels, dtype=np.int8).reshape(-1)
        if self.missing is None:
            self.missing = np.zeros(len(self.labels), dtype=bool)
        else:
            self.missing = np.asarray(self.missing, dtype=bool).reshape(-1)
        if not (len(self.features) == len(self.labels) == len(self.missing)):
            raise ValueError("features, labels, and missing flags must have equal length")

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, index: np.ndarray, provenance: str) -> "Dataset":
        return Dataset(self.features[index], self.labels[index], provenance, self.missing[index])


def parse_dataset(csv_bytes: bytes, provenance: str = "raw") -> Dataset:
    """Parse a header-bearing CSV into a Dataset, flagging bad rows as missing.

    An optional unnamed leading row-index column is tolerated. Missing
    values are empty cells or the literal "NA". Rows with unparseable or
    absent fields are kept but flagged, so cleaning stays a separate,
    observable step.
    """
    text = csv_bytes.decode("utf-8-sig")
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError("input is empty: no header row")
    header = [h.strip() for h in header]
    offset = 0
    if header and header[0] in ("", "Unnamed: 0", "id", "Id", "ID"):
        offset = 1
    expected = list(COLUMN_NAMES)
    got = header[offset:]
    if got != expected:
        for name in expected:
            if name not in got:
                raise SchemaError(f"missing column: {name}")
        raise SchemaError(f"unexpected column order: {got}")

    rows = []
    labels = []
    missing = []
    n_cols = len(header)
    for row in reader:
        if not row:
            continue
        cells = [c.strip() for c in row[offset:]]
        bad = len(row) != n_cols
        values = np.zeros(N_FEATURES + 1)
        if not bad:
            for j, cell in enumerate(cells):
                if cell == "" or cell == "NA":
                    bad = True
                    break
                try:
                    values[j] = float(cell)
                except ValueError:
                    bad = True
                    break
        if not bad and values[0] not in (0.0, 1.0):
            bad = True
        rows.append(values[1:])
        labels.append(int(values[0]) if not bad else 0)
        missing.append(bad)
    features = np.array(rows).reshape(-1, N_FEATURES)
    return Dataset(features, np.array(labels), provenance, np.array(missing, dtype=bool))


def drop_missing(dataset: Dataset) -> Dataset:
    """Keep exactly the rows with no missing flags, preserving order."""
    keep = ~dataset.missing
    if not keep.any():
        raise EmptyDatasetError("all rows have missing fields")
    return dataset.subset(keep, provenance=f"{dataset.provenance}-cleaned")


def split_train_test(dataset: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Deterministic disjoint split; train size is round(n * fraction), ties up.

    Row order within each part follows the original dataset order.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n = len(dataset)
    n_train = int(np.floor(n * train_fraction + 0.5))
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])
    return (
        dataset.subset(train_idx, provenance="train"),
        dataset.subset(test_idx, provenance="test"),
    )


@dataclass
class Standardizer:
    """Per-feature z-score transform fitted on training statistics."""

    mean: np.ndarray
    std: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std

    def inverse(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=np.float64) * self.std + self.mean


def fit_standardizer(train: Dataset) -> Standardizer:
    """Fit per-feature mean and sample (n-1) standard deviation.

    Constant columns are rejected by name: a zero-spread feature cannot
    be standardized and would poison training.
    """
    if len(train) == 0:
        raise EmptyDatasetError("cannot fit standardizer on empty dataset")
    mean = train.features.mean(axis=0)
    std = train.features.std(axis=0, ddof=1) if len(train) > 1 else np.zeros(N_FEATURES)
    for j, s in enumerate(std):
        if s <= 0.0:
            raise ValueError(f"constant feature column: {FEATURE_NAMES[j]}")
    return Standardizer(mean=mean, std=std)


@dataclass
class FeatureBounds:
    """Per-feature (min, max) observed on the training set, raw units."""

    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        if np.any(self.min > self.max):
            raise ValueError("feature min exceeds max")

    def contains(self, x: np.ndarray) -> bool:
        x = np.asarray(x, dtype=np.float64)
        return bool(np.all(x >= self.min - 1e-12) and np.all(x <= self.max + 1e-12))


def fit_bounds(train: Dataset) -> FeatureBounds:
    if len(train) == 0:
        raise EmptyDatasetError("cannot fit bounds on empty dataset")
    return FeatureBounds(min=train.features.min(axis=0), max=train.features.max(axis=0))


def dataset_to_csv(dataset: Dataset) -> bytes:
    """Serialize retained rows back to the source CSV layout."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(COLUMN_NAMES)
    for i in range(len(dataset)):
        row = [str(int(dataset.labels[i]))]
        for j, v in enumerate(dataset.features[i]):
            if j in INTEGER_FEATURES:
                row.append(str(int(round(v))))
            else:
                row.append(repr(float(v)))
        writer.writerow(row)
    return out.getvalue().encode("utf-8")
