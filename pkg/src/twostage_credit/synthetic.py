"""Surrogate credit-scoring data generator.

Produces a dataset with the same column layout, units, and rough
marginal shapes as the public GiveMeSomeCredit table, for desk-scale
runs where the real file is not available. A shared latent riskiness
factor correlates the three delinquency counts with each other and with
the default label, so censoring-style experiments behave qualitatively
like the real data: defaults are rare (~7%), delinquency counts are
mostly zero with a heavy right tail, and a share of rows has missing
income or dependents.
"""

from __future__ import annotations

import io

import numpy as np
from scipy.special import expit

from .ingest import Dataset, COLUMN_NAMES, INTEGER_FEATURES

MISSING_INCOME_RATE = 0.198
MISSING_DEPENDENTS_RATE = 0.026


def generate(n: int, seed: int) -> tuple[Dataset, np.ndarray]:
    """Return (dataset, missing mask) with n rows in raw units."""
    rng = np.random.default_rng(seed)
    z = rng.normal(size=n)  # latent riskiness

    age = np.clip(np.round(rng.normal(50, 14, n)), 21, 96)
    # delinquency counts: mostly zero, heavy tail driven by riskiness
    x3 = np.minimum(rng.poisson(np.exp(-2.0 + 1.3 * z)), 13)
    x7 = np.minimum(rng.poisson(np.exp(-2.6 + 1.5 * z)), 17)
    x9 = np.minimum(rng.poisson(np.exp(-2.9 + 1.4 * z)), 11)

    util = expit(rng.normal(-1.2 + 0.55 * z, 1.3, n)) * rng.uniform(0.9, 1.4, n)
    debt_ratio = np.exp(rng.normal(-1.1, 0.9, n))
    income = np.round(np.exp(rng.normal(8.55, 0.55, n)))
    open_lines = rng.poisson(8.0, n)
    real_estate = rng.poisson(1.0, n)
    dependents = rng.poisson(0.76, n)

    logit = (
        -3.55
        + 0.75 * np.minimum(x3, 6)
        + 0.95 * np.minimum(x7, 6)
        + 0.70 * np.minimum(x9, 6)
        + 0.9 * np.minimum(util, 1.3)
        - 0.022 * (age - 50)
        + 0.08 * np.minimum(debt_ratio, 3.0)
        - 0.18 * (np.log(income) - 8.55)
    )
    y = (rng.uniform(size=n) < expit(logit)).astype(np.int8)

    features = np.column_stack(
        [util, age, x3, debt_ratio, income, open_lines, x7, real_estate, x9, dependents]
    ).astype(np.float64)
    missing = (rng.uniform(size=n) < MISSING_INCOME_RATE) | (
        rng.uniform(size=n) < MISSING_DEPENDENTS_RATE
    )
    return Dataset(features, y, provenance="synthetic", missing=missing.copy()), missing


def generate_csv(n: int, seed: int) -> bytes:
    """Render a generated table as CSV, with NA/empty cells for missing rows."""
    rng = np.random.default_rng(seed + 1)
    dataset, missing = generate(n, seed)
    out = io.StringIO()
    out.write(",".join(COLUMN_NAMES) + "\n")
    income_gone = rng.uniform(size=n) < 0.9  # which missing rows lose income vs dependents
    for i in range(n):
        cells = [str(int(dataset.labels[i]))]
        for j, v in enumerate(dataset.features[i]):
            cells.append(str(int(round(v))) if j in INTEGER_FEATURES else repr(float(v)))
        if missing[i]:
            if income_gone[i]:
                cells[5] = "NA"
            else:
                cells[10] = ""
        out.write(",".join(cells) + "\n")
    return out.getvalue().encode("utf-8")
