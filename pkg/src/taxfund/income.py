"""Household income estimation from rent and house characteristics.

Survey records are imputed first (the income column itself is routinely
missing at the tails), then a regression forest predicts before-tax
income from monthly rent plus house characteristics. Predictions are
bounded by the training income range; a parcel without a rent estimate
gets no prediction at all rather than a guess.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .forest import (
    DesignMatrix,
    ForestModel,
    ForestParams,
    Task,
    model_from_json,
    model_to_json,
    train_forest,
)
from .impute import impute
from .types import CexRecord, ParcelRecord, RentEstimate

FORMAT_VERSION = 1

CEX_COLUMNS = ["income", "monthly_rent", "bedrooms", "bathrooms", "rooms", "home_age"]
HOUSE_FEATURES = ["monthly_rent", "bedrooms", "bathrooms", "rooms", "home_age"]


def prepare_cex(records: list[CexRecord],
                filter_config: dict[str, float] | None = None) -> DesignMatrix:
    """Numeric matrix from survey records, missing cells preserved.

    filter_config selects a subpopulation by exact match on extra
    columns (e.g. {"homeowner_flag": 1.0}); rows missing a filter column
    are dropped.
    """
    if not records:
        raise ValueError("no survey records")
    extras = [name for name, _ in records[0].extra_features]
    columns = CEX_COLUMNS + extras

    rows = []
    for r in records:
        extra_map = dict(r.extra_features)
        row = [r.before_tax_income, r.monthly_rent, r.bedrooms, r.bathrooms,
               r.rooms, r.home_age] + [extra_map.get(name, float("nan")) for name in extras]
        if filter_config:
            keep = all(
                not np.isnan(row[columns.index(col)]) and row[columns.index(col)] == val
                for col, val in filter_config.items()
            )
            if not keep:
                continue
        rows.append(row)
    if not rows:
        raise ValueError("empty training set after filtering")
    return DesignMatrix(columns=columns, X=np.array(rows, dtype=float))


@dataclass
class IncomeModel:
    forest: ForestModel
    features: list[str]
    n_training_rows: int
    oob_r2: float

    @property
    def income_range(self) -> tuple[float, float]:
        return self.forest.train_target_range


def train_income_model(matrix: DesignMatrix, forest_params: ForestParams | None = None,
                       impute_params: ForestParams | None = None,
                       max_impute_iters: int = 10, impute_tol: float = 1e-3,
                       rent_only: bool = False) -> IncomeModel:
    """Impute, then regress income on rent (+ house characteristics).

    Imputation sees every column, including survey-only ones; the forest
    itself trains only on features a parcel can supply.
    """
    if "income" not in matrix.columns:
        raise ValueError("matrix lacks an income column")
    income_col = matrix.columns.index("income")
    observed = ~np.isnan(matrix.X[:, income_col])
    if observed.mean() < 0.5:
        raise ValueError("income column must be at least 50% observed")

    filled = impute(matrix, impute_params, max_impute_iters, impute_tol)
    features = ["monthly_rent"] if rent_only else list(HOUSE_FEATURES)
    train = filled.with_target("income", feature_columns=features, task=Task.REGRESSION)
    forest = train_forest(train, forest_params or ForestParams())
    return IncomeModel(
        forest=forest,
        features=features,
        n_training_rows=train.n_rows,
        oob_r2=forest.oob_score,
    )


def predict_income(model: IncomeModel, parcel: ParcelRecord,
                   rent: RentEstimate | None, reference_year: int = 2017) -> float | None:
    """Annual income estimate; None when the parcel has no rent estimate
    (the caller decides how indeterminate income is treated)."""
    if rent is None:
        return None
    feature_map = {
        "monthly_rent": rent.monthly_rent_low,
        "bedrooms": float(parcel.bedrooms),
        "bathrooms": float(parcel.bathrooms),
        "rooms": float(parcel.rooms),
        "home_age": float(reference_year - parcel.year_built),
    }
    row = np.array([feature_map[f] for f in model.features])
    return float(model.forest.predict_batch(row[None, :])[0])


def income_model_to_json(model: IncomeModel) -> str:
    doc = {
        "format_version": FORMAT_VERSION,
        "features": model.features,
        "n_training_rows": model.n_training_rows,
        "oob_r2": model.oob_r2,
        "forest": json.loads(model_to_json(model.forest)),
    }
    return json.dumps(doc, sort_keys=True, indent=2)


def income_model_from_json(text: str) -> IncomeModel:
    doc = json.loads(text)
    if doc["format_version"] != FORMAT_VERSION:
        raise ValueError(f"unsupported income model format {doc['format_version']}")
    return IncomeModel(
        forest=model_from_json(json.dumps(doc["forest"])),
        features=list(doc["features"]),
        n_training_rows=doc["n_training_rows"],
        oob_r2=doc["oob_r2"],
    )
