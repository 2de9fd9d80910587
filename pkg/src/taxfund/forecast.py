"""Parcel-level assessment forecasting.

Program-area parcels are assigned to the training-area trajectory
clusters with a classification forest over frozen, versioned feature
encoding; each parcel's assessed value is then projected along its
cluster's retained trend steps. A flat legacy appreciation rule (50%
below a value threshold, 12% above) is kept as a comparison baseline.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .clustering import ClusterModel
from .eligibility import owner_occupied
from .forest import DesignMatrix, ForestModel, ForestParams, Task, train_forest
from .types import (
    AssessmentSeries,
    Dataset,
    LandUse,
    ParcelRecord,
    PROGRAM_NEIGHBORHOODS,
    SERIES_YEARS,
)

FORMAT_VERSION = 1

# Frozen encoding order; serialized with every classifier so a train /
# assign mismatch is detectable instead of silently misaligned.
FEATURE_COLUMNS: tuple[str, ...] = (
    "land_use_one_family",
    "land_use_two_family",
    "land_use_three_family",
    "land_use_condo",
    "land_use_townhouse",
    "land_use_condo_loft",
    "living_units",
    "land_acres",
    "heated_sqft",
    "rooms",
    "bedrooms",
    "bathrooms",
    "distance_to_beltline",
    "city_exemption",
    "county_exemption",
    "owner_occupied",
    "home_age",
    "base_year_value",
)

_LAND_USE_ONEHOT = {
    LandUse.ONE_FAMILY: 0,
    LandUse.TWO_FAMILY: 1,
    LandUse.THREE_FAMILY: 2,
    LandUse.CONDO: 3,
    LandUse.TOWNHOUSE: 4,
    LandUse.CONDO_LOFT: 5,
}


class ForecastMethod(str, Enum):
    CLUSTER_TREND = "ClusterTrend"
    LEGACY_FLAT = "LegacyFlat"


def encode_features(parcels: list[ParcelRecord],
                    assessments: dict[str, AssessmentSeries],
                    reference_year: int = 2017,
                    value_year: int = SERIES_YEARS[0]) -> DesignMatrix:
    """Encode parcels in the frozen column order; absent values are NaN."""
    rows = np.empty((len(parcels), len(FEATURE_COLUMNS)))
    for i, p in enumerate(parcels):
        onehot = [0.0] * 6
        slot = _LAND_USE_ONEHOT.get(p.land_use)
        if slot is not None:
            onehot[slot] = 1.0
        series = assessments.get(p.parcel_id)
        base_value = series.value(value_year) if series is not None else None
        rows[i] = onehot + [
            float(p.living_units),
            p.land_acres,
            p.heated_sqft,
            float(p.rooms),
            float(p.bedrooms),
            float(p.bathrooms),
            p.distance_to_beltline,
            float(p.city_exemption),
            float(p.county_exemption),
            float(owner_occupied(p)),
            float(reference_year - p.year_built),
            float("nan") if base_value is None else base_value,
        ]
    return DesignMatrix(columns=list(FEATURE_COLUMNS), X=rows)


def fit_cluster_classifier(parcels: list[ParcelRecord],
                           assessments: dict[str, AssessmentSeries],
                           labels: dict[str, int],
                           params: ForestParams,
                           reference_year: int = 2017) -> ForestModel:
    """Classification forest mapping parcel features to cluster labels."""
    training = [p for p in parcels if p.parcel_id in labels]
    if not training:
        raise ValueError("no training parcels carry cluster labels")
    y = np.array([labels[p.parcel_id] for p in training], dtype=float)
    counts = np.bincount(y.astype(int))
    min_leaf = params.min_leaf if params.min_leaf is not None else 1
    small = [c for c, cnt in enumerate(counts) if 0 < cnt < min_leaf]
    if small:
        raise ValueError(f"clusters {small} have fewer than min_leaf={min_leaf} members")
    matrix = encode_features(training, assessments, reference_year)
    matrix.y = y
    matrix.task = Task.CLASSIFICATION
    return train_forest(matrix, params)


def assign_clusters(classifier: ForestModel,
                    parcels: list[ParcelRecord],
                    assessments: dict[str, AssessmentSeries],
                    reference_year: int = 2017) -> dict[str, int]:
    """Total assignment: every parcel gets a cluster label."""
    if list(classifier.feature_names) != list(FEATURE_COLUMNS):
        raise ValueError("classifier feature encoding does not match this version")
    if not parcels:
        return {}
    matrix = encode_features(parcels, assessments, reference_year)
    pred = classifier.predict_batch(matrix.X)
    return {p.parcel_id: int(pred[i]) for i, p in enumerate(parcels)}


def project_values(base_value: float, trend: tuple[float, ...] | list[float],
                   horizon: int) -> list[float]:
    """Compound base_value along trend steps, repeating cyclically when
    the horizon outruns the trend."""
    if base_value <= 0:
        raise ValueError("base value must be positive")
    if not trend:
        raise ValueError("trend is empty")
    if any(s <= -1.0 for s in trend):
        raise ValueError("trend step <= -100% would zero the value")
    values = []
    v = base_value
    for t in range(horizon):
        v = v * (1.0 + trend[t % len(trend)])
        values.append(v)
    return values


@dataclass(frozen=True)
class LegacyAppreciationConfig:
    base_rate: float = 0.12
    low_value_rate: float = 0.50
    threshold: float = 37_000.0

    def __post_init__(self) -> None:
        if self.base_rate <= -1 or self.low_value_rate <= -1:
            raise ValueError("rates must exceed -100%")
        if self.threshold <= 0:
            raise ValueError("threshold must be positive")


def legacy_forecast(base_value: float, cfg: LegacyAppreciationConfig,
                    horizon: int) -> list[float]:
    """Flat-rate appreciation: the low rate applies while the value sits
    under the threshold, checked before each step."""
    if base_value <= 0:
        raise ValueError("base value must be positive")
    values = []
    v = base_value
    for _ in range(horizon):
        rate = cfg.low_value_rate if v < cfg.threshold else cfg.base_rate
        v = v * (1.0 + rate)
        values.append(v)
    return values


@dataclass(frozen=True)
class ForecastRow:
    parcel_id: str
    cluster: int
    method: ForecastMethod
    base_year: int
    base_value: float
    projected: tuple[tuple[int, float], ...]  # (year, value)


@dataclass(frozen=True)
class ForecastTable:
    rows: tuple[ForecastRow, ...]
    horizon: int
    base_year: int
    warnings: tuple[str, ...]
    excluded: tuple[str, ...]  # parcels with no assessment history

    def by_id(self) -> dict[str, ForecastRow]:
        return {r.parcel_id: r for r in self.rows}


def forecast_all(dataset: Dataset, cluster_model: ClusterModel,
                 classifier: ForestModel | None,
                 horizon: int = 7,
                 method: ForecastMethod = ForecastMethod.CLUSTER_TREND,
                 base_year: int = 2017,
                 legacy: LegacyAppreciationConfig | None = None,
                 reference_year: int = 2017) -> ForecastTable:
    """One projection row per program-area parcel (empty lots excluded)."""
    assessments = dataset.assessments_by_id()
    targets = [p for p in dataset.parcels
               if p.neighborhood in PROGRAM_NEIGHBORHOODS and p.land_use is not LandUse.EMPTY_LOT]

    warnings: list[str] = []
    excluded: list[str] = []
    usable: list[tuple[ParcelRecord, float]] = []
    for p in targets:
        series = assessments.get(p.parcel_id)
        obs = series.latest(at_or_before=base_year) if series is not None else None
        if obs is None:
            excluded.append(p.parcel_id)
            continue
        year, value = obs
        if value <= 0:
            excluded.append(p.parcel_id)
            continue
        if year != base_year:
            warnings.append(f"{p.parcel_id}: no {base_year} assessment, using {year}")
        usable.append((p, value))

    clusters: dict[str, int] = {}
    if classifier is not None:
        clusters = assign_clusters(classifier, [p for p, _ in usable], assessments,
                                   reference_year)
    elif method is ForecastMethod.CLUSTER_TREND:
        raise ValueError("cluster-trend forecasting needs a classifier")

    legacy = legacy or LegacyAppreciationConfig()
    years = tuple(range(base_year + 1, base_year + 1 + horizon))
    rows = []
    for p, base_value in usable:
        cluster = clusters.get(p.parcel_id, -1)
        if method is ForecastMethod.CLUSTER_TREND:
            values = project_values(base_value, cluster_model.trend[cluster], horizon)
        else:
            values = legacy_forecast(base_value, legacy, horizon)
        rows.append(ForecastRow(
            parcel_id=p.parcel_id,
            cluster=cluster,
            method=method,
            base_year=base_year,
            base_value=base_value,
            projected=tuple(zip(years, values)),
        ))
    return ForecastTable(tuple(rows), horizon, base_year, tuple(warnings), tuple(excluded))


def forecast_to_csv(table: ForecastTable, path: str | Path) -> None:
    years = [table.base_year + 1 + i for i in range(table.horizon)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["parcel_id", "cluster", "method", "base_value"] + [f"y{y}" for y in years])
        for r in table.rows:
            w.writerow([r.parcel_id, r.cluster, r.method.value, repr(r.base_value)]
                       + [repr(v) for _, v in r.projected])


def forecast_to_json(table: ForecastTable) -> str:
    doc = {
        "format_version": FORMAT_VERSION,
        "horizon": table.horizon,
        "base_year": table.base_year,
        "warnings": list(table.warnings),
        "excluded": list(table.excluded),
        "rows": [
            {
                "parcel_id": r.parcel_id,
                "cluster": r.cluster,
                "method": r.method.value,
                "base_year": r.base_year,
                "base_value": r.base_value,
                "projected": [[y, v] for y, v in r.projected],
            }
            for r in table.rows
        ],
    }
    return json.dumps(doc, sort_keys=True, indent=2)


def forecast_from_json(text: str) -> ForecastTable:
    doc = json.loads(text)
    if doc["format_version"] != FORMAT_VERSION:
        raise ValueError(f"unsupported forecast format {doc['format_version']}")
    rows = tuple(
        ForecastRow(
            parcel_id=r["parcel_id"],
            cluster=r["cluster"],
            method=ForecastMethod(r["method"]),
            base_year=r["base_year"],
            base_value=r["base_value"],
            projected=tuple((y, v) for y, v in r["projected"]),
        )
        for r in doc["rows"]
    )
    return ForecastTable(rows, doc["horizon"], doc["base_year"],
                         tuple(doc["warnings"]), tuple(doc["excluded"]))
