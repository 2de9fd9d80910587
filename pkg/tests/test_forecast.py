import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from taxfund.forecast import (
    FEATURE_COLUMNS,
    ForecastMethod,
    LegacyAppreciationConfig,
    assign_clusters,
    encode_features,
    fit_cluster_classifier,
    forecast_all,
    forecast_from_json,
    forecast_to_json,
    legacy_forecast,
    project_values,
)
from taxfund.forest import ForestParams
from taxfund.types import LandUse, PROGRAM_NEIGHBORHOODS


def test_project_values_hand_case():
    assert project_values(100_000, [0.10, 0.05], 2) == pytest.approx([110_000.0, 115_500.0])


def test_project_values_zero_trend_constant():
    assert project_values(80_000, [0.0, 0.0], 5) == pytest.approx([80_000.0] * 5)


def test_project_values_cyclic_fill():
    got = project_values(100_000, [0.02, 0.03], 3)
    want = [102_000.0, 102_000.0 * 1.03, 102_000.0 * 1.03 * 1.02]
    assert got == pytest.approx(want)


def test_project_values_validation():
    with pytest.raises(ValueError):
        project_values(0, [0.1], 2)
    with pytest.raises(ValueError):
        project_values(100, [], 2)
    with pytest.raises(ValueError):
        project_values(100, [-1.0], 2)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.1, 1e6), st.floats(0.5, 10),
       st.lists(st.floats(-0.5, 0.5), min_size=1, max_size=6),
       st.integers(1, 12))
def test_project_values_scales_linearly(base, c, trend, horizon):
    scaled = project_values(base * c, trend, horizon)
    plain = project_values(base, trend, horizon)
    assert scaled == pytest.approx([v * c for v in plain], rel=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-0.5, 0.5), min_size=2, max_size=8), st.data())
def test_cyclic_fill_matches_plain_when_horizon_fits(trend, data):
    horizon = data.draw(st.integers(1, len(trend)))
    got = project_values(1000.0, trend, horizon)
    v, want = 1000.0, []
    for s in trend[:horizon]:
        v *= 1.0 + s
        want.append(v)
    assert got == pytest.approx(want)


def test_legacy_above_threshold():
    assert legacy_forecast(40_000, LegacyAppreciationConfig(), 2) == pytest.approx(
        [44_800.0, 50_176.0])


def test_legacy_below_threshold_crossing():
    # 20,000 -> 30,000 (50%, still below 37k) -> 45,000 (50% again)
    got = legacy_forecast(20_000, LegacyAppreciationConfig(), 3)
    assert got[:2] == pytest.approx([30_000.0, 45_000.0])
    # 45,000 >= 37,000 so the third step is 12%
    assert got[2] == pytest.approx(45_000.0 * 1.12)


def test_legacy_boundary_exactly_at_threshold():
    got = legacy_forecast(37_000, LegacyAppreciationConfig(), 1)
    assert got == pytest.approx([37_000.0 * 1.12])


def test_legacy_zero_threshold_degenerates_to_flat_rate():
    cfg = LegacyAppreciationConfig(threshold=1e-9)
    got = legacy_forecast(5_000, cfg, 4)
    assert got == pytest.approx([5_000 * 1.12 ** k for k in range(1, 5)], rel=1e-12)


def test_encode_features_frozen_order(bundle):
    dataset = bundle["dataset"]
    m = encode_features(list(dataset.parcels[:5]), dataset.assessments_by_id())
    assert m.columns == list(FEATURE_COLUMNS)
    assert m.X.shape == (5, len(FEATURE_COLUMNS))


def test_classifier_memorizes_training_parcel(bundle):
    dataset = bundle["dataset"]
    model = bundle["classifier"]
    cm = bundle["cluster_model"]
    assess = dataset.assessments_by_id()
    training = bundle["training"][:30]
    assigned = assign_clusters(model, training, assess)
    agree = sum(assigned[p.parcel_id] == cm.labels[p.parcel_id] for p in training)
    assert agree >= 28  # near-perfect on its own training rows


def test_assignment_total(bundle):
    dataset = bundle["dataset"]
    targets = [p for p in dataset.parcels if p.neighborhood in PROGRAM_NEIGHBORHOODS]
    assigned = assign_clusters(bundle["classifier"], targets, dataset.assessments_by_id())
    assert len(assigned) == len(targets)


def test_assignment_rejects_mismatched_encoding(bundle):
    clf = dataclasses.replace(bundle["classifier"])
    clf.feature_names = list(clf.feature_names[:-1])
    with pytest.raises(ValueError):
        assign_clusters(clf, list(bundle["dataset"].parcels[:2]),
                        bundle["dataset"].assessments_by_id())


def test_single_cluster_training_constant(bundle):
    dataset = bundle["dataset"]
    training = bundle["training"][:40]
    labels = {p.parcel_id: 0 for p in training}
    clf = fit_cluster_classifier(training, dataset.assessments_by_id(), labels,
                                 ForestParams(n_trees=5, seed=0))
    assigned = assign_clusters(clf, training, dataset.assessments_by_id())
    assert set(assigned.values()) == {0}


def test_forecast_all_row_per_program_parcel(bundle):
    dataset = bundle["dataset"]
    table = bundle["forecasts"]
    expected = [p.parcel_id for p in dataset.parcels
                if p.neighborhood in PROGRAM_NEIGHBORHOODS
                and p.land_use is not LandUse.EMPTY_LOT]
    covered = {r.parcel_id for r in table.rows} | set(table.excluded)
    assert covered == set(expected)
    years = [y for y, _ in table.rows[0].projected]
    assert years == list(range(2018, 2025))


def test_forecast_values_positive(bundle):
    for row in bundle["forecasts"].rows:
        assert all(v > 0 for _, v in row.projected)


def test_forecast_zero_trend_cluster_is_flat(bundle):
    cm = bundle["cluster_model"]
    flat = dataclasses.replace(cm, trend={c: (0.0,) * 5 for c in cm.trend})
    table = forecast_all(bundle["dataset"], flat, bundle["classifier"], horizon=7)
    row = table.rows[0]
    assert [v for _, v in row.projected] == pytest.approx([row.base_value] * 7)


def test_forecast_legacy_flat_hand_value(bundle):
    table = forecast_all(bundle["dataset"], bundle["cluster_model"], bundle["classifier"],
                         horizon=7, method=ForecastMethod.LEGACY_FLAT)
    row = table.rows[0]
    v = row.base_value
    for _ in range(7):
        rate = 0.50 if v < 37_000 else 0.12
        v *= 1 + rate
    assert row.projected[-1][1] == pytest.approx(v)
    base_37k = 37_000 * 1.12 ** 7
    assert base_37k == pytest.approx(81_795.21, abs=0.5)


def test_forecast_deterministic(bundle):
    a = forecast_all(bundle["dataset"], bundle["cluster_model"], bundle["classifier"], horizon=7)
    b = forecast_all(bundle["dataset"], bundle["cluster_model"], bundle["classifier"], horizon=7)
    assert a == b


def test_forecast_json_round_trip(bundle):
    table = bundle["forecasts"]
    clone = forecast_from_json(forecast_to_json(table))
    assert clone == table


def test_forecast_fallback_base_year(bundle):
    # drop the 2017 observation for one parcel: latest earlier year used, warned
    dataset = bundle["dataset"]
    target = bundle["forecasts"].rows[0].parcel_id
    new_series = []
    for s in dataset.assessments:
        if s.parcel_id == target:
            s = dataclasses.replace(
                s, observations=tuple((y, v) for y, v in s.observations if y != 2017))
        new_series.append(s)
    patched = dataclasses.replace(dataset, assessments=tuple(new_series))
    table = forecast_all(patched, bundle["cluster_model"], bundle["classifier"], horizon=7)
    assert any(target in w for w in table.warnings)
    row = table.by_id()[target]
    assert row.base_value > 0
