import dataclasses
import json

import numpy as np
import pytest

from taxfund.costsim import (
    MillageConfig,
    ScenarioConfig,
    annual_tax,
    estimate_to_json,
    expected_enrolled,
    expected_survivors,
    household_subsidy,
    run_scenario,
    scenario_from_json,
    scenario_to_json,
    simulate_survivors,
)
from taxfund.eligibility import IncomeMode, LienMode
from taxfund.forecast import ForecastMethod
from taxfund.types import LandUse, Neighborhood, ParcelRecord


def plain_parcel(**kwargs) -> ParcelRecord:
    defaults = dict(
        parcel_id="X", neighborhood=Neighborhood.VINE_CITY,
        situs_address="1 A St", owner_address="1 A St",
        land_use=LandUse.ONE_FAMILY, living_units=1, land_acres=0.1,
        heated_sqft=1000.0, rooms=5, bedrooms=3, bathrooms=1, year_built=1950,
        city_exemption=False, county_exemption=False, homestead_exemption=False,
        distance_to_beltline=500.0,
    )
    defaults.update(kwargs)
    return ParcelRecord(**defaults)


NO_EXEMPT = MillageConfig(assessment_ratio=0.40, county_millage=0.020,
                          city_millage=0.020, exemption_amounts=())


def test_annual_tax_hand_case():
    assert annual_tax(100_000, plain_parcel(), NO_EXEMPT) == pytest.approx(1_600.0)


def test_annual_tax_zero_value():
    assert annual_tax(0.0, plain_parcel(), NO_EXEMPT) == 0.0


def test_annual_tax_exemptions_clamp_at_zero():
    mc = MillageConfig(assessment_ratio=0.40, county_millage=0.02, city_millage=0.02,
                       exemption_amounts=(("homestead", 1_000_000.0),))
    p = plain_parcel(homestead_exemption=True)
    assert annual_tax(50_000, p, mc) == 0.0


def test_annual_tax_applies_flagged_exemptions_only():
    mc = MillageConfig(assessment_ratio=1.0, county_millage=0.01, city_millage=0.0,
                       exemption_amounts=(("homestead", 10_000.0), ("city", 5_000.0)))
    base = annual_tax(100_000, plain_parcel(), mc)
    with_home = annual_tax(100_000, plain_parcel(homestead_exemption=True), mc)
    with_both = annual_tax(100_000, plain_parcel(homestead_exemption=True,
                                                 city_exemption=True), mc)
    assert base == pytest.approx(1_000.0)
    assert with_home == pytest.approx(900.0)
    assert with_both == pytest.approx(850.0)


def test_subsidy_flat_forecast_zero():
    p = plain_parcel()
    assert household_subsidy([100_000.0] * 3, 100_000.0, p, NO_EXEMPT, [True] * 3) == 0.0


def test_subsidy_hand_case():
    # taxes 1000 -> [1100, 1210]: subsidy 100 + 210 = 310
    mc = MillageConfig(assessment_ratio=1.0, county_millage=0.01, city_millage=0.0,
                       exemption_amounts=())
    p = plain_parcel()
    got = household_subsidy([110_000.0, 121_000.0], 100_000.0, p, mc, [True, True])
    assert got == pytest.approx(310.0)
    # inactive years contribute nothing
    partial = household_subsidy([110_000.0, 121_000.0], 100_000.0, p, mc, [False, True])
    assert partial == pytest.approx(210.0)


def test_subsidy_never_negative():
    p = plain_parcel()
    got = household_subsidy([50_000.0, 120_000.0], 100_000.0, p, NO_EXEMPT, [True, True])
    assert got == pytest.approx(max(0.0, (120_000 - 100_000) * 0.4 * 0.04))


def test_expected_enrolled_table_rows():
    assert expected_enrolled(702, 0.79) == pytest.approx(554.58)
    assert expected_enrolled(100, 1.0) == 100
    assert expected_enrolled(100, 0.0) == 0
    with pytest.raises(ValueError):
        expected_enrolled(10, 1.5)


def test_expected_survivors_closed_form():
    assert expected_survivors(384, 0.05, 7) == pytest.approx(384 * 0.95 ** 7)
    assert expected_survivors(200, 0.0, 9) == 200
    assert expected_survivors(200, 0.05, 0) == 200


def test_simulate_survivors_matches_expectation():
    counts = simulate_survivors(489, 0.05, 7, 4000, seed=3)
    assert abs(counts.mean() - expected_survivors(489, 0.05, 7)) < 2.0


def test_scenario_config_validation():
    with pytest.raises(ValueError):
        ScenarioConfig(dropout_rate=1.2)
    with pytest.raises(ValueError):
        ScenarioConfig(replicates=0)


def test_scenario_json_round_trip():
    sc = ScenarioConfig(include_washington_park=True, lien_mode=LienMode.IGNORE,
                        income_mode=IncomeMode.STRICT, dropout_rate=0.1,
                        enrollment_rate=0.5, replicates=77, seed=13)
    clone = scenario_from_json(scenario_to_json(sc))
    assert clone == sc


def run(bundle, ctx, **overrides):
    defaults = dict(include_washington_park=True, lien_mode=LienMode.SAMPLED_RATE,
                    replicates=150, seed=21)
    defaults.update(overrides)
    sc = ScenarioConfig(**defaults)
    return run_scenario(bundle["dataset"], bundle["forecasts"], bundle["income_model"],
                        ctx, sc, bundle["millage"])


def test_degenerate_scenario_deterministic(bundle, policy_ctx):
    est = run(bundle, policy_ctx, lien_mode=LienMode.IGNORE, dropout_rate=0.0,
              enrollment_rate=1.0, replicates=40)
    assert est.std_total_cost == 0.0
    assert est.enrolled_initial == est.eligible_count
    assert est.enrolled_final == est.enrolled_initial


def test_same_seed_bit_identical(bundle, policy_ctx):
    a = run(bundle, policy_ctx)
    b = run(bundle, policy_ctx)
    assert a == b


def test_invariant_counts_ordering(bundle, policy_ctx):
    est = run(bundle, policy_ctx)
    assert est.enrolled_final <= est.enrolled_initial <= est.eligible_count
    assert est.mean_total_cost >= 0
    assert all(v >= 0 for v in est.per_year_mean)
    assert est.mean_total_cost == pytest.approx(sum(est.per_year_mean), rel=1e-9)


def test_dropout_survival_fraction(bundle, policy_ctx):
    est = run(bundle, policy_ctx, dropout_rate=0.05, enrollment_rate=1.0,
              lien_mode=LienMode.IGNORE, replicates=600)
    ratio = est.enrolled_final / est.enrolled_initial
    assert ratio == pytest.approx(0.95 ** 7, abs=0.02)


def test_cost_monotonicity_common_random_numbers(bundle, policy_ctx):
    base = run(bundle, policy_ctx, enrollment_rate=0.5)
    more_enroll = run(bundle, policy_ctx, enrollment_rate=0.9)
    assert more_enroll.mean_total_cost >= base.mean_total_cost

    lazy = run(bundle, policy_ctx, dropout_rate=0.30)
    steady = run(bundle, policy_ctx, dropout_rate=0.02)
    assert steady.mean_total_cost >= lazy.mean_total_cost

    without_wp = run(bundle, policy_ctx, include_washington_park=False)
    with_wp = run(bundle, policy_ctx, include_washington_park=True)
    assert with_wp.mean_total_cost >= without_wp.mean_total_cost

    observed = run(bundle, policy_ctx, lien_mode=LienMode.OBSERVED_ONLY)
    sampled = run(bundle, policy_ctx, lien_mode=LienMode.SAMPLED_RATE)
    ignored = run(bundle, policy_ctx, lien_mode=LienMode.IGNORE)
    assert observed.mean_total_cost <= sampled.mean_total_cost <= ignored.mean_total_cost


def test_replicate_means_converge(bundle, policy_ctx):
    means, stds = [], []
    for run_idx in range(10):
        est = run(bundle, policy_ctx, replicates=1000, seed=1000 + run_idx)
        means.append(est.mean_total_cost)
        stds.append(est.std_total_cost)
    spread = float(np.std(means, ddof=1))
    assert spread < 3.0 * float(np.mean(stds)) / np.sqrt(1000)


def test_audit_decomposition(bundle, policy_ctx):
    sc = ScenarioConfig(include_washington_park=True, lien_mode=LienMode.SAMPLED_RATE,
                        replicates=25, seed=8)
    est, trail = run_scenario(bundle["dataset"], bundle["forecasts"],
                              bundle["income_model"], policy_ctx, sc, bundle["millage"],
                              audit=True)
    per_replicate = trail.per_household.sum(axis=1)
    assert per_replicate == pytest.approx(trail.per_replicate_totals)
    assert (trail.per_household >= 0).all()
    assert est.mean_total_cost == pytest.approx(float(trail.per_replicate_totals.mean()))


def test_parallel_jobs_identical(bundle, policy_ctx):
    sc = ScenarioConfig(include_washington_park=True, lien_mode=LienMode.SAMPLED_RATE,
                        replicates=60, seed=5)
    serial = run_scenario(bundle["dataset"], bundle["forecasts"], bundle["income_model"],
                          policy_ctx, sc, bundle["millage"], jobs=1)
    parallel = run_scenario(bundle["dataset"], bundle["forecasts"], bundle["income_model"],
                            policy_ctx, sc, bundle["millage"], jobs=2)
    assert serial == parallel


def test_method_mismatch_rejected(bundle, policy_ctx):
    sc = ScenarioConfig(forecast_method=ForecastMethod.LEGACY_FLAT)
    with pytest.raises(ValueError):
        run_scenario(bundle["dataset"], bundle["forecasts"], bundle["income_model"],
                     policy_ctx, sc, bundle["millage"])


def test_empty_eligible_set_warns(bundle, policy_ctx):
    strict = dataclasses.replace(
        policy_ctx,
        ami=dataclasses.replace(policy_ctx.ami,
                                limits=tuple((s, 1.0) for s in range(1, 9))),
        income_mode=IncomeMode.STRICT)
    sc = ScenarioConfig(include_washington_park=True, lien_mode=LienMode.IGNORE,
                        income_mode=IncomeMode.STRICT, replicates=5, seed=1)
    est = run_scenario(bundle["dataset"], bundle["forecasts"], bundle["income_model"],
                       strict, sc, bundle["millage"])
    assert est.mean_total_cost == 0.0
    assert any("empty" in w for w in est.warnings)


def test_estimate_json_contains_summary(bundle, policy_ctx):
    est = run(bundle, policy_ctx, replicates=30)
    sc = ScenarioConfig(include_washington_park=True, replicates=30, seed=21)
    doc = json.loads(estimate_to_json(est, sc, "abc123"))
    assert doc["replicate_count"] == 30
    assert doc["policy_checksum"] == "abc123"
    assert "summation" in doc
