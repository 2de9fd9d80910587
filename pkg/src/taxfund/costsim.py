"""Program cost estimation.

Forecast assessments become taxes through millage rates and exemptions;
a household's subsidy is the sum over its active program years of the
tax increase above its base-year tax, floored at zero. Total program
cost is simulated per replicate: lien draws complete the eligible set,
enrollment is a Bernoulli per eligible household, and dropout is an
absorbing per-year Bernoulli. Each replicate draws its uniforms from a
stream derived from (seed, replicate) over a fixed parcel universe, so
runs replay exactly and scenario comparisons share random numbers.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .eligibility import (
    EligibilityContext,
    IncomeMode,
    LienMode,
    evaluate,
)
from .forecast import ForecastMethod, ForecastTable
from .income import IncomeModel
from .types import Dataset, LandUse, ParcelRecord, PROGRAM_NEIGHBORHOODS

FORMAT_VERSION = 1


@dataclass(frozen=True)
class MillageConfig:
    """Tax arithmetic knobs. Shipped defaults are placeholders; set the
    jurisdiction's published rates in the config file."""

    assessment_ratio: float = 0.40
    county_millage: float = 0.010
    city_millage: float = 0.011
    exemption_amounts: tuple[tuple[str, float], ...] = (
        ("homestead", 30_000.0),
        ("city", 2_000.0),
        ("county", 2_000.0),
    )

    def __post_init__(self) -> None:
        if not 0 < self.assessment_ratio <= 1:
            raise ValueError("assessment ratio must be in (0, 1]")
        if self.county_millage < 0 or self.city_millage < 0:
            raise ValueError("millage rates must be nonnegative")

    def exemption_total(self, parcel: ParcelRecord) -> float:
        amounts = dict(self.exemption_amounts)
        total = 0.0
        if parcel.homestead_exemption:
            total += amounts.get("homestead", 0.0)
        if parcel.city_exemption:
            total += amounts.get("city", 0.0)
        if parcel.county_exemption:
            total += amounts.get("county", 0.0)
        return total


def annual_tax(fmv: float, parcel: ParcelRecord, mc: MillageConfig) -> float:
    """Taxable value (clamped at zero) times combined millage."""
    if fmv < 0:
        raise ValueError("fair market value must be nonnegative")
    taxable = max(0.0, fmv * mc.assessment_ratio - mc.exemption_total(parcel))
    return taxable * (mc.county_millage + mc.city_millage)


def household_subsidy(forecast_values: list[float] | tuple[float, ...], base_fmv: float,
                      parcel: ParcelRecord, mc: MillageConfig,
                      active_years: list[bool] | tuple[bool, ...]) -> float:
    """Sum over active years of max(0, year tax - base tax)."""
    if len(active_years) != len(forecast_values):
        raise ValueError("active_years length must equal the horizon")
    base_tax = annual_tax(base_fmv, parcel, mc)
    total = 0.0
    for value, active in zip(forecast_values, active_years):
        if active:
            total += max(0.0, annual_tax(value, parcel, mc) - base_tax)
    return total


def expected_enrolled(n_eligible: float, rate: float) -> float:
    if not 0.0 <= rate <= 1.0:
        raise ValueError("enrollment rate must be in [0, 1]")
    return n_eligible * rate


def expected_survivors(n0: float, dropout: float, years: int) -> float:
    if not 0.0 <= dropout <= 1.0:
        raise ValueError("dropout rate must be in [0, 1]")
    return n0 * (1.0 - dropout) ** years


def simulate_survivors(n0: int, dropout: float, years: int, replicates: int,
                       seed: int = 0) -> np.ndarray:
    """Monte Carlo of the absorbing dropout chain; returns per-replicate
    survivor counts after the given number of years."""
    rng = np.random.default_rng([seed])
    counts = np.full(replicates, n0, dtype=np.int64)
    for _ in range(years):
        counts = rng.binomial(counts, 1.0 - dropout)
    return counts


@dataclass(frozen=True)
class ScenarioConfig:
    include_washington_park: bool = False
    lien_mode: LienMode = LienMode.SAMPLED_RATE
    sampled_lien_rates: tuple[tuple[str, float], ...] | None = None  # None -> policy rates
    income_mode: IncomeMode | None = None  # None -> policy mode
    dropout_rate: float = 0.05
    enrollment_rate: float = 0.79
    horizon_years: int = 7
    forecast_method: ForecastMethod = ForecastMethod.CLUSTER_TREND
    replicates: int = 1000
    seed: int = 0

    def __post_init__(self) -> None:
        for name, rate in (("dropout_rate", self.dropout_rate),
                           ("enrollment_rate", self.enrollment_rate)):
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.horizon_years < 1:
            raise ValueError("horizon must be >= 1")


@dataclass(frozen=True)
class CostEstimate:
    mean_total_cost: float
    std_total_cost: float
    per_year_mean: tuple[float, ...]
    eligible_count: float
    enrolled_initial: float
    enrolled_final: float
    replicate_count: int
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class AuditTrail:
    """Per-replicate decomposition for spot checks: totals equal the sum
    of household contributions."""

    parcel_ids: tuple[str, ...]
    per_replicate_totals: np.ndarray          # (R,)
    per_household: np.ndarray                 # (R, n)
    per_replicate_std: float


def _effective_context(base: EligibilityContext, sc: ScenarioConfig) -> EligibilityContext:
    ctx = replace(base,
                  include_washington_park=sc.include_washington_park,
                  lien_mode=sc.lien_mode)
    if sc.sampled_lien_rates is not None:
        ctx = replace(ctx, sampled_lien_rate=sc.sampled_lien_rates)
    if sc.income_mode is not None:
        ctx = replace(ctx, income_mode=sc.income_mode)
    return ctx


@dataclass(frozen=True)
class _SimInputs:
    """Deterministic per-parcel state; the only thing replicates need."""

    parcel_ids: tuple[str, ...]
    deterministic_ok: np.ndarray   # location & owner & income
    observed_lien: np.ndarray      # -1 unobserved, else 0/1
    pass_rate: np.ndarray          # P(no lien) for unobserved parcels
    deltas: np.ndarray             # (n, horizon) nonnegative tax increases


def _prepare_inputs(dataset: Dataset, forecasts: ForecastTable,
                    income_model: IncomeModel | None, ctx: EligibilityContext,
                    sc: ScenarioConfig, mc: MillageConfig,
                    reference_year: int) -> tuple[_SimInputs, list[str]]:
    warnings: list[str] = []
    rows_by_id = forecasts.by_id()
    excluded = set(forecasts.excluded)
    universe: list[ParcelRecord] = []
    for p in sorted(dataset.parcels, key=lambda p: p.parcel_id):
        if p.neighborhood not in PROGRAM_NEIGHBORHOODS or p.land_use is LandUse.EMPTY_LOT:
            continue
        if p.parcel_id in rows_by_id:
            universe.append(p)
        elif p.parcel_id in excluded:
            warnings.append(f"{p.parcel_id}: no assessment history, skipped")
        else:
            raise ValueError(f"forecast table does not cover parcel {p.parcel_id}")

    n = len(universe)
    horizon = sc.horizon_years
    liens = dataset.lien_by_id()
    rents = dataset.rent_by_id()

    deterministic_ok = np.zeros(n, dtype=bool)
    observed_lien = np.full(n, -1, dtype=np.int64)
    pass_rate = np.zeros(n)
    deltas = np.zeros((n, horizon))
    ignore_ctx = replace(ctx, lien_mode=LienMode.IGNORE)
    for i, p in enumerate(universe):
        res = evaluate(p, dataset, income_model, ignore_ctx, rng=None,
                       reference_year=reference_year, rents=rents, liens=liens)
        deterministic_ok[i] = res.location_ok and res.owner_ok and res.income_ok
        obs = liens.get(p.parcel_id)
        if obs is not None:
            observed_lien[i] = int(obs)
        elif ctx.lien_mode is LienMode.SAMPLED_RATE:
            pass_rate[i] = 1.0 - ctx.lien_rate(p.neighborhood)
        row = rows_by_id[p.parcel_id]
        base_tax = annual_tax(row.base_value, p, mc)
        for y in range(horizon):
            deltas[i, y] = max(0.0, annual_tax(row.projected[y][1], p, mc) - base_tax)

    inputs = _SimInputs(
        parcel_ids=tuple(p.parcel_id for p in universe),
        deterministic_ok=deterministic_ok,
        observed_lien=observed_lien,
        pass_rate=pass_rate,
        deltas=deltas,
    )
    return inputs, warnings


def _simulate_range(inputs: _SimInputs, sc: ScenarioConfig, r0: int, r1: int,
                    audit: bool) -> dict[str, np.ndarray]:
    """Replicates [r0, r1); stream (seed, r) makes chunking irrelevant."""
    n = len(inputs.parcel_ids)
    horizon = sc.horizon_years
    count = r1 - r0
    totals = np.zeros(count)
    per_year = np.zeros((count, horizon))
    eligible_counts = np.zeros(count)
    enrolled_initial = np.zeros(count)
    enrolled_final = np.zeros(count)
    per_household = np.zeros((count, n)) if audit else None

    for k, r in enumerate(range(r0, r1)):
        rng = np.random.default_rng([sc.seed, r])
        u_lien = rng.random(n)
        u_enroll = rng.random(n)
        u_drop = rng.random((n, horizon))

        if sc.lien_mode is LienMode.IGNORE:
            lien_pass = np.ones(n, dtype=bool)
        elif sc.lien_mode is LienMode.OBSERVED_ONLY:
            lien_pass = inputs.observed_lien == 0
        else:
            lien_pass = np.where(inputs.observed_lien >= 0, inputs.observed_lien == 0,
                                 u_lien < inputs.pass_rate)
        eligible = inputs.deterministic_ok & lien_pass
        enrolled = eligible & (u_enroll < sc.enrollment_rate)
        # One reapplication draw per program year, the first included:
        # active in year y means surviving y draws.
        alive = np.cumprod(u_drop < 1.0 - sc.dropout_rate, axis=1).astype(bool)
        active = alive & enrolled[:, None]

        year_costs = (inputs.deltas * active).sum(axis=0)
        per_year[k] = year_costs
        totals[k] = year_costs.sum()
        eligible_counts[k] = eligible.sum()
        enrolled_initial[k] = enrolled.sum()
        enrolled_final[k] = active[:, -1].sum()
        if audit:
            per_household[k] = (inputs.deltas * active).sum(axis=1)

    out = {
        "totals": totals,
        "per_year": per_year,
        "eligible": eligible_counts,
        "enrolled_initial": enrolled_initial,
        "enrolled_final": enrolled_final,
    }
    if audit:
        out["per_household"] = per_household
    return out


def run_scenario(dataset: Dataset, forecasts: ForecastTable,
                 income_model: IncomeModel | None, base_ctx: EligibilityContext,
                 sc: ScenarioConfig, mc: MillageConfig,
                 audit: bool = False,
                 reference_year: int = 2017,
                 jobs: int = 1,
                 ) -> CostEstimate | tuple[CostEstimate, AuditTrail]:
    """Replicate loop over lien, enrollment, and dropout randomness.

    The parcel universe is every program-area non-empty-lot parcel with
    a forecast row, ordered by parcel_id; uniforms are drawn in that
    fixed order whatever the scenario toggles, so adding a neighborhood
    or loosening a rule never reshuffles another household's draws.
    With jobs > 1 the replicate range is split across processes;
    per-replicate streams make the result identical to a serial run.
    """
    ctx = _effective_context(base_ctx, sc)
    if forecasts.rows and forecasts.rows[0].method is not sc.forecast_method:
        raise ValueError(
            f"forecast table was built with {forecasts.rows[0].method.value}, "
            f"scenario expects {sc.forecast_method.value}")
    if forecasts.horizon < sc.horizon_years:
        raise ValueError("forecast horizon shorter than scenario horizon")

    inputs, warnings = _prepare_inputs(dataset, forecasts, income_model, ctx, sc, mc,
                                       reference_year)
    # lien semantics resolved into sc for the replicate loop
    sc_eff = replace(sc, lien_mode=ctx.lien_mode)

    if jobs <= 1 or sc.replicates < 2 * jobs:
        chunks = [_simulate_range(inputs, sc_eff, 0, sc.replicates, audit)]
    else:
        from concurrent.futures import ProcessPoolExecutor
        bounds = np.linspace(0, sc.replicates, jobs + 1).astype(int)
        ranges = [(int(a), int(b)) for a, b in zip(bounds, bounds[1:]) if b > a]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_simulate_range, inputs, sc_eff, a, b, audit)
                       for a, b in ranges]
            chunks = [f.result() for f in futures]

    totals = np.concatenate([c["totals"] for c in chunks])
    per_year = np.concatenate([c["per_year"] for c in chunks], axis=0)
    eligible_counts = np.concatenate([c["eligible"] for c in chunks])
    enrolled_initial = np.concatenate([c["enrolled_initial"] for c in chunks])
    enrolled_final = np.concatenate([c["enrolled_final"] for c in chunks])
    per_household = (np.concatenate([c["per_household"] for c in chunks], axis=0)
                     if audit else None)

    if float(eligible_counts.mean()) == 0.0:
        warnings.append("eligible set is empty; cost estimate is zero")

    estimate = CostEstimate(
        mean_total_cost=float(totals.mean()),
        std_total_cost=float(totals.std(ddof=1)) if sc.replicates > 1 else 0.0,
        per_year_mean=tuple(float(v) for v in per_year.mean(axis=0)),
        eligible_count=float(eligible_counts.mean()),
        enrolled_initial=float(enrolled_initial.mean()),
        enrolled_final=float(enrolled_final.mean()),
        replicate_count=sc.replicates,
        warnings=tuple(warnings),
    )
    if audit:
        trail = AuditTrail(
            parcel_ids=inputs.parcel_ids,
            per_replicate_totals=totals,
            per_household=per_household,
            per_replicate_std=estimate.std_total_cost,
        )
        return estimate, trail
    return estimate


# --- config / result files --------------------------------------------------

def scenario_to_json(sc: ScenarioConfig) -> str:
    doc = {
        "format_version": FORMAT_VERSION,
        "include_washington_park": sc.include_washington_park,
        "lien_mode": sc.lien_mode.value,
        "sampled_lien_rates": dict(sc.sampled_lien_rates) if sc.sampled_lien_rates else None,
        "income_mode": sc.income_mode.value if sc.income_mode else None,
        "dropout_rate": sc.dropout_rate,
        "enrollment_rate": sc.enrollment_rate,
        "horizon_years": sc.horizon_years,
        "forecast_method": sc.forecast_method.value,
        "replicates": sc.replicates,
        "seed": sc.seed,
    }
    return json.dumps(doc, sort_keys=True, indent=2)


def scenario_from_json(text: str) -> ScenarioConfig:
    doc = json.loads(text)
    if doc.get("format_version", FORMAT_VERSION) != FORMAT_VERSION:
        raise ValueError("unsupported scenario format")
    rates = doc.get("sampled_lien_rates")
    mode = doc.get("income_mode")
    return ScenarioConfig(
        include_washington_park=bool(doc.get("include_washington_park", False)),
        lien_mode=LienMode(doc.get("lien_mode", "SampledRate")),
        sampled_lien_rates=tuple(sorted(rates.items())) if rates else None,
        income_mode=IncomeMode(mode) if mode else None,
        dropout_rate=float(doc.get("dropout_rate", 0.05)),
        enrollment_rate=float(doc.get("enrollment_rate", 0.79)),
        horizon_years=int(doc.get("horizon_years", 7)),
        forecast_method=ForecastMethod(doc.get("forecast_method", "ClusterTrend")),
        replicates=int(doc.get("replicates", 1000)),
        seed=int(doc.get("seed", 0)),
    )


def millage_from_json(text: str) -> MillageConfig:
    doc = json.loads(text)
    return MillageConfig(
        assessment_ratio=float(doc.get("assessment_ratio", 0.40)),
        county_millage=float(doc.get("county_millage", 0.010)),
        city_millage=float(doc.get("city_millage", 0.011)),
        exemption_amounts=tuple(sorted(doc.get("exemption_amounts", {
            "homestead": 30_000.0, "city": 2_000.0, "county": 2_000.0}).items())),
    )


def estimate_to_json(estimate: CostEstimate, sc: ScenarioConfig,
                     policy_checksum: str = "") -> str:
    doc = {
        "format_version": FORMAT_VERSION,
        "mean_total_cost": estimate.mean_total_cost,
        "std_total_cost": estimate.std_total_cost,
        "per_year_mean": list(estimate.per_year_mean),
        "eligible_count": estimate.eligible_count,
        "enrolled_initial": estimate.enrolled_initial,
        "enrolled_final": estimate.enrolled_final,
        "replicate_count": estimate.replicate_count,
        "warnings": list(estimate.warnings),
        "scenario": json.loads(scenario_to_json(sc)),
        "policy_checksum": policy_checksum,
        "summation": "numpy pairwise over fixed replicate order",
    }
    return json.dumps(doc, sort_keys=True, indent=2)


def per_year_to_csv(estimate: CostEstimate, base_year: int, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["year", "mean_cost"])
        for i, cost in enumerate(estimate.per_year_mean):
            w.writerow([base_year + 1 + i, repr(cost)])
