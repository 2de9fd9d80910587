"""Household eligibility rules: location, owner occupancy, liens, income.

A household qualifies only when all four criteria hold. Income limits
come from a policy file (per household size), never from constants in
code; household size is estimated from neighborhood residents-per-
bedroom ratios. Lien status supports three modes: observed records
only, observed plus per-neighborhood Bernoulli simulation for the
unobserved, or ignored.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .income import IncomeModel, predict_income
from .types import (
    CORE_ELIGIBLE_NEIGHBORHOODS,
    Dataset,
    LandUse,
    Neighborhood,
    NeighborhoodStats,
    ParcelRecord,
    RentEstimate,
    normalize_address,
)

POLICY_FORMAT_VERSION = 1


class LienMode(str, Enum):
    OBSERVED_ONLY = "ObservedOnly"
    SAMPLED_RATE = "SampledRate"
    IGNORE = "Ignore"


class IncomeMode(str, Enum):
    LIBERAL = "Liberal"   # indeterminate income counts as eligible
    STRICT = "Strict"     # indeterminate income counts as ineligible


@dataclass(frozen=True)
class AmiTable:
    """Annual income limit by household size; sizes above 8 clamp to 8."""

    limits: tuple[tuple[int, float], ...]

    def __post_init__(self) -> None:
        table = dict(self.limits)
        if sorted(table) != list(range(1, 9)):
            raise ValueError("income limit table must cover household sizes 1..8")
        values = [table[s] for s in range(1, 9)]
        if any(b < a for a, b in zip(values, values[1:])):
            raise ValueError("income limits must be nondecreasing in household size")

    def limit(self, household_size: int) -> float:
        size = min(max(int(household_size), 1), 8)
        return dict(self.limits)[size]


@dataclass(frozen=True)
class EligibilityContext:
    ami: AmiTable
    include_washington_park: bool = False
    lien_mode: LienMode = LienMode.OBSERVED_ONLY
    sampled_lien_rate: tuple[tuple[str, float], ...] = ()
    income_mode: IncomeMode = IncomeMode.LIBERAL
    residents_per_bedroom: tuple[tuple[str, float], ...] = ()
    policy_checksum: str = ""

    def lien_rate(self, nbhd: Neighborhood) -> float:
        rate = dict(self.sampled_lien_rate).get(nbhd.value)
        if rate is None:
            raise KeyError(f"no sampled lien rate for {nbhd.value}")
        if not 0.0 <= rate <= 1.0:
            raise ValueError(f"lien rate {rate} outside [0, 1]")
        return rate

    def bedroom_ratio(self, nbhd: Neighborhood) -> float:
        ratio = dict(self.residents_per_bedroom).get(nbhd.value)
        if ratio is None:
            raise KeyError(f"no residents-per-bedroom ratio for {nbhd.value}")
        return ratio


def location_eligible(parcel: ParcelRecord, ctx: EligibilityContext) -> bool:
    """Core neighborhoods always; Washington Park only when enabled;
    empty lots never."""
    if parcel.land_use is LandUse.EMPTY_LOT:
        return False
    if parcel.neighborhood in CORE_ELIGIBLE_NEIGHBORHOODS:
        return True
    return (parcel.neighborhood is Neighborhood.WASHINGTON_PARK
            and ctx.include_washington_park)


def owner_occupied(parcel: ParcelRecord) -> bool:
    """Address match after normalization, or a homestead exemption
    (which already requires the owner to live there)."""
    if parcel.homestead_exemption:
        return True
    return normalize_address(parcel.situs_address) == normalize_address(parcel.owner_address)


def lien_ok(parcel: ParcelRecord, liens: dict[str, bool], ctx: EligibilityContext,
            rng: np.random.Generator | None) -> tuple[bool, str]:
    """Returns (passes, provenance); provenance is one of observed /
    simulated / unobserved / ignored."""
    if ctx.lien_mode is LienMode.IGNORE:
        return True, "ignored"
    observed = liens.get(parcel.parcel_id)
    if observed is not None:
        return (not observed), "observed"
    if ctx.lien_mode is LienMode.OBSERVED_ONLY:
        return False, "unobserved"
    if rng is None:
        raise ValueError("SampledRate mode needs an rng stream")
    rate = ctx.lien_rate(parcel.neighborhood)
    return bool(rng.random() < 1.0 - rate), "simulated"


def estimate_household_size(parcel: ParcelRecord, stats: NeighborhoodStats) -> int:
    """bedrooms x residents-per-bedroom, rounded half-up, floor 1."""
    if parcel.bedrooms < 0:
        raise ValueError("negative bedroom count")
    size = math.floor(parcel.bedrooms * stats.residents_per_bedroom + 0.5)
    return max(size, 1)


def _household_size_from_ratio(parcel: ParcelRecord, ratio: float) -> int:
    return max(math.floor(parcel.bedrooms * ratio + 0.5), 1)


def income_eligible(income: float | None, household_size: int,
                    ctx: EligibilityContext) -> bool:
    """Strictly below the size-specific limit; indeterminate income
    resolves by income mode."""
    if income is None:
        return ctx.income_mode is IncomeMode.LIBERAL
    return income < ctx.ami.limit(household_size)


@dataclass(frozen=True)
class EligibilityResult:
    parcel_id: str
    location_ok: bool
    owner_ok: bool
    lien_ok: bool
    income_ok: bool
    eligible: bool
    reasons: tuple[str, ...]
    estimated_household_size: int
    estimated_income: float | None  # None = indeterminate
    lien_provenance: str


def evaluate(parcel: ParcelRecord, dataset: Dataset, income_model: IncomeModel | None,
             ctx: EligibilityContext, rng: np.random.Generator | None = None,
             reference_year: int = 2017,
             rents: dict[str, "RentEstimate"] | None = None,
             liens: dict[str, bool] | None = None) -> EligibilityResult:
    """All four criteria for one parcel; pure given the rng position.

    rents/liens lookups may be passed in to avoid rebuilding them on
    dataset-wide sweeps.
    """
    rents = rents if rents is not None else dataset.rent_by_id()
    liens = liens if liens is not None else dataset.lien_by_id()
    loc = location_eligible(parcel, ctx)
    own = owner_occupied(parcel)
    lien, lien_prov = lien_ok(parcel, liens, ctx, rng)

    ratio = ctx.bedroom_ratio(parcel.neighborhood)
    size = _household_size_from_ratio(parcel, ratio)

    rent = rents.get(parcel.parcel_id)
    income = None
    if income_model is not None and rent is not None:
        income = predict_income(income_model, parcel, rent, reference_year)
    inc = income_eligible(income, size, ctx)

    reasons = []
    if not loc:
        reasons.append("location")
    if not own:
        reasons.append("owner-occupancy")
    if not lien:
        reasons.append("liens")
    if not inc:
        reasons.append("income")
    return EligibilityResult(
        parcel_id=parcel.parcel_id,
        location_ok=loc,
        owner_ok=own,
        lien_ok=lien,
        income_ok=inc,
        eligible=loc and own and lien and inc,
        reasons=tuple(reasons),
        estimated_household_size=size,
        estimated_income=income,
        lien_provenance=lien_prov,
    )


def evaluate_dataset(dataset: Dataset, income_model: IncomeModel | None,
                     ctx: EligibilityContext, rng: np.random.Generator | None = None,
                     reference_year: int = 2017) -> list[EligibilityResult]:
    rents = dataset.rent_by_id()
    liens = dataset.lien_by_id()
    return [evaluate(p, dataset, income_model, ctx, rng, reference_year,
                     rents=rents, liens=liens)
            for p in dataset.parcels]


def context_from_dataset(policy: "PolicyConfig", dataset: Dataset) -> EligibilityContext:
    """Attach dataset-derived residents-per-bedroom ratios to a policy."""
    ratios = tuple(
        (s.neighborhood.value, s.residents_per_bedroom)
        for s in dataset.neighborhood_stats
    )
    return EligibilityContext(
        ami=policy.ami,
        include_washington_park=policy.include_washington_park,
        lien_mode=policy.lien_mode,
        sampled_lien_rate=policy.sampled_lien_rates,
        income_mode=policy.income_mode,
        residents_per_bedroom=ratios,
        policy_checksum=policy.checksum,
    )


@dataclass(frozen=True)
class PolicyConfig:
    ami: AmiTable
    include_washington_park: bool
    lien_mode: LienMode
    sampled_lien_rates: tuple[tuple[str, float], ...]
    income_mode: IncomeMode
    checksum: str = field(default="", compare=False)


def load_policy(path: str | Path) -> PolicyConfig:
    """Load the policy JSON; its checksum rides along into results."""
    raw = Path(path).read_bytes()
    doc = json.loads(raw)
    if doc.get("format_version") != POLICY_FORMAT_VERSION:
        raise ValueError("unsupported policy config version")
    checksum = hashlib.sha256(raw).hexdigest()
    return PolicyConfig(
        ami=AmiTable(tuple((int(k), float(v)) for k, v in sorted(doc["ami"].items(), key=lambda kv: int(kv[0])))),
        include_washington_park=bool(doc.get("include_washington_park", False)),
        lien_mode=LienMode(doc.get("lien_mode", "ObservedOnly")),
        sampled_lien_rates=tuple(sorted(doc.get("sampled_lien_rates", {}).items())),
        income_mode=IncomeMode(doc.get("income_mode", "Liberal")),
        checksum=checksum,
    )


DEFAULT_POLICY = {
    "format_version": POLICY_FORMAT_VERSION,
    # Placeholder limits; replace with the program's published table.
    "ami": {"1": 47250, "2": 54000, "3": 60750, "4": 67500,
            "5": 72900, "6": 78300, "7": 83700, "8": 89100},
    "include_washington_park": False,
    "lien_mode": "SampledRate",
    "sampled_lien_rates": {
        "AshviewHeights": 0.41,
        "AtlantaUniversityCenter": 0.41,
        "EnglishAvenue": 0.41,
        "VineCity": 0.41,
        "WashingtonPark": 0.42,
        "Other": 0.30,
    },
    "income_mode": "Liberal",
}


def write_default_policy(path: str | Path) -> None:
    Path(path).write_text(json.dumps(DEFAULT_POLICY, indent=2, sort_keys=True))
