"""Domain types shared by every pipeline stage.

All records are plain frozen dataclasses; a loaded Dataset is immutable
and safe to share across threads.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum


class Neighborhood(str, Enum):
    ASHVIEW_HEIGHTS = "AshviewHeights"
    ATLANTA_UNIVERSITY_CENTER = "AtlantaUniversityCenter"
    ENGLISH_AVENUE = "EnglishAvenue"
    VINE_CITY = "VineCity"
    WASHINGTON_PARK = "WashingtonPark"
    OTHER = "Other"


# Program area = the five named neighborhoods; Other is the training area
# whose assessment history drives the cluster trends.
PROGRAM_NEIGHBORHOODS = (
    Neighborhood.ASHVIEW_HEIGHTS,
    Neighborhood.ATLANTA_UNIVERSITY_CENTER,
    Neighborhood.ENGLISH_AVENUE,
    Neighborhood.VINE_CITY,
    Neighborhood.WASHINGTON_PARK,
)

# Core eligible neighborhoods; Washington Park joins only when the
# scenario enables it.
CORE_ELIGIBLE_NEIGHBORHOODS = (
    Neighborhood.ASHVIEW_HEIGHTS,
    Neighborhood.ATLANTA_UNIVERSITY_CENTER,
    Neighborhood.ENGLISH_AVENUE,
    Neighborhood.VINE_CITY,
)


class LandUse(str, Enum):
    ONE_FAMILY = "OneFamily"
    TWO_FAMILY = "TwoFamily"
    THREE_FAMILY = "ThreeFamily"
    CONDO = "Condo"
    TOWNHOUSE = "Townhouse"
    CONDO_LOFT = "CondoLoft"
    EMPTY_LOT = "EmptyLot"
    OTHER = "Other"


# Historical assessment grid: 2005-2016 with no 2009 observation.
# "Complete" series carry all eleven of these years with positive values.
SERIES_YEARS: tuple[int, ...] = tuple(y for y in range(2005, 2017) if y != 2009)
GAP_INTERVAL: tuple[int, int] = (2008, 2010)


@dataclass(frozen=True)
class ParcelRecord:
    parcel_id: str
    neighborhood: Neighborhood
    situs_address: str
    owner_address: str
    land_use: LandUse
    living_units: int
    land_acres: float
    heated_sqft: float
    rooms: int
    bedrooms: int
    bathrooms: int
    year_built: int
    city_exemption: bool
    county_exemption: bool
    homestead_exemption: bool
    distance_to_beltline: float  # meters


@dataclass(frozen=True)
class AssessmentSeries:
    """Per-parcel year -> assessed fair-market value, sorted by year."""

    parcel_id: str
    observations: tuple[tuple[int, float], ...]

    def value(self, year: int) -> float | None:
        for y, v in self.observations:
            if y == year:
                return v
        return None

    def years(self) -> tuple[int, ...]:
        return tuple(y for y, _ in self.observations)

    def is_complete(self) -> bool:
        """True iff all canonical years are present with positive values.

        Observations outside the canonical grid (e.g. a later base-year
        value) do not affect completeness.
        """
        by_year = dict(self.observations)
        return all(y in by_year and by_year[y] > 0 for y in SERIES_YEARS)

    def latest(self, at_or_before: int | None = None) -> tuple[int, float] | None:
        best = None
        for y, v in self.observations:
            if at_or_before is not None and y > at_or_before:
                continue
            if best is None or y > best[0]:
                best = (y, v)
        return best


@dataclass(frozen=True)
class RentEstimate:
    parcel_id: str
    monthly_rent_low: float


MISSING = float("nan")


@dataclass(frozen=True, eq=False)
class CexRecord:
    """One consumer-expenditure survey row; NaN marks a missing cell.

    Equality treats two missing cells as equal so a written-then-loaded
    record compares equal to its source.
    """

    before_tax_income: float
    monthly_rent: float
    bedrooms: float
    bathrooms: float
    rooms: float
    home_age: float
    extra_features: tuple[tuple[str, float], ...] = ()

    def _key(self):
        def cell(v: float):
            return "missing" if math.isnan(v) else v
        return (cell(self.before_tax_income), cell(self.monthly_rent),
                cell(self.bedrooms), cell(self.bathrooms), cell(self.rooms),
                cell(self.home_age),
                tuple((n, cell(v)) for n, v in self.extra_features))

    def __eq__(self, other):
        if not isinstance(other, CexRecord):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())


@dataclass(frozen=True)
class LienObservation:
    parcel_id: str
    has_lien: bool


@dataclass(frozen=True)
class NeighborhoodStats:
    neighborhood: Neighborhood
    population_estimate: float
    total_bedrooms: float

    @property
    def residents_per_bedroom(self) -> float:
        return self.population_estimate / self.total_bedrooms


@dataclass(frozen=True)
class Dataset:
    parcels: tuple[ParcelRecord, ...]
    assessments: tuple[AssessmentSeries, ...]
    rents: tuple[RentEstimate, ...]
    cex: tuple[CexRecord, ...]
    liens: tuple[LienObservation, ...]
    neighborhood_stats: tuple[NeighborhoodStats, ...]
    # Soft issues noted during load (retained rows); not part of equality.
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def parcel_by_id(self) -> dict[str, ParcelRecord]:
        return {p.parcel_id: p for p in self.parcels}

    def assessments_by_id(self) -> dict[str, AssessmentSeries]:
        return {s.parcel_id: s for s in self.assessments}

    def rent_by_id(self) -> dict[str, RentEstimate]:
        return {r.parcel_id: r for r in self.rents}

    def lien_by_id(self) -> dict[str, bool]:
        return {o.parcel_id: o.has_lien for o in self.liens}

    def stats_by_neighborhood(self) -> dict[Neighborhood, NeighborhoodStats]:
        return {s.neighborhood: s for s in self.neighborhood_stats}


@dataclass(frozen=True)
class ValidationIssue:
    file: str
    row: int  # 1-based data row; 0 for dataset-level issues
    rule: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    errors: tuple[ValidationIssue, ...]
    warnings: tuple[ValidationIssue, ...]
    counts: tuple[tuple[str, int], ...]

    @property
    def accepted(self) -> bool:
        return not self.errors


# --- address normalization -------------------------------------------------

# Suffix spellings collapse to one canonical token so situs/owner
# comparison is not defeated by formatting.
_SUFFIXES = {
    "STREET": "ST",
    "STR": "ST",
    "ST": "ST",
    "AVENUE": "AVE",
    "AVEN": "AVE",
    "AV": "AVE",
    "AVE": "AVE",
    "DRIVE": "DR",
    "DRV": "DR",
    "DR": "DR",
    "BOULEVARD": "BLVD",
    "BOUL": "BLVD",
    "BLVD": "BLVD",
    "ROAD": "RD",
    "RD": "RD",
    "LANE": "LN",
    "LN": "LN",
    "COURT": "CT",
    "CRT": "CT",
    "CT": "CT",
}

_UNIT_DESIGNATORS = {"APT", "UNIT", "STE", "SUITE", "#"}

_PUNCT = re.compile(r"[^\w#\s]")


def normalize_address(raw: str) -> str:
    """Canonical form used for owner-occupancy comparison.

    Uppercase, punctuation stripped, whitespace collapsed, suffixes
    standardized, unit designators (and their argument) dropped.
    """
    text = _PUNCT.sub(" ", raw.upper())
    tokens: list[str] = []
    skip_next = False
    for tok in text.split():
        if skip_next:
            skip_next = False
            continue
        if tok in _UNIT_DESIGNATORS:
            skip_next = True
            continue
        if tok.startswith("#"):
            continue
        tokens.append(_SUFFIXES.get(tok, tok))
    return " ".join(tokens)
