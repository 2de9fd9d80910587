"""CSV ingestion, export, and validation for the six input datasets.

Schemas (UTF-8, header row, comma separated):

    parcels.csv        parcel_id,neighborhood,situs_address,owner_address,
                       land_use,living_units,land_acres,heated_sqft,rooms,
                       bedrooms,bathrooms,year_built,city_exemption,
                       county_exemption,homestead_exemption,
                       distance_to_beltline_m
    assessments.csv    parcel_id,year,assessed_value_usd        (long form)
    rents.csv          parcel_id,monthly_rent_low_usd
    cex.csv            income_usd,monthly_rent_usd,bedrooms,bathrooms,rooms,
                       home_age,<extra numeric columns>; empty cell = missing
    liens.csv          parcel_id,has_lien                       (0/1)
    neighborhoods.csv  neighborhood,population_estimate,total_bedrooms

Floats are written with ``repr`` so a write/load round trip is exact.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

from .types import (
    AssessmentSeries,
    CexRecord,
    Dataset,
    LandUse,
    LienObservation,
    Neighborhood,
    NeighborhoodStats,
    ParcelRecord,
    RentEstimate,
    SERIES_YEARS,
    ValidationIssue,
    ValidationReport,
)

PARCEL_COLUMNS = [
    "parcel_id",
    "neighborhood",
    "situs_address",
    "owner_address",
    "land_use",
    "living_units",
    "land_acres",
    "heated_sqft",
    "rooms",
    "bedrooms",
    "bathrooms",
    "year_built",
    "city_exemption",
    "county_exemption",
    "homestead_exemption",
    "distance_to_beltline_m",
]
ASSESSMENT_COLUMNS = ["parcel_id", "year", "assessed_value_usd"]
RENT_COLUMNS = ["parcel_id", "monthly_rent_low_usd"]
CEX_FIXED_COLUMNS = ["income_usd", "monthly_rent_usd", "bedrooms", "bathrooms", "rooms", "home_age"]
LIEN_COLUMNS = ["parcel_id", "has_lien"]
NEIGHBORHOOD_COLUMNS = ["neighborhood", "population_estimate", "total_bedrooms"]


@dataclass(frozen=True)
class DatasetPaths:
    parcels: Path
    assessments: Path
    rents: Path
    cex: Path
    liens: Path
    neighborhoods: Path

    @classmethod
    def in_dir(cls, directory: str | Path) -> "DatasetPaths":
        d = Path(directory)
        return cls(
            parcels=d / "parcels.csv",
            assessments=d / "assessments.csv",
            rents=d / "rents.csv",
            cex=d / "cex.csv",
            liens=d / "liens.csv",
            neighborhoods=d / "neighborhoods.csv",
        )


@dataclass(frozen=True)
class SchemaRules:
    """Knobs for load-time and validation-time checks."""

    current_year: int = 2017


class DatasetLoadError(Exception):
    """Raised when a dataset cannot be loaded; carries row locators."""

    def __init__(self, issues: list[ValidationIssue]):
        self.issues = tuple(sorted(issues, key=lambda i: (i.file, i.row)))
        lines = "; ".join(f"{i.file}:{i.row} {i.message}" for i in self.issues[:20])
        more = "" if len(self.issues) <= 20 else f" (+{len(self.issues) - 20} more)"
        super().__init__(f"dataset load failed: {lines}{more}")


def _read_rows(path: Path, expected_prefix: list[str], issues: list[ValidationIssue],
               exact: bool = True) -> tuple[list[str], list[list[str]]]:
    name = path.name
    if not path.exists():
        issues.append(ValidationIssue(name, 0, "missing-file", f"file not found: {path}"))
        return [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            issues.append(ValidationIssue(name, 0, "malformed-header", "empty file"))
            return [], []
        ok = header == expected_prefix if exact else header[: len(expected_prefix)] == expected_prefix
        if not ok:
            issues.append(ValidationIssue(
                name, 0, "malformed-header",
                f"expected columns {expected_prefix}, got {header}"))
            return [], []
        return header, [row for row in reader]


def _parse_float(text: str) -> float:
    value = float(text)
    if math.isnan(value) or math.isinf(value):
        raise ValueError(f"non-finite value {text!r}")
    return value


def _parse_bool(text: str) -> bool:
    if text in ("0", "1"):
        return text == "1"
    raise ValueError(f"expected 0/1, got {text!r}")


def _parse_cell(text: str) -> float:
    return float("nan") if text == "" else _parse_float(text)


def load_dataset(paths: DatasetPaths, rules: SchemaRules | None = None) -> Dataset:
    """Load and cross-link all six CSVs.

    Hard failures (missing file, bad header, type errors, dangling
    parcel references) raise DatasetLoadError listing every offending
    row. Soft issues (a 2009 observation) become dataset warnings and
    the rows are retained.
    """
    rules = rules or SchemaRules()
    issues: list[ValidationIssue] = []
    warnings: list[str] = []

    _, parcel_rows = _read_rows(paths.parcels, PARCEL_COLUMNS, issues)
    _, assess_rows = _read_rows(paths.assessments, ASSESSMENT_COLUMNS, issues)
    _, rent_rows = _read_rows(paths.rents, RENT_COLUMNS, issues)
    cex_header, cex_rows = _read_rows(paths.cex, CEX_FIXED_COLUMNS, issues, exact=False)
    _, lien_rows = _read_rows(paths.liens, LIEN_COLUMNS, issues)
    _, nbhd_rows = _read_rows(paths.neighborhoods, NEIGHBORHOOD_COLUMNS, issues)
    if issues:
        raise DatasetLoadError(issues)

    parcels: list[ParcelRecord] = []
    for n, row in enumerate(parcel_rows, start=1):
        try:
            parcels.append(ParcelRecord(
                parcel_id=row[0],
                neighborhood=Neighborhood(row[1]),
                situs_address=row[2],
                owner_address=row[3],
                land_use=LandUse(row[4]),
                living_units=int(row[5]),
                land_acres=_parse_float(row[6]),
                heated_sqft=_parse_float(row[7]),
                rooms=int(row[8]),
                bedrooms=int(row[9]),
                bathrooms=int(row[10]),
                year_built=int(row[11]),
                city_exemption=_parse_bool(row[12]),
                county_exemption=_parse_bool(row[13]),
                homestead_exemption=_parse_bool(row[14]),
                distance_to_beltline=_parse_float(row[15]),
            ))
        except (ValueError, IndexError) as exc:
            issues.append(ValidationIssue("parcels.csv", n, "type-error", str(exc)))

    by_parcel: dict[str, list[tuple[int, float]]] = {}
    for n, row in enumerate(assess_rows, start=1):
        try:
            pid, year, value = row[0], int(row[1]), _parse_float(row[2])
        except (ValueError, IndexError) as exc:
            issues.append(ValidationIssue("assessments.csv", n, "type-error", str(exc)))
            continue
        if year == 2009:
            warnings.append(f"assessments.csv:{n} unexpected 2009 observation for {pid} (retained)")
        by_parcel.setdefault(pid, []).append((year, value))
    assessments = tuple(
        AssessmentSeries(pid, tuple(sorted(obs))) for pid, obs in by_parcel.items()
    )

    rents: list[RentEstimate] = []
    for n, row in enumerate(rent_rows, start=1):
        try:
            rents.append(RentEstimate(row[0], _parse_float(row[1])))
        except (ValueError, IndexError) as exc:
            issues.append(ValidationIssue("rents.csv", n, "type-error", str(exc)))

    extra_names = cex_header[len(CEX_FIXED_COLUMNS):] if cex_header else []
    cex: list[CexRecord] = []
    for n, row in enumerate(cex_rows, start=1):
        try:
            cells = [_parse_cell(c) for c in row]
            if len(cells) != len(CEX_FIXED_COLUMNS) + len(extra_names):
                raise ValueError(f"expected {len(CEX_FIXED_COLUMNS) + len(extra_names)} cells, got {len(cells)}")
            cex.append(CexRecord(
                before_tax_income=cells[0],
                monthly_rent=cells[1],
                bedrooms=cells[2],
                bathrooms=cells[3],
                rooms=cells[4],
                home_age=cells[5],
                extra_features=tuple(zip(extra_names, cells[6:])),
            ))
        except ValueError as exc:
            issues.append(ValidationIssue("cex.csv", n, "type-error", str(exc)))

    liens: list[LienObservation] = []
    for n, row in enumerate(lien_rows, start=1):
        try:
            liens.append(LienObservation(row[0], _parse_bool(row[1])))
        except (ValueError, IndexError) as exc:
            issues.append(ValidationIssue("liens.csv", n, "type-error", str(exc)))

    stats: list[NeighborhoodStats] = []
    for n, row in enumerate(nbhd_rows, start=1):
        try:
            stats.append(NeighborhoodStats(Neighborhood(row[0]), _parse_float(row[1]), _parse_float(row[2])))
        except (ValueError, IndexError) as exc:
            issues.append(ValidationIssue("neighborhoods.csv", n, "type-error", str(exc)))

    # Referential integrity: every keyed row must resolve to a parcel.
    known = {p.parcel_id for p in parcels}
    for n, row in enumerate(assess_rows, start=1):
        if row and row[0] not in known:
            issues.append(ValidationIssue("assessments.csv", n, "unknown-parcel", f"unknown parcel_id {row[0]!r}"))
    for n, row in enumerate(rent_rows, start=1):
        if row and row[0] not in known:
            issues.append(ValidationIssue("rents.csv", n, "unknown-parcel", f"unknown parcel_id {row[0]!r}"))
    for n, row in enumerate(lien_rows, start=1):
        if row and row[0] not in known:
            issues.append(ValidationIssue("liens.csv", n, "unknown-parcel", f"unknown parcel_id {row[0]!r}"))

    if issues:
        raise DatasetLoadError(issues)

    return Dataset(
        parcels=tuple(parcels),
        assessments=assessments,
        rents=tuple(rents),
        cex=tuple(cex),
        liens=tuple(liens),
        neighborhood_stats=tuple(stats),
        warnings=tuple(warnings),
    )


def _fmt(value: float) -> str:
    return repr(float(value))


def write_dataset(dataset: Dataset, directory: str | Path) -> DatasetPaths:
    """Write all six CSVs; load_dataset on the result reproduces the input."""
    paths = DatasetPaths.in_dir(directory)
    Path(directory).mkdir(parents=True, exist_ok=True)

    with open(paths.parcels, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(PARCEL_COLUMNS)
        for p in dataset.parcels:
            w.writerow([
                p.parcel_id, p.neighborhood.value, p.situs_address, p.owner_address,
                p.land_use.value, p.living_units, _fmt(p.land_acres), _fmt(p.heated_sqft),
                p.rooms, p.bedrooms, p.bathrooms, p.year_built,
                int(p.city_exemption), int(p.county_exemption), int(p.homestead_exemption),
                _fmt(p.distance_to_beltline),
            ])

    with open(paths.assessments, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(ASSESSMENT_COLUMNS)
        for s in dataset.assessments:
            for year, value in s.observations:
                w.writerow([s.parcel_id, year, _fmt(value)])

    with open(paths.rents, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(RENT_COLUMNS)
        for r in dataset.rents:
            w.writerow([r.parcel_id, _fmt(r.monthly_rent_low)])

    extra_names = [name for name, _ in dataset.cex[0].extra_features] if dataset.cex else []
    with open(paths.cex, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CEX_FIXED_COLUMNS + extra_names)
        for c in dataset.cex:
            cells = [c.before_tax_income, c.monthly_rent, c.bedrooms, c.bathrooms, c.rooms, c.home_age]
            cells += [v for _, v in c.extra_features]
            w.writerow(["" if math.isnan(v) else _fmt(v) for v in cells])

    with open(paths.liens, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(LIEN_COLUMNS)
        for o in dataset.liens:
            w.writerow([o.parcel_id, int(o.has_lien)])

    with open(paths.neighborhoods, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(NEIGHBORHOOD_COLUMNS)
        for s in dataset.neighborhood_stats:
            w.writerow([s.neighborhood.value, _fmt(s.population_estimate), _fmt(s.total_bedrooms)])

    return paths


def validate_dataset(dataset: Dataset, rules: SchemaRules | None = None) -> ValidationReport:
    """Check every record-level invariant; always returns a report.

    Issue ordering is deterministic by (file, row) so reordering input
    records never changes the error count.
    """
    rules = rules or SchemaRules()
    errors: list[ValidationIssue] = []
    warnings: list[ValidationIssue] = []

    seen_ids: dict[str, int] = {}
    for n, p in enumerate(dataset.parcels, start=1):
        if p.parcel_id in seen_ids:
            errors.append(ValidationIssue(
                "parcels.csv", n, "duplicate-parcel",
                f"parcel_id {p.parcel_id!r} already defined at row {seen_ids[p.parcel_id]}"))
        else:
            seen_ids[p.parcel_id] = n
        if p.bedrooms > p.rooms:
            errors.append(ValidationIssue(
                "parcels.csv", n, "bedrooms-exceed-rooms",
                f"{p.parcel_id}: bedrooms exceed rooms ({p.bedrooms} > {p.rooms})"))
        if p.year_built > rules.current_year:
            errors.append(ValidationIssue(
                "parcels.csv", n, "future-year-built",
                f"{p.parcel_id}: year_built {p.year_built} after {rules.current_year}"))
        for field_name, value in (("living_units", p.living_units), ("land_acres", p.land_acres),
                                  ("heated_sqft", p.heated_sqft), ("rooms", p.rooms),
                                  ("bedrooms", p.bedrooms), ("bathrooms", p.bathrooms),
                                  ("distance_to_beltline", p.distance_to_beltline)):
            if value < 0:
                errors.append(ValidationIssue(
                    "parcels.csv", n, "negative-value",
                    f"{p.parcel_id}: {field_name} is negative"))

    for n, s in enumerate(dataset.assessments, start=1):
        years = s.years()
        if len(set(years)) != len(years):
            errors.append(ValidationIssue(
                "assessments.csv", n, "duplicate-year",
                f"{s.parcel_id}: repeated assessment year"))
        if 2009 in years:
            warnings.append(ValidationIssue(
                "assessments.csv", n, "unexpected-2009",
                f"{s.parcel_id}: unexpected 2009 observation"))
        if any(v <= 0 for _, v in s.observations):
            warnings.append(ValidationIssue(
                "assessments.csv", n, "non-positive-value",
                f"{s.parcel_id}: non-positive assessed value"))
        if not s.is_complete():
            missing = [y for y in SERIES_YEARS if s.value(y) is None]
            detail = f"missing years {missing}" if missing else "non-positive canonical value"
            warnings.append(ValidationIssue(
                "assessments.csv", n, "incomplete-series",
                f"{s.parcel_id}: incomplete series ({detail})"))

    seen_rents: set[str] = set()
    for n, r in enumerate(dataset.rents, start=1):
        if r.parcel_id in seen_rents:
            errors.append(ValidationIssue(
                "rents.csv", n, "duplicate-rent", f"{r.parcel_id}: more than one rent estimate"))
        seen_rents.add(r.parcel_id)
        if r.monthly_rent_low <= 0:
            errors.append(ValidationIssue(
                "rents.csv", n, "non-positive-rent", f"{r.parcel_id}: rent must be positive"))

    for n, c in enumerate(dataset.cex, start=1):
        cells = [c.before_tax_income, c.monthly_rent, c.bedrooms, c.bathrooms, c.rooms, c.home_age]
        cells += [v for _, v in c.extra_features]
        if all(math.isnan(v) for v in cells):
            errors.append(ValidationIssue("cex.csv", n, "all-missing", "record has no observed field"))

    seen_liens: set[str] = set()
    for n, o in enumerate(dataset.liens, start=1):
        if o.parcel_id in seen_liens:
            errors.append(ValidationIssue(
                "liens.csv", n, "duplicate-lien", f"{o.parcel_id}: more than one lien observation"))
        seen_liens.add(o.parcel_id)

    seen_nbhd: set[Neighborhood] = set()
    for n, s in enumerate(dataset.neighborhood_stats, start=1):
        if s.neighborhood in seen_nbhd:
            errors.append(ValidationIssue(
                "neighborhoods.csv", n, "duplicate-neighborhood", f"{s.neighborhood.value} repeated"))
        seen_nbhd.add(s.neighborhood)
        if s.population_estimate <= 0:
            errors.append(ValidationIssue(
                "neighborhoods.csv", n, "non-positive-population", f"{s.neighborhood.value}"))
        if s.total_bedrooms <= 0:
            errors.append(ValidationIssue(
                "neighborhoods.csv", n, "non-positive-bedrooms", f"{s.neighborhood.value}"))

    counts = (
        ("parcels.csv", len(dataset.parcels)),
        ("assessments.csv", len(dataset.assessments)),
        ("rents.csv", len(dataset.rents)),
        ("cex.csv", len(dataset.cex)),
        ("liens.csv", len(dataset.liens)),
        ("neighborhoods.csv", len(dataset.neighborhood_stats)),
    )
    key = lambda i: (i.file, i.row, i.rule)
    return ValidationReport(
        errors=tuple(sorted(errors, key=key)),
        warnings=tuple(sorted(warnings, key=key)),
        counts=counts,
    )


def complete_series(dataset: Dataset) -> list[AssessmentSeries]:
    """Series with every canonical year present and positive."""
    return [s for s in dataset.assessments if s.is_complete()]
