"""Deterministic synthetic dataset generator.

Real assessor, rent, survey, and lien data cannot be redistributed, so
every pipeline run (including the acceptance suite) starts from this
generator. Assessment histories follow a small set of latent
percent-change patterns; which pattern a parcel gets is a function of
its distance to the trail, its first-year value, and its age, so both
the trajectory clustering and the cluster classifier have a recoverable
ground truth. The latent labels, incomes, and lien states are returned
alongside the dataset for use as test oracles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import (
    AssessmentSeries,
    CexRecord,
    Dataset,
    LandUse,
    LienObservation,
    Neighborhood,
    NeighborhoodStats,
    ParcelRecord,
    PROGRAM_NEIGHBORHOODS,
    RentEstimate,
    SERIES_YEARS,
)

# Annual percent-change steps over the canonical year grid (10 intervals,
# 2008->2010 spanning the missing year). Zero means no reassessment that
# interval; patterns differ in which intervals move, so binarized
# signatures separate them.
DEFAULT_TRENDS: tuple[tuple[float, ...], ...] = (
    (0.04, 0.0, 0.0, -0.08, 0.0, 0.0, 0.05, 0.0, 0.0, 0.06),
    (0.12, 0.10, 0.08, -0.15, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
    (0.0, 0.0, 0.0, -0.20, 0.0, -0.05, 0.0, 0.09, 0.10, 0.12),
    (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.18, 0.0, 0.22),
)

_PROGRAM_SHARES = (0.18, 0.14, 0.25, 0.23, 0.20)

_STREETS = (
    "OAK", "MAPLE", "PINE", "ELM", "HOLLY", "MAGNOLIA", "PEACH", "CEDAR",
    "WALNUT", "BIRCH", "LAUREL", "SUNSET", "HILLSIDE", "MEADOW", "RIVER",
)
_SUFFIX_SHORT = ("ST", "AVE", "DR", "BLVD", "RD", "LN", "CT")
_SUFFIX_LONG = ("Street", "Avenue", "Drive", "Boulevard", "Road", "Lane", "Court")


@dataclass(frozen=True)
class SynthConfig:
    n_training: int = 2400
    n_program: int = 2500
    n_cex: int = 250
    trends: tuple[tuple[float, ...], ...] = DEFAULT_TRENDS
    trend_jitter_sd: float = 0.15  # relative jitter on moving steps
    step_flip_prob: float = 0.02   # chance a step's moved/flat bit flips
    incomplete_frac: float = 0.04
    owner_occupied_rate: float = 0.60
    rent_coverage: float = 0.92
    lien_rates: tuple[tuple[str, float], ...] = (
        (Neighborhood.ASHVIEW_HEIGHTS.value, 0.41),
        (Neighborhood.ATLANTA_UNIVERSITY_CENTER.value, 0.41),
        (Neighborhood.ENGLISH_AVENUE.value, 0.41),
        (Neighborhood.VINE_CITY.value, 0.41),
        (Neighborhood.WASHINGTON_PARK.value, 0.42),
        (Neighborhood.OTHER.value, 0.30),
    )
    lien_observe_fracs: tuple[tuple[str, float], ...] = (
        (Neighborhood.WASHINGTON_PARK.value, 0.45),
    )
    default_observe_frac: float = 0.30
    income_per_rent: float = 40.0
    income_noise_sd: float = 3000.0
    reference_year: int = 2017

    def lien_rate(self, nbhd: Neighborhood) -> float:
        return dict(self.lien_rates).get(nbhd.value, 0.4)

    def observe_frac(self, nbhd: Neighborhood) -> float:
        return dict(self.lien_observe_fracs).get(nbhd.value, self.default_observe_frac)


@dataclass(frozen=True)
class GroundTruth:
    """Latent state emitted for test oracles, keyed by parcel_id."""

    cluster: dict[str, int]
    income: dict[str, float]
    has_lien: dict[str, bool]
    owner_occupied: dict[str, bool]
    mixture_weights: tuple[float, ...]
    trends: tuple[tuple[float, ...], ...]


@dataclass(frozen=True)
class SynthOutput:
    dataset: Dataset
    truth: GroundTruth


def _band(rng: np.random.Generator, bit: np.ndarray, lo: tuple[float, float],
          hi: tuple[float, float]) -> np.ndarray:
    u = rng.random(bit.shape[0])
    return np.where(bit, hi[0] + u * (hi[1] - hi[0]), lo[0] + u * (lo[1] - lo[0]))


_LAND_USES = (
    LandUse.ONE_FAMILY, LandUse.TWO_FAMILY, LandUse.THREE_FAMILY, LandUse.CONDO,
    LandUse.TOWNHOUSE, LandUse.CONDO_LOFT, LandUse.EMPTY_LOT, LandUse.OTHER,
)
_LAND_USE_P = (0.62, 0.08, 0.02, 0.10, 0.07, 0.04, 0.04, 0.03)


def generate_synthetic(seed: int, config: SynthConfig | None = None) -> SynthOutput:
    """Generate the full six-file dataset plus its latent ground truth.

    Byte-identical output for equal (seed, config). Cluster count must be
    between 2 and 4: labels are the sum of up to three feature-threshold
    bits (distance band, first-year-value band, age band), which keeps
    every generative feature necessary for classification.
    """
    config = config or SynthConfig()
    k = len(config.trends)
    if not 2 <= k <= 4:
        raise ValueError("between 2 and 4 latent trends supported")
    if config.n_training <= 0 or config.n_program <= 0 or config.n_cex <= 0:
        raise ValueError("generator sizes must be positive")
    rng = np.random.default_rng(seed)

    blocks: list[tuple[Neighborhood, int]] = [(Neighborhood.OTHER, config.n_training)]
    remaining = config.n_program
    for nbhd, share in zip(PROGRAM_NEIGHBORHOODS, _PROGRAM_SHARES):
        n = int(round(config.n_program * share))
        n = min(n, remaining)
        blocks.append((nbhd, n))
        remaining -= n
    if remaining > 0:
        nbhd, n = blocks[-1]
        blocks[-1] = (nbhd, n + remaining)

    n_bits = k - 1
    parcels: list[ParcelRecord] = []
    series: list[AssessmentSeries] = []
    rents: list[RentEstimate] = []
    liens: list[LienObservation] = []
    truth_cluster: dict[str, int] = {}
    truth_income: dict[str, float] = {}
    truth_lien: dict[str, bool] = {}
    truth_owner: dict[str, bool] = {}
    bedroom_totals: dict[Neighborhood, float] = {}

    counter = 0
    for nbhd, n in blocks:
        bits = rng.random((n, 3)) < 0.5
        bits[:, n_bits:] = False
        cluster = bits.sum(axis=1).astype(int)

        dist = _band(rng, bits[:, 0], (60.0, 880.0), (1120.0, 3200.0))
        v2005 = _band(rng, bits[:, 1] if n_bits >= 2 else np.zeros(n, dtype=bool),
                      (35_000.0, 92_000.0), (108_000.0, 320_000.0))
        age = _band(rng, bits[:, 2] if n_bits >= 3 else np.zeros(n, dtype=bool),
                    (3.0, 36.0), (44.0, 95.0))
        year_built = (config.reference_year - age).astype(int)

        land_use_idx = rng.choice(len(_LAND_USES), size=n, p=_LAND_USE_P)
        bedrooms = rng.integers(1, 6, size=n)
        rooms = bedrooms + rng.integers(1, 5, size=n)
        bathrooms = rng.integers(1, 4, size=n)
        sqft = 420.0 * rooms + rng.normal(0.0, 150.0, size=n)
        sqft = np.clip(sqft, 450.0, None)
        acres = rng.uniform(0.05, 0.5, size=n)

        occupied = rng.random(n) < config.owner_occupied_rate
        homestead = occupied & (rng.random(n) < 0.8)
        city_ex = rng.random(n) < 0.25
        county_ex = rng.random(n) < 0.22

        has_lien = rng.random(n) < config.lien_rate(nbhd)
        lien_observed = rng.random(n) < config.observe_frac(nbhd)
        has_rent = rng.random(n) < config.rent_coverage
        rent = np.clip(350.0 + 0.45 * sqft * rng.uniform(0.8, 1.2, size=n), 400.0, 3200.0)
        income = config.income_per_rent * rent + rng.normal(0.0, config.income_noise_sd, size=n)
        income = np.clip(income, 6000.0, None)

        patterns = np.asarray(config.trends)  # (k, 10)
        steps = patterns[cluster]
        moving = steps != 0.0
        steps = steps * (1.0 + rng.normal(0.0, config.trend_jitter_sd, size=steps.shape))
        flips = rng.random(steps.shape) < config.step_flip_prob
        injected = rng.uniform(0.005, 0.02, size=steps.shape) * np.where(
            rng.random(steps.shape) < 0.5, 1.0, -1.0)
        steps = np.where(flips & moving, 0.0, steps)
        steps = np.where(flips & ~moving, injected, steps)

        values = np.empty((n, len(SERIES_YEARS)))
        values[:, 0] = v2005
        for j in range(1, len(SERIES_YEARS)):
            values[:, j] = values[:, j - 1] * (1.0 + steps[:, j - 1])
        v_ref = values[:, -1] * (1.0 + rng.uniform(0.0, 0.06, size=n))

        drop_mask = rng.random(n) < config.incomplete_frac
        all_years = list(SERIES_YEARS) + [config.reference_year]
        drop_year_idx = rng.integers(0, len(all_years), size=n)

        street_idx = rng.integers(0, len(_STREETS), size=n)
        suffix_idx = rng.integers(0, len(_SUFFIX_SHORT), size=n)
        use_long_suffix = rng.random(n) < 0.5
        absentee_no = rng.integers(10, 9900, size=n)

        for i in range(n):
            pid = f"P{counter:06d}"
            counter += 1
            lu = _LAND_USES[land_use_idx[i]]
            empty = lu is LandUse.EMPTY_LOT
            street = _STREETS[street_idx[i]]
            number = 100 + (i * 7) % 8800
            situs = f"{number} {street} {_SUFFIX_SHORT[suffix_idx[i]]}"
            if occupied[i]:
                # Owner address is the same place in a different format,
                # so matching has to go through normalization.
                long_form = f"{number} {street.title()} {_SUFFIX_LONG[suffix_idx[i]]}"
                owner = long_form if use_long_suffix[i] else situs
            else:
                owner = f"{absentee_no[i]} REMOTE {_SUFFIX_SHORT[(suffix_idx[i] + 3) % len(_SUFFIX_SHORT)]}"

            units = {LandUse.TWO_FAMILY: 2, LandUse.THREE_FAMILY: 3}.get(lu, 1)
            parcels.append(ParcelRecord(
                parcel_id=pid,
                neighborhood=nbhd,
                situs_address=situs,
                owner_address=owner,
                land_use=lu,
                living_units=0 if empty else units,
                land_acres=float(acres[i]),
                heated_sqft=0.0 if empty else float(sqft[i]),
                rooms=0 if empty else int(rooms[i]),
                bedrooms=0 if empty else int(bedrooms[i]),
                bathrooms=0 if empty else int(bathrooms[i]),
                year_built=int(year_built[i]),
                city_exemption=bool(city_ex[i]),
                county_exemption=bool(county_ex[i]),
                homestead_exemption=bool(homestead[i]) and not empty,
                distance_to_beltline=float(dist[i]),
            ))

            obs = [(y, float(values[i, j])) for j, y in enumerate(SERIES_YEARS)]
            obs.append((config.reference_year, float(v_ref[i])))
            if drop_mask[i]:
                dropped = all_years[drop_year_idx[i]]
                obs = [(y, v) for y, v in obs if y != dropped]
            series.append(AssessmentSeries(pid, tuple(obs)))

            if has_rent[i] and not empty:
                rents.append(RentEstimate(pid, float(rent[i])))
            if lien_observed[i]:
                liens.append(LienObservation(pid, bool(has_lien[i])))

            truth_cluster[pid] = int(cluster[i])
            truth_income[pid] = float(income[i])
            truth_lien[pid] = bool(has_lien[i])
            truth_owner[pid] = bool(occupied[i])
            if not empty:
                bedroom_totals[nbhd] = bedroom_totals.get(nbhd, 0.0) + float(bedrooms[i])

    cex = _generate_cex(rng, config)

    stats = []
    for nbhd, _ in blocks:
        total_bed = max(bedroom_totals.get(nbhd, 1.0), 1.0)
        ratio = rng.uniform(1.05, 1.55)
        stats.append(NeighborhoodStats(nbhd, float(round(total_bed * ratio)), total_bed))

    weights = np.bincount(
        [truth_cluster[p.parcel_id] for p in parcels], minlength=k
    ).astype(float)
    weights /= weights.sum()

    dataset = Dataset(
        parcels=tuple(parcels),
        assessments=tuple(series),
        rents=tuple(rents),
        cex=tuple(cex),
        liens=tuple(liens),
        neighborhood_stats=tuple(stats),
    )
    truth = GroundTruth(
        cluster=truth_cluster,
        income=truth_income,
        has_lien=truth_lien,
        owner_occupied=truth_owner,
        mixture_weights=tuple(float(w) for w in weights),
        trends=config.trends,
    )
    return SynthOutput(dataset=dataset, truth=truth)


def _generate_cex(rng: np.random.Generator, config: SynthConfig) -> list[CexRecord]:
    n = config.n_cex
    rent = rng.uniform(500.0, 2500.0, size=n)
    income = np.clip(
        config.income_per_rent * rent + rng.normal(0.0, config.income_noise_sd, size=n),
        5000.0, None)
    bedrooms = rng.integers(1, 6, size=n).astype(float)
    bathrooms = rng.integers(1, 4, size=n).astype(float)
    rooms = bedrooms + rng.integers(1, 5, size=n)
    home_age = rng.uniform(2.0, 90.0, size=n)
    homeowner = (rng.random(n) < 0.84).astype(float)
    metro = (rng.random(n) < 0.88).astype(float)

    # Flag columns stay observed so no record is entirely missing.
    miss_rates = {"income": 0.15, "rent": 0.07, "bedrooms": 0.06,
                  "bathrooms": 0.06, "rooms": 0.05, "home_age": 0.08}
    masks = {name: rng.random(n) < rate for name, rate in miss_rates.items()}

    records = []
    for i in range(n):
        records.append(CexRecord(
            before_tax_income=float("nan") if masks["income"][i] else float(income[i]),
            monthly_rent=float("nan") if masks["rent"][i] else float(rent[i]),
            bedrooms=float("nan") if masks["bedrooms"][i] else float(bedrooms[i]),
            bathrooms=float("nan") if masks["bathrooms"][i] else float(bathrooms[i]),
            rooms=float("nan") if masks["rooms"][i] else float(rooms[i]),
            home_age=float("nan") if masks["home_age"][i] else float(home_age[i]),
            extra_features=(("homeowner_flag", float(homeowner[i])), ("metro_flag", float(metro[i]))),
        ))
    return records
