"""Read-only JSON API over a loaded artifact bundle.

The session (dataset, models, forecasts, policy) is immutable after
startup; every response carries the bundle checksum in the
X-Bundle-Checksum header. Dataset-mode eligibility uses a per-parcel
stream seeded from (session seed, parcel id hash) so repeated GETs are
identical even when the policy simulates lien draws. Predicted incomes
for real parcels stay hidden unless the caller sets include_estimates.
"""

from __future__ import annotations

import hashlib
import json
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .clustering import ClusterModel, cluster_model_from_json
from .costsim import (
    CostEstimate,
    MillageConfig,
    household_subsidy,
    millage_from_json,
    run_scenario,
    scenario_from_json,
)
from .dataio import DatasetPaths, load_dataset
from .eligibility import (
    EligibilityContext,
    EligibilityResult,
    context_from_dataset,
    evaluate,
    income_eligible,
    load_policy,
)
from .forecast import (
    ForecastRow,
    ForecastTable,
    forecast_from_json,
    project_values,
)
from .forest import ForestModel, model_from_json
from .income import IncomeModel, income_model_from_json, predict_income
from .types import Dataset, LandUse, Neighborhood, ParcelRecord

API_PREFIX = "/api/v1"


def _parcel_hash(parcel_id: str) -> int:
    digest = hashlib.sha256(parcel_id.encode()).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass
class ApiSession:
    dataset: Dataset
    cluster_model: ClusterModel
    classifier: ForestModel
    income_model: IncomeModel
    forecasts: ForecastTable
    ctx: EligibilityContext
    millage: MillageConfig
    seed: int
    checksum: str
    sync_replicate_cap: int = 2000
    reference_year: int = 2017
    parcels_sorted: list[ParcelRecord] = field(default_factory=list)
    eligibility: dict[str, EligibilityResult] = field(default_factory=dict)
    forecast_rows: dict[str, ForecastRow] = field(default_factory=dict)

    @classmethod
    def build(cls, data_dir: str | Path, artifacts_dir: str | Path,
              policy_path: str | Path | None = None,
              millage_path: str | Path | None = None,
              seed: int = 0, sync_replicate_cap: int = 2000) -> "ApiSession":
        artifacts = Path(artifacts_dir)
        dataset = load_dataset(DatasetPaths.in_dir(data_dir))
        cluster_model = cluster_model_from_json((artifacts / "cluster_model.json").read_text())
        classifier = model_from_json((artifacts / "classifier.json").read_text())
        income_model = income_model_from_json((artifacts / "income_model.json").read_text())
        forecasts = forecast_from_json((artifacts / "forecast.json").read_text())
        policy = load_policy(policy_path or artifacts / "policy.json")
        millage = MillageConfig()
        if millage_path and Path(millage_path).exists():
            millage = millage_from_json(Path(millage_path).read_text())
        elif (artifacts / "millage.json").exists():
            millage = millage_from_json((artifacts / "millage.json").read_text())

        checksum = hashlib.sha256()
        for name in ("cluster_model.json", "classifier.json", "income_model.json", "forecast.json"):
            checksum.update(hashlib.sha256((artifacts / name).read_bytes()).digest())
        checksum.update(policy.checksum.encode())

        session = cls(
            dataset=dataset,
            cluster_model=cluster_model,
            classifier=classifier,
            income_model=income_model,
            forecasts=forecasts,
            ctx=context_from_dataset(policy, dataset),
            millage=millage,
            seed=seed,
            checksum=checksum.hexdigest(),
            sync_replicate_cap=sync_replicate_cap,
        )
        session._precompute()
        return session

    def _precompute(self) -> None:
        self.parcels_sorted = sorted(self.dataset.parcels, key=lambda p: p.parcel_id)
        self.forecast_rows = self.forecasts.by_id()
        rents = self.dataset.rent_by_id()
        liens = self.dataset.lien_by_id()
        for p in self.parcels_sorted:
            rng = np.random.default_rng([self.seed, _parcel_hash(p.parcel_id)])
            self.eligibility[p.parcel_id] = evaluate(
                p, self.dataset, self.income_model, self.ctx, rng,
                self.reference_year, rents=rents, liens=liens)


class Attestations(BaseModel):
    tenure_one_year: bool | None = None
    heir_status: bool | None = None
    enrollment_window: bool | None = None


class ManualFeatures(BaseModel):
    neighborhood: str
    bedrooms: int | None = None
    rooms: int | None = None
    bathrooms: int | None = None
    year_built: int | None = None
    heated_sqft: float | None = None
    base_value: float | None = Field(default=None, gt=0)
    owner_occupied: bool | None = None
    monthly_rent: float | None = Field(default=None, gt=0)


class WhatIfRequest(BaseModel):
    parcel_id: str | None = None
    features: ManualFeatures | None = None
    household_size: int | None = Field(default=None, ge=1)
    annual_income: float | None = None
    has_lien: bool | None = None
    attestations: Attestations | None = None
    include_estimates: bool = False


def _error(status: int, code: str, message: str, fields: list | None = None):
    raise HTTPException(status_code=status,
                        detail={"code": code, "message": message, "fields": fields or []})


def create_app(session: ApiSession, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="taxfund service", version="1", openapi_url=f"{API_PREFIX}/spec")
    jobs: dict[str, dict] = {}
    jobs_lock = threading.Lock()
    pool = ThreadPoolExecutor(max_workers=2)

    @app.exception_handler(HTTPException)
    async def http_error(request: Request, exc: HTTPException):
        detail = exc.detail
        if not isinstance(detail, dict) or "code" not in detail:
            detail = {"code": "error", "message": str(detail), "fields": []}
        return JSONResponse(status_code=exc.status_code, content=detail,
                            headers={"X-Bundle-Checksum": session.checksum})

    @app.exception_handler(RequestValidationError)
    async def validation_error(request: Request, exc: RequestValidationError):
        fields = [{"field": ".".join(str(p) for p in e["loc"]), "message": e["msg"]}
                  for e in exc.errors()]
        return JSONResponse(
            status_code=422,
            content={"code": "invalid-request", "message": "request validation failed",
                     "fields": fields},
            headers={"X-Bundle-Checksum": session.checksum})

    @app.middleware("http")
    async def stamp_checksum(request: Request, call_next):
        response = await call_next(request)
        response.headers["X-Bundle-Checksum"] = session.checksum
        return response

    def parcel_summary(p: ParcelRecord) -> dict:
        res = session.eligibility[p.parcel_id]
        row = session.forecast_rows.get(p.parcel_id)
        return {
            "parcel_id": p.parcel_id,
            "neighborhood": p.neighborhood.value,
            "situs_address": p.situs_address,
            "land_use": p.land_use.value,
            "eligible": res.eligible,
            "cluster": row.cluster if row else None,
            "base_value": row.base_value if row else None,
        }

    @app.get(f"{API_PREFIX}/parcels")
    def list_parcels(neighborhood: str | None = None, page: int = 1, page_size: int = 50):
        if page < 1:
            _error(400, "invalid-page", "page must be >= 1",
                   [{"field": "page", "message": "must be >= 1"}])
        page_size = max(1, min(page_size, 200))
        parcels = session.parcels_sorted
        if neighborhood is not None:
            try:
                target = Neighborhood(neighborhood)
            except ValueError:
                _error(400, "invalid-neighborhood",
                       f"unknown neighborhood {neighborhood!r}",
                       [{"field": "neighborhood",
                         "message": "allowed: " + ", ".join(n.value for n in Neighborhood)}])
            parcels = [p for p in parcels if p.neighborhood is target]
        start = (page - 1) * page_size
        items = [parcel_summary(p) for p in parcels[start:start + page_size]]
        return {"items": items, "page": page, "page_size": page_size,
                "total": len(parcels), "bundle_checksum": session.checksum}

    def eligibility_payload(res: EligibilityResult, include_estimates: bool) -> dict:
        payload = {
            "eligible": res.eligible,
            "reasons": list(res.reasons),
            "location_ok": res.location_ok,
            "owner_ok": res.owner_ok,
            "lien_ok": res.lien_ok,
            "income_ok": res.income_ok,
            "lien_provenance": res.lien_provenance,
            "estimated_household_size": res.estimated_household_size,
            "income_indeterminate": res.estimated_income is None,
        }
        if include_estimates:
            payload["estimated_income"] = res.estimated_income
        return payload

    @app.get(f"{API_PREFIX}/parcels/{{parcel_id}}")
    def parcel_detail(parcel_id: str, include_estimates: bool = False):
        parcel = next((p for p in session.parcels_sorted if p.parcel_id == parcel_id), None)
        if parcel is None:
            _error(404, "unknown-parcel", f"no parcel {parcel_id!r}")
        row = session.forecast_rows.get(parcel_id)
        res = session.eligibility[parcel_id]
        return {
            "parcel_id": parcel_id,
            "neighborhood": parcel.neighborhood.value,
            "situs_address": parcel.situs_address,
            "land_use": parcel.land_use.value,
            "characteristics": {
                "living_units": parcel.living_units,
                "land_acres": parcel.land_acres,
                "heated_sqft": parcel.heated_sqft,
                "rooms": parcel.rooms,
                "bedrooms": parcel.bedrooms,
                "bathrooms": parcel.bathrooms,
                "year_built": parcel.year_built,
                "distance_to_beltline_m": parcel.distance_to_beltline,
                "city_exemption": parcel.city_exemption,
                "county_exemption": parcel.county_exemption,
                "homestead_exemption": parcel.homestead_exemption,
            },
            "cluster": row.cluster if row else None,
            "base_year": row.base_year if row else None,
            "base_value": row.base_value if row else None,
            "projection": [[y, v] for y, v in row.projected] if row else None,
            "eligibility": eligibility_payload(res, include_estimates),
            "bundle_checksum": session.checksum,
        }

    @app.post(f"{API_PREFIX}/eligibility/whatif")
    def whatif(req: WhatIfRequest):
        if req.annual_income is not None and req.annual_income < 0:
            _error(422, "invalid-field", "annual_income must be nonnegative",
                   [{"field": "annual_income", "message": "must be >= 0"}])
        if req.parcel_id is None and req.features is None:
            _error(422, "invalid-request", "supply parcel_id or a manual feature set",
                   [{"field": "parcel_id", "message": "one of parcel_id/features required"}])
        if req.parcel_id is not None:
            return _whatif_parcel(session, req)
        return _whatif_manual(session, req)

    @app.post(f"{API_PREFIX}/scenarios")
    def submit_scenario(config: dict):
        try:
            sc = scenario_from_json(json.dumps(config))
        except (ValueError, KeyError) as exc:
            _error(422, "invalid-scenario", str(exc),
                   [{"field": "scenario", "message": str(exc)}])
        job_id = uuid.uuid4().hex

        def execute() -> dict:
            estimate = run_scenario(session.dataset, session.forecasts,
                                    session.income_model, session.ctx, sc,
                                    session.millage,
                                    reference_year=session.reference_year)
            return _estimate_payload(estimate)

        if sc.replicates <= session.sync_replicate_cap:
            result = execute()
            with jobs_lock:
                jobs[job_id] = {"status": "done", "result": result}
            return {"id": job_id, "status": "done", "result": result,
                    "bundle_checksum": session.checksum}

        with jobs_lock:
            jobs[job_id] = {"status": "running", "result": None}

        def background():
            try:
                result = execute()
                with jobs_lock:
                    jobs[job_id] = {"status": "done", "result": result}
            except Exception as exc:  # surfaced via the poll endpoint
                with jobs_lock:
                    jobs[job_id] = {"status": "failed", "error": str(exc)}

        pool.submit(background)
        return JSONResponse(
            status_code=202,
            content={"id": job_id, "status": "running",
                     "poll": f"{API_PREFIX}/scenarios/{job_id}",
                     "bundle_checksum": session.checksum})

    @app.get(f"{API_PREFIX}/scenarios/{{job_id}}")
    def scenario_status(job_id: str):
        with jobs_lock:
            job = jobs.get(job_id)
        if job is None:
            _error(404, "unknown-job", f"no scenario run {job_id!r}")
        body = {"id": job_id, "status": job["status"], "bundle_checksum": session.checksum}
        if job["status"] == "done":
            body["result"] = job["result"]
        if job["status"] == "failed":
            body["error"] = job.get("error")
        return body

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app


def _estimate_payload(estimate: CostEstimate) -> dict:
    return {
        "mean_total_cost": estimate.mean_total_cost,
        "std_total_cost": estimate.std_total_cost,
        "per_year_mean": list(estimate.per_year_mean),
        "eligible_count": estimate.eligible_count,
        "enrolled_initial": estimate.enrolled_initial,
        "enrolled_final": estimate.enrolled_final,
        "replicate_count": estimate.replicate_count,
        "warnings": list(estimate.warnings),
    }


def _criteria_list(entries: list[tuple[str, bool, str, str]]) -> list[dict]:
    return [{"name": n, "ok": ok, "provenance": prov, "detail": detail}
            for n, ok, prov, detail in entries]


def _attestation_entries(att: Attestations | None) -> list[tuple[str, bool, str, str]]:
    att = att or Attestations()
    out = []
    for name, value in (("tenure_one_year", att.tenure_one_year),
                        ("heir_status", att.heir_status),
                        ("enrollment_window", att.enrollment_window)):
        if value is None:
            out.append((name, True, "assumed", "not asserted; assumed satisfied"))
        else:
            out.append((name, bool(value), "attested", "asserted by the applicant"))
    return out


def _whatif_parcel(session: ApiSession, req: WhatIfRequest) -> dict:
    parcel = next((p for p in session.parcels_sorted if p.parcel_id == req.parcel_id), None)
    if parcel is None:
        _error(404, "unknown-parcel", f"no parcel {req.parcel_id!r}")
    base = session.eligibility[parcel.parcel_id]
    row = session.forecast_rows.get(parcel.parcel_id)

    loc_ok = base.location_ok
    owner_ok = base.owner_ok

    if req.has_lien is not None:
        lien_pass, lien_prov = (not req.has_lien), "attested"
    else:
        lien_pass, lien_prov = base.lien_ok, base.lien_provenance

    if req.household_size is not None:
        size, size_prov = req.household_size, "attested"
    else:
        size, size_prov = base.estimated_household_size, "predicted"

    if req.annual_income is not None:
        income, income_prov = req.annual_income, "attested"
    else:
        income, income_prov = base.estimated_income, "predicted"
    income_pass = income_eligible(income, size, session.ctx)

    entries = [
        ("location", loc_ok, "observed", parcel.neighborhood.value),
        ("owner_occupancy", owner_ok, "observed", "address match or homestead exemption"),
        ("liens", lien_pass, lien_prov, ""),
        ("income", income_pass, income_prov,
         f"household size {size} ({size_prov})"),
    ]
    entries += _attestation_entries(req.attestations)
    eligible = all(ok for _, ok, _, _ in entries)

    projection = [[y, v] for y, v in row.projected] if row else None
    subsidy = None
    if row is not None:
        subsidy = household_subsidy([v for _, v in row.projected], row.base_value,
                                    parcel, session.millage,
                                    [True] * len(row.projected))
    body = {
        "parcel_id": parcel.parcel_id,
        "eligible": eligible,
        "criteria": _criteria_list(entries),
        "household_size": size,
        "projection": projection,
        "subsidy_7yr": subsidy,
        "bundle_checksum": session.checksum,
    }
    if req.include_estimates:
        body["estimated_income"] = income
    return body


def _whatif_manual(session: ApiSession, req: WhatIfRequest) -> dict:
    f = req.features
    try:
        nbhd = Neighborhood(f.neighborhood)
    except ValueError:
        _error(422, "invalid-field", f"unknown neighborhood {f.neighborhood!r}",
               [{"field": "features.neighborhood",
                 "message": "allowed: " + ", ".join(n.value for n in Neighborhood)}])

    from .eligibility import location_eligible  # local import keeps module top tidy

    probe = ParcelRecord(
        parcel_id="manual",
        neighborhood=nbhd,
        situs_address="",
        owner_address="",
        land_use=LandUse.ONE_FAMILY,
        living_units=1,
        land_acres=0.0,
        heated_sqft=f.heated_sqft or 0.0,
        rooms=f.rooms or 0,
        bedrooms=f.bedrooms or 0,
        bathrooms=f.bathrooms or 0,
        year_built=f.year_built or session.reference_year,
        city_exemption=False,
        county_exemption=False,
        homestead_exemption=False,
        distance_to_beltline=0.0,
    )
    loc_ok = location_eligible(probe, session.ctx)
    owner_ok = bool(f.owner_occupied) if f.owner_occupied is not None else True
    owner_prov = "attested" if f.owner_occupied is not None else "assumed"

    if req.has_lien is not None:
        lien_pass, lien_prov = (not req.has_lien), "attested"
    else:
        lien_pass, lien_prov = True, "assumed"

    if req.household_size is not None:
        size, size_prov = req.household_size, "attested"
    else:
        try:
            ratio = session.ctx.bedroom_ratio(nbhd)
        except KeyError:
            ratio = 1.0
        import math
        size, size_prov = max(math.floor((f.bedrooms or 0) * ratio + 0.5), 1), "predicted"

    if req.annual_income is not None:
        income, income_prov = req.annual_income, "attested"
    elif f.monthly_rent is not None:
        from .types import RentEstimate
        income = predict_income(session.income_model, probe,
                                RentEstimate("manual", f.monthly_rent),
                                session.reference_year)
        income_prov = "predicted"
    else:
        income, income_prov = None, "indeterminate"
    income_pass = income_eligible(income, size, session.ctx)

    entries = [
        ("location", loc_ok, "user", nbhd.value),
        ("owner_occupancy", owner_ok, owner_prov, ""),
        ("liens", lien_pass, lien_prov, ""),
        ("income", income_pass, income_prov, f"household size {size} ({size_prov})"),
    ]
    entries += _attestation_entries(req.attestations)
    eligible = all(ok for _, ok, _, _ in entries)

    projection = None
    subsidy = None
    if f.base_value is not None:
        from .forecast import encode_features
        matrix = encode_features([probe], {}, session.reference_year)
        cluster = int(session.classifier.predict_batch(matrix.X)[0])
        values = project_values(f.base_value, session.cluster_model.trend[cluster],
                                session.forecasts.horizon)
        years = range(session.forecasts.base_year + 1,
                      session.forecasts.base_year + 1 + session.forecasts.horizon)
        projection = [[y, v] for y, v in zip(years, values)]
        subsidy = household_subsidy(values, f.base_value, probe, session.millage,
                                    [True] * len(values))

    body = {
        "parcel_id": None,
        "eligible": eligible,
        "criteria": _criteria_list(entries),
        "household_size": size,
        "projection": projection,
        "subsidy_7yr": subsidy,
        "bundle_checksum": session.checksum,
    }
    if req.include_estimates:
        body["estimated_income"] = income
    return body
