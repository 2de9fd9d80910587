"""Stage-by-stage pipeline driver.

Each subcommand consumes the previous stage's files by path and writes
its outputs plus a manifest, so any artifact can be rebuilt or
inspected without the service. All randomness flows from --seed; a
fixed seed reproduces every artifact byte for byte (manifests carry a
wall-clock timestamp and are exempt).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import clustering, dataio, synth
from .costsim import (
    MillageConfig,
    estimate_to_json,
    millage_from_json,
    per_year_to_csv,
    run_scenario,
    scenario_from_json,
)
from .eligibility import (
    context_from_dataset,
    evaluate,
    load_policy,
    write_default_policy,
)
from .forecast import (
    ForecastMethod,
    fit_cluster_classifier,
    forecast_all,
    forecast_from_json,
    forecast_to_csv,
    forecast_to_json,
)
from .forest import ForestParams, model_to_json
from .income import (
    income_model_from_json,
    income_model_to_json,
    prepare_cex,
    train_income_model,
)
from .provenance import file_digest, write_manifest
from .types import LandUse, Neighborhood


def fail(code: str, message: str, hint: str | None = None) -> None:
    doc = {"error": code, "message": message}
    if hint:
        doc["hint"] = hint
    print(json.dumps(doc), file=sys.stderr)
    raise SystemExit(1)


def _require(path: Path, artifact: str, stage: str) -> Path:
    if not path.exists():
        fail("missing-artifact", f"{artifact} not found at {path}",
             hint=f"run stage {stage} first")
    return path


def _load_data(data_dir: str) -> "dataio.Dataset":
    paths = dataio.DatasetPaths.in_dir(data_dir)
    _require(paths.parcels, "input dataset", "synth (or point --data-dir at your CSVs)")
    try:
        return dataio.load_dataset(paths)
    except dataio.DatasetLoadError as exc:
        fail("load-failed", str(exc))


def cmd_synth(args: argparse.Namespace) -> int:
    config = synth.SynthConfig()
    if args.config:
        doc = json.loads(Path(args.config).read_text())
        config = synth.SynthConfig(**{**config.__dict__, **doc})
    out = synth.generate_synthetic(args.seed, config)
    out_dir = Path(args.out)
    dataio.write_dataset(out.dataset, out_dir)
    with open(out_dir / "ground_truth.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["parcel_id", "latent_cluster", "true_income", "true_has_lien",
                    "owner_occupied"])
        for p in out.dataset.parcels:
            pid = p.parcel_id
            w.writerow([pid, out.truth.cluster[pid], repr(out.truth.income[pid]),
                        int(out.truth.has_lien[pid]), int(out.truth.owner_occupied[pid])])
    write_manifest(out_dir, "synth", args.seed)
    print(f"wrote synthetic dataset ({len(out.dataset.parcels)} parcels) to {out_dir}")
    return 0


def cmd_ingest(args: argparse.Namespace) -> int:
    dataset = _load_data(args.data_dir)
    report = dataio.validate_dataset(dataset)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {
        "accepted": report.accepted,
        "counts": dict(report.counts),
        "errors": [{"file": i.file, "row": i.row, "rule": i.rule, "message": i.message}
                   for i in report.errors],
        "warnings": [{"file": i.file, "row": i.row, "rule": i.rule, "message": i.message}
                     for i in report.warnings],
        "load_warnings": list(dataset.warnings),
    }
    (out_dir / "validation_report.json").write_text(json.dumps(doc, indent=2, sort_keys=True))
    write_manifest(out_dir, "ingest", args.seed,
                   inputs=_data_inputs(args.data_dir))
    print(f"validation: {len(report.errors)} errors, {len(report.warnings)} warnings")
    if not report.accepted:
        fail("validation-failed", f"{len(report.errors)} invariant violations; "
             f"see {out_dir / 'validation_report.json'}")
    return 0


def _data_inputs(data_dir: str) -> dict[str, Path]:
    paths = dataio.DatasetPaths.in_dir(data_dir)
    return {name: getattr(paths, name)
            for name in ("parcels", "assessments", "rents", "cex", "liens", "neighborhoods")
            if getattr(paths, name).exists()}


def _training_signatures(dataset, eps: float):
    assess = dataset.assessments_by_id()
    complete_ids = {s.parcel_id for s in dataio.complete_series(dataset)}
    training = [p for p in dataset.parcels
                if p.neighborhood is Neighborhood.OTHER
                and p.land_use is not LandUse.EMPTY_LOT
                and p.parcel_id in complete_ids]
    if not training:
        fail("no-training-series",
             "no complete training-area series to cluster",
             hint="run stage synth first")
    pct = {p.parcel_id: clustering.to_pct_changes(assess[p.parcel_id]) for p in training}
    sigs = [clustering.binarize(pct[p.parcel_id], eps) for p in training]
    return sigs, pct


def cmd_cluster(args: argparse.Namespace) -> int:
    dataset = _load_data(args.data_dir)
    sigs, pct = _training_signatures(dataset, args.eps)
    model = clustering.build_cluster_model(sigs, pct, k=args.k)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "cluster_model.json").write_text(clustering.cluster_model_to_json(model))
    write_manifest(out_dir, "cluster", args.seed, inputs=_data_inputs(args.data_dir),
                   configs={"k": str(args.k), "eps": str(args.eps)})
    print(f"clustered {len(sigs)} series into {args.k} clusters "
          f"(sizes {sorted(model.cluster_sizes.values(), reverse=True)})")
    return 0


def cmd_train_income(args: argparse.Namespace) -> int:
    dataset = _load_data(args.data_dir)
    matrix = prepare_cex(list(dataset.cex))
    model = train_income_model(
        matrix,
        ForestParams(n_trees=args.trees, seed=args.seed),
        ForestParams(n_trees=max(10, args.trees // 3), seed=args.seed + 1),
        rent_only=args.rent_only,
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "income_model.json").write_text(income_model_to_json(model))
    write_manifest(out_dir, "train-income", args.seed, inputs=_data_inputs(args.data_dir))
    print(f"income model trained on {model.n_training_rows} rows, "
          f"oob R^2 = {model.oob_r2:.3f}")
    return 0


def cmd_forecast(args: argparse.Namespace) -> int:
    dataset = _load_data(args.data_dir)
    cluster_path = _require(Path(args.cluster_model), "cluster model", "cluster")
    cluster_model = clustering.cluster_model_from_json(cluster_path.read_text())
    assess = dataset.assessments_by_id()
    training = [p for p in dataset.parcels if p.parcel_id in cluster_model.labels]
    classifier = fit_cluster_classifier(training, assess, cluster_model.labels,
                                        ForestParams(n_trees=args.trees, seed=args.seed))
    table = forecast_all(dataset, cluster_model, classifier,
                         horizon=args.horizon,
                         method=ForecastMethod(args.method),
                         base_year=args.base_year)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "classifier.json").write_text(model_to_json(classifier))
    (out_dir / "forecast.json").write_text(forecast_to_json(table))
    forecast_to_csv(table, out_dir / "forecast.csv")
    write_manifest(out_dir, "forecast", args.seed,
                   inputs={**_data_inputs(args.data_dir), "cluster_model": cluster_path})
    print(f"forecast {len(table.rows)} parcels over {args.horizon} years "
          f"(classifier oob accuracy {classifier.oob_score:.3f}, "
          f"{len(table.excluded)} excluded)")
    return 0


def _resolve_policy(args: argparse.Namespace, out_dir: Path):
    if args.policy:
        return load_policy(_require(Path(args.policy), "policy config", "(write one)"))
    default_path = out_dir / "policy.json"
    if not default_path.exists():
        out_dir.mkdir(parents=True, exist_ok=True)
        write_default_policy(default_path)
        print(f"no --policy given; wrote default to {default_path}")
    return load_policy(default_path)


def cmd_eligibility(args: argparse.Namespace) -> int:
    dataset = _load_data(args.data_dir)
    income_path = _require(Path(args.income_model), "income model", "train-income")
    income_model = income_model_from_json(income_path.read_text())
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    policy = _resolve_policy(args, out_dir)
    ctx = context_from_dataset(policy, dataset)

    rents = dataset.rent_by_id()
    liens = dataset.lien_by_id()
    results = []
    for p in sorted(dataset.parcels, key=lambda p: p.parcel_id):
        # Per-parcel stream keeps simulated lien draws independent of
        # evaluation order.
        rng = np.random.default_rng([args.seed, _stable_hash(p.parcel_id)])
        results.append(evaluate(p, dataset, income_model, ctx, rng,
                                rents=rents, liens=liens))

    with open(out_dir / "eligibility.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["parcel_id", "location_ok", "owner_ok", "lien_ok", "income_ok",
                    "eligible", "household_size", "reasons"])
        for r in results:
            w.writerow([r.parcel_id, int(r.location_ok), int(r.owner_ok), int(r.lien_ok),
                        int(r.income_ok), int(r.eligible), r.estimated_household_size,
                        "|".join(r.reasons)])
    summary = {
        "parcels": len(results),
        "eligible": sum(r.eligible for r in results),
        "by_criterion": {
            "location": sum(r.location_ok for r in results),
            "owner_occupancy": sum(r.owner_ok for r in results),
            "liens": sum(r.lien_ok for r in results),
            "income": sum(r.income_ok for r in results),
        },
        "policy_checksum": ctx.policy_checksum,
    }
    (out_dir / "eligibility.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    write_manifest(out_dir, "eligibility", args.seed,
                   inputs={**_data_inputs(args.data_dir), "income_model": income_path})
    print(f"{summary['eligible']} of {summary['parcels']} parcels eligible")
    return 0


def _stable_hash(text: str) -> int:
    import hashlib
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big")


def cmd_simulate(args: argparse.Namespace) -> int:
    dataset = _load_data(args.data_dir)
    forecast_path = _require(Path(args.forecast), "forecast table", "forecast")
    table = forecast_from_json(forecast_path.read_text())
    income_path = _require(Path(args.income_model), "income model", "train-income")
    income_model = income_model_from_json(income_path.read_text())
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    policy = _resolve_policy(args, out_dir)
    ctx = context_from_dataset(policy, dataset)

    scenario_path = _require(Path(args.scenario), "scenario config", "(write one)")
    sc = scenario_from_json(scenario_path.read_text())
    if args.seed is not None and args.seed != 0:
        from dataclasses import replace
        sc = replace(sc, seed=args.seed)
    millage = MillageConfig()
    if args.millage:
        millage = millage_from_json(Path(args.millage).read_text())

    jobs = 1 if args.deterministic else args.jobs
    if args.audit:
        estimate, trail = run_scenario(dataset, table, income_model, ctx, sc, millage,
                                       audit=True, jobs=jobs)
        with open(out_dir / "audit.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["replicate", "parcel_id", "subsidy"])
            for r in range(trail.per_household.shape[0]):
                for i, pid in enumerate(trail.parcel_ids):
                    if trail.per_household[r, i] > 0:
                        w.writerow([r, pid, repr(float(trail.per_household[r, i]))])
    else:
        estimate = run_scenario(dataset, table, income_model, ctx, sc, millage, jobs=jobs)

    (out_dir / "cost_estimate.json").write_text(
        estimate_to_json(estimate, sc, ctx.policy_checksum))
    per_year_to_csv(estimate, table.base_year, out_dir / "per_year.csv")
    write_manifest(out_dir, "simulate", sc.seed,
                   inputs={**_data_inputs(args.data_dir), "forecast": forecast_path,
                           "income_model": income_path, "scenario": scenario_path},
                   configs={"scenario": file_digest(scenario_path),
                            "policy": ctx.policy_checksum})
    print(f"mean 7-year cost {estimate.mean_total_cost:,.0f} "
          f"(std {estimate.std_total_cost:,.0f}, "
          f"eligible {estimate.eligible_count:.1f}, "
          f"enrolled {estimate.enrolled_initial:.1f} -> {estimate.enrolled_final:.1f})")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import ApiSession, create_app

    artifacts = Path(args.artifacts)
    _require(artifacts / "cluster_model.json", "cluster model", "cluster")
    _require(artifacts / "classifier.json", "classifier", "forecast")
    _require(artifacts / "income_model.json", "income model", "train-income")
    _require(artifacts / "forecast.json", "forecast table", "forecast")
    if not (artifacts / "policy.json").exists() and not args.policy:
        write_default_policy(artifacts / "policy.json")
    session = ApiSession.build(args.data_dir, artifacts,
                               policy_path=args.policy or None,
                               seed=args.seed,
                               sync_replicate_cap=args.sync_cap)
    app = create_app(session, static_dir=args.static_dir)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="taxfund",
        description="Forecasting and cost simulation for property-tax-subsidy programs.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data_dir=True):
        if data_dir:
            p.add_argument("--data-dir", default="artifacts/data",
                           help="directory with the six input CSVs")
        p.add_argument("--out", default="artifacts", help="output directory")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out", default="artifacts/data")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="JSON overriding generator sizes/rates")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="load and validate the input CSVs")
    common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("cluster", help="cluster training-area assessment histories")
    common(p)
    p.add_argument("--k", type=int, default=4, help="cluster count")
    p.add_argument("--eps", type=float, default=0.0,
                   help="percent-change magnitude below which a step counts as no change")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("train-income", help="train the rent/characteristics income model")
    common(p)
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--rent-only", action="store_true",
                   help="regress income on rent alone")
    p.set_defaults(func=cmd_train_income)

    p = sub.add_parser("forecast", help="assign clusters and project assessments")
    common(p)
    p.add_argument("--cluster-model", default="artifacts/cluster_model.json")
    p.add_argument("--horizon", type=int, default=7)
    p.add_argument("--method", choices=[m.value for m in ForecastMethod],
                   default=ForecastMethod.CLUSTER_TREND.value)
    p.add_argument("--base-year", type=int, default=2017)
    p.add_argument("--trees", type=int, default=100)
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("eligibility", help="dataset-wide eligibility evaluation")
    common(p)
    p.add_argument("--income-model", default="artifacts/income_model.json")
    p.add_argument("--policy", help="policy JSON (income limits, lien rates)")
    p.set_defaults(func=cmd_eligibility)

    p = sub.add_parser("simulate", help="Monte Carlo program cost for a scenario")
    common(p)
    p.add_argument("--forecast", default="artifacts/forecast.json")
    p.add_argument("--income-model", default="artifacts/income_model.json")
    p.add_argument("--policy", help="policy JSON")
    p.add_argument("--scenario", required=True, help="scenario config JSON")
    p.add_argument("--millage", help="millage config JSON")
    p.add_argument("--audit", action="store_true",
                   help="emit per-replicate per-household contributions")
    p.add_argument("--jobs", type=int, default=1, help="parallel replicate workers")
    p.add_argument("--deterministic", action="store_true",
                   help="force serial reductions (results are identical either way)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("serve", help="run the what-if HTTP API")
    p.add_argument("--data-dir", default="artifacts/data")
    p.add_argument("--artifacts", default="artifacts")
    p.add_argument("--policy")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--host", default=os.environ.get("TAXFUND_BIND", "127.0.0.1"),
                   help="bind address (env TAXFUND_BIND)")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--static-dir", help="built UI assets to serve at /")
    p.add_argument("--sync-cap", type=int, default=2000,
                   help="largest replicate count run synchronously")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
