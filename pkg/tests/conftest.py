"""Shared fixtures: one small synthetic bundle built per session, both
in memory and serialized to disk for the service/CLI tests."""

from __future__ import annotations

from pathlib import Path

import pytest

from taxfund import clustering, dataio, synth
from taxfund.costsim import MillageConfig
from taxfund.eligibility import context_from_dataset, load_policy, write_default_policy
from taxfund.forecast import (
    ForecastMethod,
    fit_cluster_classifier,
    forecast_all,
    forecast_to_csv,
    forecast_to_json,
)
from taxfund.forest import ForestParams, model_to_json
from taxfund.income import income_model_to_json, prepare_cex, train_income_model
from taxfund.types import LandUse, Neighborhood

SMALL_CONFIG = synth.SynthConfig(n_training=320, n_program=320, n_cex=140)
SMALL_SEED = 101


@pytest.fixture(scope="session")
def small_output():
    return synth.generate_synthetic(SMALL_SEED, SMALL_CONFIG)


@pytest.fixture(scope="session")
def small_dataset(small_output):
    return small_output.dataset


def build_cluster_inputs(dataset, eps: float = 0.0):
    assess = dataset.assessments_by_id()
    complete_ids = {s.parcel_id for s in dataio.complete_series(dataset)}
    training = [p for p in dataset.parcels
                if p.neighborhood is Neighborhood.OTHER
                and p.land_use is not LandUse.EMPTY_LOT
                and p.parcel_id in complete_ids]
    pct = {p.parcel_id: clustering.to_pct_changes(assess[p.parcel_id]) for p in training}
    sigs = [clustering.binarize(pct[p.parcel_id], eps) for p in training]
    return training, sigs, pct


@pytest.fixture(scope="session")
def bundle(small_output):
    """Full in-memory pipeline over the small dataset."""
    dataset = small_output.dataset
    assess = dataset.assessments_by_id()
    training, sigs, pct = build_cluster_inputs(dataset)
    cluster_model = clustering.build_cluster_model(sigs, pct, k=4)
    classifier = fit_cluster_classifier(training, assess, cluster_model.labels,
                                        ForestParams(n_trees=40, seed=7))
    forecasts = forecast_all(dataset, cluster_model, classifier, horizon=7,
                             method=ForecastMethod.CLUSTER_TREND)
    income_model = train_income_model(
        prepare_cex(list(dataset.cex)),
        ForestParams(n_trees=40, seed=3),
        ForestParams(n_trees=15, seed=4),
    )
    return {
        "output": small_output,
        "dataset": dataset,
        "training": training,
        "cluster_model": cluster_model,
        "classifier": classifier,
        "forecasts": forecasts,
        "income_model": income_model,
        "millage": MillageConfig(),
    }


@pytest.fixture(scope="session")
def workspace(bundle, tmp_path_factory) -> Path:
    """The bundle serialized the way the CLI stages lay it out."""
    root = tmp_path_factory.mktemp("workspace")
    data_dir = root / "data"
    art = root / "artifacts"
    art.mkdir()
    dataio.write_dataset(bundle["dataset"], data_dir)
    (art / "cluster_model.json").write_text(
        clustering.cluster_model_to_json(bundle["cluster_model"]))
    (art / "classifier.json").write_text(model_to_json(bundle["classifier"]))
    (art / "income_model.json").write_text(income_model_to_json(bundle["income_model"]))
    (art / "forecast.json").write_text(forecast_to_json(bundle["forecasts"]))
    forecast_to_csv(bundle["forecasts"], art / "forecast.csv")
    write_default_policy(art / "policy.json")
    return root


@pytest.fixture(scope="session")
def policy_ctx(workspace, bundle):
    policy = load_policy(workspace / "artifacts" / "policy.json")
    return context_from_dataset(policy, bundle["dataset"])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One line per acceptance criterion at the end of the run."""
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
