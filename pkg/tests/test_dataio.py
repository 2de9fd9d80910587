import csv
import dataclasses

import pytest

from taxfund.dataio import DatasetLoadError, complete_series, load_dataset, validate_dataset, write_dataset
from taxfund.types import AssessmentSeries, SERIES_YEARS


@pytest.fixture()
def small_paths(tmp_path, small_dataset):
    return write_dataset(small_dataset, tmp_path)


def test_round_trip_is_identity(tmp_path, small_dataset):
    paths = write_dataset(small_dataset, tmp_path)
    loaded = load_dataset(paths)
    assert loaded == small_dataset


def test_missing_file_lists_locator(tmp_path, small_dataset):
    paths = write_dataset(small_dataset, tmp_path)
    paths.rents.unlink()
    with pytest.raises(DatasetLoadError) as err:
        load_dataset(paths)
    assert any(i.rule == "missing-file" and i.file == "rents.csv" for i in err.value.issues)


def test_malformed_header_rejected(tmp_path, small_dataset):
    paths = write_dataset(small_dataset, tmp_path)
    content = paths.liens.read_text().splitlines()
    content[0] = "parcel,lien"
    paths.liens.write_text("\n".join(content) + "\n")
    with pytest.raises(DatasetLoadError) as err:
        load_dataset(paths)
    assert any(i.rule == "malformed-header" for i in err.value.issues)


def test_unknown_parcel_reference_is_hard_error(tmp_path, small_dataset):
    paths = write_dataset(small_dataset, tmp_path)
    with open(paths.rents, "a", newline="") as fh:
        csv.writer(fh).writerow(["GHOST", "815.0"])
    with pytest.raises(DatasetLoadError) as err:
        load_dataset(paths)
    issues = [i for i in err.value.issues if i.rule == "unknown-parcel"]
    assert issues and "GHOST" in issues[0].message


def test_bad_cell_collected_with_locator(tmp_path, small_dataset):
    paths = write_dataset(small_dataset, tmp_path)
    with open(paths.assessments, "a", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([small_dataset.parcels[0].parcel_id, "not-a-year", "100"])
    with pytest.raises(DatasetLoadError) as err:
        load_dataset(paths)
    assert any(i.rule == "type-error" and i.file == "assessments.csv" for i in err.value.issues)


def test_2009_row_warned_but_retained(tmp_path, small_dataset):
    paths = write_dataset(small_dataset, tmp_path)
    pid = small_dataset.parcels[0].parcel_id
    with open(paths.assessments, "a", newline="") as fh:
        csv.writer(fh).writerow([pid, "2009", "123456.0"])
    loaded = load_dataset(paths)
    assert any("2009" in w for w in loaded.warnings)
    series = loaded.assessments_by_id()[pid]
    assert series.value(2009) == 123456.0


def test_validate_clean_dataset(small_dataset):
    report = validate_dataset(small_dataset)
    assert report.accepted
    counts = dict(report.counts)
    assert counts["parcels.csv"] == len(small_dataset.parcels)
    assert counts["cex.csv"] == len(small_dataset.cex)


def test_validate_bedrooms_exceed_rooms(small_dataset):
    bad = dataclasses.replace(small_dataset.parcels[0], bedrooms=5, rooms=3)
    dataset = dataclasses.replace(small_dataset, parcels=(bad,) + small_dataset.parcels[1:])
    report = validate_dataset(dataset)
    assert any(i.rule == "bedrooms-exceed-rooms" for i in report.errors)
    assert not report.accepted


def test_validate_incomplete_series_warned(small_dataset):
    pid = small_dataset.parcels[0].parcel_id
    short = AssessmentSeries(pid, tuple((y, 100.0) for y in SERIES_YEARS[:6]))
    dataset = dataclasses.replace(small_dataset, assessments=(short,))
    report = validate_dataset(dataset)
    assert any(i.rule == "incomplete-series" for i in report.warnings)


def test_error_count_invariant_under_reordering(small_dataset):
    bad1 = dataclasses.replace(small_dataset.parcels[0], bedrooms=9, rooms=2)
    bad2 = dataclasses.replace(small_dataset.parcels[1], year_built=2099)
    rest = small_dataset.parcels[2:]
    forward = dataclasses.replace(small_dataset, parcels=(bad1, bad2) + rest)
    backward = dataclasses.replace(small_dataset, parcels=rest + (bad2, bad1))
    assert len(validate_dataset(forward).errors) == len(validate_dataset(backward).errors)


def test_complete_series_subset_and_idempotent(small_dataset):
    out = complete_series(small_dataset)
    ids = {s.parcel_id for s in small_dataset.assessments}
    assert all(s.parcel_id in ids for s in out)
    again = dataclasses.replace(small_dataset, assessments=tuple(out))
    assert complete_series(again) == out


def test_complete_series_excludes_gaps_and_zeros(small_dataset):
    good = tuple((y, 100.0) for y in SERIES_YEARS)
    rows = (
        AssessmentSeries("A", good),
        AssessmentSeries("B", tuple((y, v) for y, v in good if y != 2011)),
        AssessmentSeries("C", tuple((y, 0.0 if y == 2007 else v) for y, v in good)),
    )
    dataset = dataclasses.replace(small_dataset, assessments=rows)
    assert [s.parcel_id for s in complete_series(dataset)] == ["A"]
