import numpy as np
import pytest

from taxfund.forest import DesignMatrix, ForestParams
from taxfund.impute import impute


def test_complete_matrix_returned_unchanged():
    rng = np.random.default_rng(0)
    X = rng.random((50, 4))
    m = DesignMatrix(columns=list("abcd"), X=X)
    out = impute(m, ForestParams(n_trees=10, seed=0))
    assert np.array_equal(out.X, X)


def test_idempotent_on_complete():
    rng = np.random.default_rng(1)
    X = rng.random((40, 3))
    X[rng.choice(40, 8, replace=False), 1] = np.nan
    m = DesignMatrix(columns=list("abc"), X=X)
    once = impute(m, ForestParams(n_trees=10, seed=0))
    twice = impute(once, ForestParams(n_trees=10, seed=0))
    assert np.array_equal(once.X, twice.X)


def test_observed_cells_bit_exact():
    rng = np.random.default_rng(2)
    X = rng.random((80, 4)) * 100
    mask = rng.random((80, 4)) < 0.15
    mask[:, 0] = False  # keep one column fully observed
    Xm = X.copy()
    Xm[mask] = np.nan
    m = DesignMatrix(columns=list("abcd"), X=Xm)
    out = impute(m, ForestParams(n_trees=15, seed=1))
    observed = ~mask
    assert np.array_equal(out.X[observed], Xm[observed])
    assert not np.isnan(out.X).any()


def test_beats_mean_imputation_on_dependent_column():
    rng = np.random.default_rng(3)
    a = rng.random(200) * 10
    X = np.column_stack([a, 2 * a, rng.random(200)])
    idx = rng.choice(200, 40, replace=False)
    Xm = X.copy()
    Xm[idx, 1] = np.nan
    m = DesignMatrix(columns=list("abc"), X=Xm)
    out = impute(m, ForestParams(n_trees=20, seed=2))
    rmse_forest = np.sqrt(np.mean((out.X[idx, 1] - X[idx, 1]) ** 2))
    rmse_mean = np.sqrt(np.mean((np.nanmean(Xm[:, 1]) - X[idx, 1]) ** 2))
    assert rmse_forest < rmse_mean


def test_all_missing_column_rejected():
    X = np.array([[1.0, np.nan], [2.0, np.nan]])
    m = DesignMatrix(columns=["a", "b"], X=X)
    with pytest.raises(ValueError):
        impute(m, ForestParams(n_trees=5, seed=0))


def test_deterministic():
    rng = np.random.default_rng(4)
    X = rng.random((60, 3))
    X[rng.choice(60, 12, replace=False), 2] = np.nan
    m = DesignMatrix(columns=list("abc"), X=X)
    a = impute(m, ForestParams(n_trees=10, seed=5))
    b = impute(m, ForestParams(n_trees=10, seed=5))
    assert np.array_equal(a.X, b.X)
