"""Iterative random-forest imputation of missing matrix cells.

Missing cells start at their column mean; columns are then revisited in
ascending order of missingness, each re-fit with a regression forest on
all other columns, until the relative change of the imputed cells drops
below tolerance or the iteration cap is reached. Observed cells are
never modified.
"""

from __future__ import annotations

import numpy as np

from .forest import DesignMatrix, ForestParams, Task, train_forest


def impute(matrix: DesignMatrix, params: ForestParams | None = None,
           max_iters: int = 10, tol: float = 1e-3) -> DesignMatrix:
    params = params or ForestParams(n_trees=30)
    X = matrix.X
    missing = np.isnan(X)
    if not missing.any():
        return DesignMatrix(columns=list(matrix.columns), X=X.copy(),
                            y=None if matrix.y is None else matrix.y.copy(),
                            task=matrix.task)
    if missing.all(axis=0).any():
        bad = [matrix.columns[j] for j in np.nonzero(missing.all(axis=0))[0]]
        raise ValueError(f"columns with no observed value: {bad}")

    work = X.copy()
    col_means = np.nanmean(X, axis=0)
    for j in range(X.shape[1]):
        work[missing[:, j], j] = col_means[j]

    miss_counts = missing.sum(axis=0)
    incomplete = [j for j in np.argsort(miss_counts, kind="stable") if miss_counts[j] > 0]

    for it in range(max_iters):
        previous = work[missing].copy()
        for j in incomplete:
            rows_obs = ~missing[:, j]
            rows_mis = missing[:, j]
            other = [c for c in range(X.shape[1]) if c != j]
            seed = int(np.random.SeedSequence((params.seed, it, j)).generate_state(1)[0])
            sub = DesignMatrix(
                columns=[matrix.columns[c] for c in other],
                X=work[np.ix_(np.nonzero(rows_obs)[0], other)],
                y=X[rows_obs, j],
                task=Task.REGRESSION,
            )
            model = train_forest(sub, ForestParams(
                n_trees=params.n_trees, max_depth=params.max_depth,
                min_leaf=params.min_leaf, features_per_split=params.features_per_split,
                seed=seed))
            work[rows_mis, j] = model.predict_batch(work[np.ix_(np.nonzero(rows_mis)[0], other)])
        current = work[missing]
        denom = float(np.sqrt((current ** 2).sum()))
        change = float(np.sqrt(((current - previous) ** 2).sum()))
        if denom == 0.0 or change / denom < tol:
            break

    # Observed cells are restored bit-exact from the input.
    work[~missing] = X[~missing]
    return DesignMatrix(columns=list(matrix.columns), X=work,
                        y=None if matrix.y is None else matrix.y.copy(),
                        task=matrix.task)
