"""CART decision trees and random forests, regression and classification.

Self-contained on purpose: downstream stages need deterministic replay
(per-tree seeds are a pure function of the master seed and tree index),
bounded regression predictions, out-of-bag scoring, and a documented
rule for missing feature values. Split criteria are variance reduction
(regression) and Gini impurity (classification); rows whose split
feature is missing are routed to the child holding more observed
training rows, ties to the left. Split criteria are computed over
observed rows only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from math import ceil, sqrt

import numpy as np

FORMAT_VERSION = 1


class Task(str, Enum):
    REGRESSION = "regression"
    CLASSIFICATION = "classification"


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int | None = None
    min_leaf: int | None = None  # None -> 5 regression, 1 classification
    features_per_split: int | None = None  # None -> ceil(p/3) reg, ceil(sqrt(p)) cls
    seed: int = 0

    def resolved(self, task: Task, n_features: int) -> "ForestParams":
        min_leaf = self.min_leaf
        if min_leaf is None:
            min_leaf = 5 if task is Task.REGRESSION else 1
        mtry = self.features_per_split
        if mtry is None:
            mtry = ceil(n_features / 3) if task is Task.REGRESSION else ceil(sqrt(n_features))
        mtry = max(1, min(mtry, n_features))
        if self.n_trees < 1 or min_leaf < 1:
            raise ValueError("n_trees and min_leaf must be >= 1")
        return replace(self, min_leaf=min_leaf, features_per_split=mtry)


@dataclass
class DesignMatrix:
    """Rectangular numeric matrix; NaN cells are missing.

    ``task`` describes the target when one is attached: numeric target
    for regression, small-integer labels for classification.
    """

    columns: list[str]
    X: np.ndarray
    y: np.ndarray | None = None
    task: Task | None = None

    def __post_init__(self) -> None:
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim != 2 or self.X.shape[0] < 1 or self.X.shape[1] < 1:
            raise ValueError("design matrix must be 2-D with >=1 row and column")
        if len(self.columns) != self.X.shape[1]:
            raise ValueError("column name count does not match matrix width")
        if self.y is not None:
            self.y = np.asarray(self.y, dtype=float)
            if self.y.shape != (self.X.shape[0],):
                raise ValueError("target length does not match row count")

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def with_target(self, column: str, feature_columns: list[str] | None = None,
                    task: Task = Task.REGRESSION) -> "DesignMatrix":
        """Split one column out as the target."""
        if column not in self.columns:
            raise KeyError(column)
        y = self.X[:, self.columns.index(column)].copy()
        names = feature_columns if feature_columns is not None else [
            c for c in self.columns if c != column]
        idx = [self.columns.index(c) for c in names]
        return DesignMatrix(columns=list(names), X=self.X[:, idx].copy(), y=y, task=task)


@dataclass
class _Tree:
    """Flat-array binary tree. feature == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    missing_left: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray        # leaf mean (regression) or majority class index
    dist: np.ndarray | None  # per-leaf class counts (classification)

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        ptr = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[ptr] >= 0
        while active.any():
            rows = np.nonzero(active)[0]
            nodes = ptr[rows]
            feats = self.feature[nodes]
            x = X[rows, feats]
            go_left = np.where(np.isnan(x), self.missing_left[nodes], x <= self.threshold[nodes])
            ptr[rows] = np.where(go_left, self.left[nodes], self.right[nodes])
            active = self.feature[ptr] >= 0
        return self.value[ptr]


@dataclass
class ForestModel:
    task: Task
    params: ForestParams
    feature_names: list[str]
    trees: list[_Tree]
    bootstrap_indices: list[np.ndarray]
    oob_score: float
    feature_importances: np.ndarray  # impurity-based, nonnegative, sums to 1
    train_target_range: tuple[float, float]
    classes: np.ndarray | None = None
    training_accuracy: float | None = None

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != len(self.feature_names):
            raise ValueError(
                f"expected {len(self.feature_names)} features, got shape {X.shape}")
        per_tree = np.stack([t.predict_batch(X) for t in self.trees])
        if self.task is Task.REGRESSION:
            return per_tree.mean(axis=0)
        return self._majority(per_tree)

    def _majority(self, per_tree: np.ndarray) -> np.ndarray:
        n_classes = len(self.classes)
        votes = np.zeros((per_tree.shape[1], n_classes))
        for c in range(n_classes):
            votes[:, c] = (per_tree == c).sum(axis=0)
        # argmax picks the lowest class index on ties
        return self.classes[np.argmax(votes, axis=1)]


def predict(model: ForestModel, row: np.ndarray | list[float]) -> float:
    """Predict one feature vector; raises on arity mismatch."""
    row = np.asarray(row, dtype=float)
    if row.shape != (len(model.feature_names),):
        raise ValueError(
            f"expected {len(model.feature_names)} features, got {row.shape}")
    return float(model.predict_batch(row[None, :])[0])


def _leaf(nodes: dict, y: np.ndarray, rows: np.ndarray, n_classes: int | None) -> int:
    idx = len(nodes["feature"])
    nodes["feature"].append(-1)
    nodes["threshold"].append(0.0)
    nodes["missing_left"].append(True)
    nodes["left"].append(-1)
    nodes["right"].append(-1)
    if n_classes is None:
        nodes["value"].append(float(y[rows].mean()))
        nodes["dist"].append(None)
    else:
        counts = np.bincount(y[rows].astype(int), minlength=n_classes).astype(float)
        nodes["value"].append(float(np.argmax(counts)))
        nodes["dist"].append(counts)
    return idx


def _best_split_regression(x: np.ndarray, y: np.ndarray, min_leaf: int,
                           n_missing: int) -> tuple[float, float, bool] | None:
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    n = xs.size
    s1 = np.cumsum(ys)
    s2 = np.cumsum(ys * ys)
    total_sse = s2[-1] - s1[-1] ** 2 / n

    cut = np.nonzero(xs[:-1] < xs[1:])[0]  # split after position i
    if cut.size == 0:
        return None
    nl = cut + 1
    nr = n - nl
    miss_left = nl >= nr
    nl_tot = nl + n_missing * miss_left
    nr_tot = nr + n_missing * ~miss_left
    ok = (nl_tot >= min_leaf) & (nr_tot >= min_leaf)
    if not ok.any():
        return None
    cut, nl, nr, miss_left = cut[ok], nl[ok], nr[ok], miss_left[ok]
    sse = (s2[cut] - s1[cut] ** 2 / nl) + (s2[-1] - s2[cut] - (s1[-1] - s1[cut]) ** 2 / nr)
    best = int(np.argmin(sse))
    gain = float(total_sse - sse[best])
    if gain <= 0.0:
        return None
    i = cut[best]
    return (xs[i] + xs[i + 1]) / 2.0, gain, bool(miss_left[best])


def _best_split_gini(x: np.ndarray, y: np.ndarray, min_leaf: int, n_missing: int,
                     n_classes: int) -> tuple[float, float, bool] | None:
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order].astype(int)
    n = xs.size
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), ys] = 1.0
    cum = np.cumsum(onehot, axis=0)
    total = cum[-1]
    parent_cost = n * (1.0 - ((total / n) ** 2).sum())

    cut = np.nonzero(xs[:-1] < xs[1:])[0]
    if cut.size == 0:
        return None
    nl = cut + 1
    nr = n - nl
    miss_left = nl >= nr
    nl_tot = nl + n_missing * miss_left
    nr_tot = nr + n_missing * ~miss_left
    ok = (nl_tot >= min_leaf) & (nr_tot >= min_leaf)
    if not ok.any():
        return None
    cut, nl, nr, miss_left = cut[ok], nl[ok], nr[ok], miss_left[ok]
    cl = cum[cut]
    cr = total[None, :] - cl
    cost = (nl - (cl ** 2).sum(axis=1) / nl) + (nr - (cr ** 2).sum(axis=1) / nr)
    best = int(np.argmin(cost))
    gain = float(parent_cost - cost[best])
    if gain <= 1e-12:
        return None
    i = cut[best]
    return (xs[i] + xs[i + 1]) / 2.0, gain, bool(miss_left[best])


def build_tree(X: np.ndarray, y: np.ndarray, params: ForestParams, rng: np.random.Generator,
               n_classes: int | None, importances: np.ndarray | None = None) -> _Tree:
    """Grow one CART tree on (X, y); rows of X may contain NaN."""
    n_features = X.shape[1]
    nodes: dict = {k: [] for k in ("feature", "threshold", "missing_left", "left", "right", "value", "dist")}

    # (row indices, depth, parent slot) — parent slot patched after allocation.
    stack: list[tuple[np.ndarray, int, tuple[int, str] | None]] = [
        (np.arange(X.shape[0]), 0, None)]
    while stack:
        rows, depth, slot = stack.pop()
        yv = y[rows]
        pure = bool(np.all(yv == yv[0]))
        depth_capped = params.max_depth is not None and depth >= params.max_depth
        split = None
        if not pure and not depth_capped and rows.size >= 2 * params.min_leaf:
            candidates = rng.permutation(n_features)
            primary = candidates[: params.features_per_split]
            rest = candidates[params.features_per_split:]

            def try_feature(feat: int):
                x = X[rows, feat]
                observed = ~np.isnan(x)
                n_missing = int((~observed).sum())
                if observed.sum() < 2:
                    return None
                if n_classes is None:
                    return _best_split_regression(x[observed], yv[observed],
                                                  params.min_leaf, n_missing)
                return _best_split_gini(x[observed], yv[observed],
                                        params.min_leaf, n_missing, n_classes)

            # Best gain among the sampled candidates; ties keep the
            # earlier candidate so replay is exact.
            for feat in primary:
                found = try_feature(int(feat))
                if found is not None and (split is None or found[1] > split[2]):
                    split = (int(feat), found[0], found[1], found[2])
            if split is None:
                # No sampled feature was splittable: fall back to the
                # first workable remaining feature instead of stopping.
                for feat in rest:
                    found = try_feature(int(feat))
                    if found is not None:
                        split = (int(feat), found[0], found[1], found[2])
                        break
        if split is None:
            idx = _leaf(nodes, y, rows, n_classes)
        else:
            feat, threshold, gain, miss_left = split
            if importances is not None:
                importances[feat] += gain
            idx = len(nodes["feature"])
            nodes["feature"].append(feat)
            nodes["threshold"].append(float(threshold))
            nodes["missing_left"].append(miss_left)
            nodes["left"].append(-1)
            nodes["right"].append(-1)
            nodes["value"].append(0.0)
            nodes["dist"].append(None)
            x = X[rows, feat]
            go_left = np.where(np.isnan(x), miss_left, x <= threshold)
            # Right pushed first so the left child is processed (and
            # allocated) first: child ids then read in left-to-right order.
            stack.append((rows[~go_left], depth + 1, (idx, "right")))
            stack.append((rows[go_left], depth + 1, (idx, "left")))
        if slot is not None:
            parent, side = slot
            nodes[side][parent] = idx

    dist = None
    if n_classes is not None:
        dist = np.array([d if d is not None else np.zeros(n_classes) for d in nodes["dist"]])
    return _Tree(
        feature=np.array(nodes["feature"], dtype=np.int64),
        threshold=np.array(nodes["threshold"], dtype=float),
        missing_left=np.array(nodes["missing_left"], dtype=bool),
        left=np.array(nodes["left"], dtype=np.int64),
        right=np.array(nodes["right"], dtype=np.int64),
        value=np.array(nodes["value"], dtype=float),
        dist=dist,
    )


def train_forest(matrix: DesignMatrix, params: ForestParams) -> ForestModel:
    """Train a bagged CART ensemble; fully determined by (matrix, params)."""
    if matrix.y is None:
        raise ValueError("design matrix has no target column")
    if np.isnan(matrix.y).any():
        raise ValueError("target column contains missing values")
    task = matrix.task or Task.REGRESSION
    params = params.resolved(task, matrix.n_features)

    X, y_raw = matrix.X, matrix.y
    n = X.shape[0]
    if task is Task.CLASSIFICATION:
        classes = np.unique(y_raw)
        y = np.searchsorted(classes, y_raw).astype(float)
        n_classes = len(classes)
    else:
        classes = None
        y = y_raw
        n_classes = None

    trees: list[_Tree] = []
    bootstraps: list[np.ndarray] = []
    importance_acc = np.zeros(matrix.n_features)
    for t in range(params.n_trees):
        rng = np.random.default_rng([params.seed, t])
        boot = rng.integers(0, n, size=n)
        tree_imp = np.zeros(matrix.n_features)
        trees.append(build_tree(X[boot], y[boot], params, rng, n_classes, tree_imp))
        bootstraps.append(boot)
        total = tree_imp.sum()
        if total > 0:
            importance_acc += tree_imp / total
    importances = importance_acc / params.n_trees
    s = importances.sum()
    if s > 0:
        importances = importances / s

    oob = _oob_score(trees, bootstraps, X, y, task, n_classes)
    model = ForestModel(
        task=task,
        params=params,
        feature_names=list(matrix.columns),
        trees=trees,
        bootstrap_indices=bootstraps,
        oob_score=oob,
        feature_importances=np.clip(importances, 0.0, None),
        train_target_range=(float(y_raw.min()), float(y_raw.max())),
        classes=classes,
    )
    if task is Task.CLASSIFICATION:
        model.training_accuracy = float((model.predict_batch(X) == y_raw).mean())
    return model


def _oob_predictions(trees: list[_Tree], bootstraps: list[np.ndarray], X: np.ndarray,
                     task: Task, n_classes: int | None) -> tuple[np.ndarray, np.ndarray]:
    """Per-row OOB aggregate prediction and a coverage mask."""
    n = X.shape[0]
    if task is Task.REGRESSION:
        sums = np.zeros(n)
        counts = np.zeros(n)
        for tree, boot in zip(trees, bootstraps):
            oob = np.ones(n, dtype=bool)
            oob[boot] = False
            if not oob.any():
                continue
            sums[oob] += tree.predict_batch(X[oob])
            counts[oob] += 1
        covered = counts > 0
        pred = np.zeros(n)
        pred[covered] = sums[covered] / counts[covered]
        return pred, covered
    votes = np.zeros((n, n_classes))
    for tree, boot in zip(trees, bootstraps):
        oob = np.ones(n, dtype=bool)
        oob[boot] = False
        if not oob.any():
            continue
        labels = tree.predict_batch(X[oob]).astype(int)
        votes[np.nonzero(oob)[0], labels] += 1
    covered = votes.sum(axis=1) > 0
    return np.argmax(votes, axis=1).astype(float), covered


def _oob_score(trees, bootstraps, X, y, task, n_classes) -> float:
    pred, covered = _oob_predictions(trees, bootstraps, X, task, n_classes)
    if not covered.any():
        return 0.0
    if task is Task.REGRESSION:
        resid = y[covered] - pred[covered]
        ss_tot = float(((y[covered] - y[covered].mean()) ** 2).sum())
        if ss_tot == 0.0:
            return 0.0
        return 1.0 - float((resid ** 2).sum()) / ss_tot
    return float((pred[covered] == y[covered]).mean())


@dataclass(frozen=True)
class ImportanceResult:
    feature_names: tuple[str, ...]
    raw: np.ndarray      # mean (permuted error - baseline error), may be negative
    scores: np.ndarray   # raw clamped at zero, for reporting

    def ranking(self) -> list[str]:
        order = np.argsort(-self.scores, kind="stable")
        return [self.feature_names[i] for i in order]


def permutation_importance(model: ForestModel, matrix: DesignMatrix, repeats: int = 5,
                           seed: int = 0) -> ImportanceResult:
    """Per-feature OOB error increase when that feature is permuted."""
    if matrix.y is None:
        raise ValueError("design matrix has no target column")
    X, y_raw = matrix.X, matrix.y
    if model.task is Task.CLASSIFICATION:
        y = np.searchsorted(model.classes, y_raw).astype(float)
        n_classes = len(model.classes)
    else:
        y = y_raw
        n_classes = None

    def oob_error(Xv: np.ndarray) -> float:
        pred, covered = _oob_predictions(model.trees, model.bootstrap_indices, Xv,
                                         model.task, n_classes)
        if not covered.any():
            return 0.0
        if model.task is Task.REGRESSION:
            return float(((y[covered] - pred[covered]) ** 2).mean())
        return float((pred[covered] != y[covered]).mean())

    baseline = oob_error(X)
    rng = np.random.default_rng([seed])
    p = X.shape[1]
    deltas = np.zeros((repeats, p))
    for r in range(repeats):
        for j in range(p):
            perm = rng.permutation(X.shape[0])
            Xp = X.copy()
            Xp[:, j] = X[perm, j]
            deltas[r, j] = oob_error(Xp) - baseline
    raw = deltas.mean(axis=0)
    return ImportanceResult(
        feature_names=tuple(matrix.columns),
        raw=raw,
        scores=np.clip(raw, 0.0, None),
    )


# --- serialization ----------------------------------------------------------

def _tree_to_dict(tree: _Tree) -> dict:
    d = {
        "feature": tree.feature.tolist(),
        "threshold": tree.threshold.tolist(),
        "missing_left": tree.missing_left.astype(int).tolist(),
        "left": tree.left.tolist(),
        "right": tree.right.tolist(),
        "value": tree.value.tolist(),
    }
    if tree.dist is not None:
        d["dist"] = tree.dist.tolist()
    return d


def _tree_from_dict(d: dict) -> _Tree:
    return _Tree(
        feature=np.array(d["feature"], dtype=np.int64),
        threshold=np.array(d["threshold"], dtype=float),
        missing_left=np.array(d["missing_left"], dtype=bool),
        left=np.array(d["left"], dtype=np.int64),
        right=np.array(d["right"], dtype=np.int64),
        value=np.array(d["value"], dtype=float),
        dist=np.array(d["dist"], dtype=float) if "dist" in d else None,
    )


def model_to_json(model: ForestModel) -> str:
    doc = {
        "format_version": FORMAT_VERSION,
        "task": model.task.value,
        "params": {
            "n_trees": model.params.n_trees,
            "max_depth": model.params.max_depth,
            "min_leaf": model.params.min_leaf,
            "features_per_split": model.params.features_per_split,
            "seed": model.params.seed,
        },
        "feature_names": model.feature_names,
        "trees": [_tree_to_dict(t) for t in model.trees],
        "bootstrap_indices": [b.tolist() for b in model.bootstrap_indices],
        "oob_score": model.oob_score,
        "feature_importances": model.feature_importances.tolist(),
        "train_target_range": list(model.train_target_range),
        "classes": model.classes.tolist() if model.classes is not None else None,
        "training_accuracy": model.training_accuracy,
    }
    return json.dumps(doc, sort_keys=True, indent=2)


def model_from_json(text: str) -> ForestModel:
    doc = json.loads(text)
    if doc["format_version"] != FORMAT_VERSION:
        raise ValueError(f"unsupported model format {doc['format_version']}")
    return ForestModel(
        task=Task(doc["task"]),
        params=ForestParams(**doc["params"]),
        feature_names=list(doc["feature_names"]),
        trees=[_tree_from_dict(t) for t in doc["trees"]],
        bootstrap_indices=[np.array(b, dtype=np.int64) for b in doc["bootstrap_indices"]],
        oob_score=doc["oob_score"],
        feature_importances=np.array(doc["feature_importances"], dtype=float),
        train_target_range=tuple(doc["train_target_range"]),
        classes=np.array(doc["classes"]) if doc["classes"] is not None else None,
        training_accuracy=doc.get("training_accuracy"),
    )
