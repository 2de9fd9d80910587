"""Assessment-history clustering.

Histories become year-over-year percent-change series on the canonical
grid, are binarized (bit = the value moved more than a threshold), and
are compared with Jaccard distance; agglomeration is Ward-style via the
Lance-Williams update on squared distances, which keeps merge heights
nondecreasing. Tie-breaks are lexicographic on cluster ids so runs
replay exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .types import AssessmentSeries, SERIES_YEARS

FORMAT_VERSION = 1

# Recession window removed before trend extraction: a step is dropped if
# either endpoint falls inside.
DEFAULT_EXCLUDED_YEARS = frozenset(range(2008, 2013))


@dataclass(frozen=True)
class Step:
    start_year: int
    end_year: int
    pct_change: float
    is_gap_interval: bool  # spans the missing 2009 observation


@dataclass(frozen=True)
class PctChangeSeries:
    parcel_id: str
    steps: tuple[Step, ...]

    def values(self) -> tuple[float, ...]:
        return tuple(s.pct_change for s in self.steps)


@dataclass(frozen=True)
class BinarySignature:
    parcel_id: str
    bits: tuple[int, ...]


def to_pct_changes(series: AssessmentSeries,
                   years: tuple[int, ...] = SERIES_YEARS) -> PctChangeSeries:
    """Percent change between consecutive grid years.

    Requires every grid year present with a positive value; observations
    outside the grid (later base-year values) are ignored.
    """
    by_year = dict(series.observations)
    missing = [y for y in years if y not in by_year]
    if missing:
        raise ValueError(f"{series.parcel_id}: missing years {missing}")
    if any(by_year[y] <= 0 for y in years):
        raise ValueError(f"{series.parcel_id}: non-positive value in grid years")
    steps = []
    for s, t in zip(years, years[1:]):
        steps.append(Step(
            start_year=s,
            end_year=t,
            pct_change=(by_year[t] - by_year[s]) / by_year[s],
            is_gap_interval=(t - s) > 1,
        ))
    return PctChangeSeries(series.parcel_id, tuple(steps))


def binarize(series: PctChangeSeries, eps: float = 0.0) -> BinarySignature:
    if eps < 0:
        raise ValueError("threshold must be nonnegative")
    return BinarySignature(
        series.parcel_id,
        tuple(1 if abs(s.pct_change) > eps else 0 for s in series.steps),
    )


def jaccard_distance(a: BinarySignature, b: BinarySignature) -> float:
    """1 - |ones(a) & ones(b)| / |ones(a) | ones(b)|; two empty sets -> 0."""
    if len(a.bits) != len(b.bits):
        raise ValueError("signature lengths differ")
    inter = sum(1 for x, y in zip(a.bits, b.bits) if x and y)
    union = sum(1 for x, y in zip(a.bits, b.bits) if x or y)
    return 0.0 if union == 0 else 1.0 - inter / union


def jaccard_matrix(signatures: list[BinarySignature]) -> np.ndarray:
    """Pairwise Jaccard distances, vectorized."""
    if not signatures:
        return np.zeros((0, 0))
    B = np.array([s.bits for s in signatures], dtype=float)
    inter = B @ B.T
    ones = B.sum(axis=1)
    union = ones[:, None] + ones[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        D = 1.0 - np.where(union > 0, inter / union, union + 1.0)
    np.fill_diagonal(D, 0.0)
    return D


@dataclass(frozen=True)
class Merge:
    node_a: int
    node_b: int
    height: float
    new_node_id: int


@dataclass(frozen=True)
class Dendrogram:
    merges: tuple[Merge, ...]
    leaf_count: int


def ward_cluster(D: np.ndarray) -> Dendrogram:
    """Agglomerate a full distance matrix with the Ward update.

    Works on squared distances; recorded heights are the square roots of
    the merge costs. Leaves are ids 0..n-1; merge m creates id n+m. Equal
    merge costs resolve to the lexicographically smallest id pair.
    """
    D = np.asarray(D, dtype=float)
    n = D.shape[0]
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValueError("distance matrix must be square")
    if n < 2:
        raise ValueError("need at least 2 leaves")
    if not np.allclose(D, D.T) or np.diag(D).any() or (D < 0).any():
        raise ValueError("matrix must be symmetric, nonnegative, zero-diagonal")

    S = D.astype(float) ** 2
    np.fill_diagonal(S, np.inf)
    active = np.ones(n, dtype=bool)
    ids = np.arange(n)
    sizes = np.ones(n, dtype=float)
    row_min = S.min(axis=1)
    row_arg = S.argmin(axis=1)

    merges: list[Merge] = []
    for step in range(n - 1):
        if step == n - 2:
            pos = np.nonzero(active)[0]
            pi, pj = int(pos[0]), int(pos[1])
            v = S[pi, pj]
        else:
            masked = np.where(active, row_min, np.inf)
            v = masked.min()
            # Every endpoint of a tied pair has row minimum v, so the
            # smallest id over those rows is the pair's first element;
            # its partner is the smallest id within that row at v.
            cand = np.nonzero(masked == v)[0]
            pi = int(cand[np.argmin(ids[cand])])
            js = np.nonzero(S[pi] == v)[0]
            pj = int(js[np.argmin(ids[js])])

        id_a, id_b = int(min(ids[pi], ids[pj])), int(max(ids[pi], ids[pj]))
        new_id = n + step
        merges.append(Merge(id_a, id_b, math.sqrt(max(v, 0.0)), new_id))

        ni, nj = sizes[pi], sizes[pj]
        s_ij = S[pi, pj]
        t = ni + nj + sizes
        updated = ((ni + sizes) * S[pi] + (nj + sizes) * S[pj] - sizes * s_ij) / t
        S[pi] = updated
        S[:, pi] = updated
        S[pi, pi] = np.inf
        S[pj, :] = np.inf
        S[:, pj] = np.inf
        active[pj] = False
        sizes[pi] = ni + nj
        ids[pi] = new_id
        row_min[pj] = np.inf

        row_min[pi] = S[pi].min()
        row_arg[pi] = S[pi].argmin()
        others = np.nonzero(active)[0]
        others = others[others != pi]
        if others.size:
            new_vals = S[others, pi]
            # <= keeps an equal new value as the witness, so merges
            # inside groups of identical rows never force rescans.
            leq = new_vals <= row_min[others]
            rows = others[leq]
            row_min[rows] = new_vals[leq]
            row_arg[rows] = pi
            rest = others[~leq]
            stale = rest[(row_arg[rest] == pi) | (row_arg[rest] == pj)]
            if stale.size:
                row_min[stale] = S[stale].min(axis=1)
                row_arg[stale] = S[stale].argmin(axis=1)
    return Dendrogram(tuple(merges), n)


def cut_tree(dendrogram: Dendrogram, k: int) -> np.ndarray:
    """Labels after undoing the last k-1 merges.

    Cluster numbering: decreasing size, ties by lowest member index.
    """
    n = dendrogram.leaf_count
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}]")
    members: dict[int, list[int]] = {i: [i] for i in range(n)}
    for merge in dendrogram.merges[: n - k]:
        merged = members.pop(merge.node_a) + members.pop(merge.node_b)
        members[merge.new_node_id] = merged
    clusters = sorted(members.values(), key=lambda m: (-len(m), min(m)))
    labels = np.empty(n, dtype=int)
    for label, member_list in enumerate(clusters):
        labels[member_list] = label
    return labels


@dataclass(frozen=True)
class ClusterModel:
    k: int
    labels: dict[str, int]
    trend: dict[int, tuple[float, ...]]  # per cluster, retained mean steps in order
    retained_intervals: tuple[tuple[int, int], ...]
    cluster_sizes: dict[int, int]
    merges: tuple[Merge, ...]
    parcel_order: tuple[str, ...]


def cluster_trends(labels: dict[str, int], pct_series: dict[str, PctChangeSeries],
                   excluded_years: frozenset[int] | set[int] = DEFAULT_EXCLUDED_YEARS,
                   ) -> tuple[dict[int, tuple[float, ...]], tuple[tuple[int, int], ...]]:
    """Mean retained percent-change step per cluster.

    A step is dropped when either endpoint year is excluded. Every
    labeled parcel needs a series with the same step structure.
    """
    some = next(iter(pct_series.values()))
    intervals = [(s.start_year, s.end_year) for s in some.steps]
    retained_idx = [i for i, (s, e) in enumerate(intervals)
                    if s not in excluded_years and e not in excluded_years]
    retained = tuple(intervals[i] for i in retained_idx)

    by_cluster: dict[int, list[list[float]]] = {}
    for pid, cluster in labels.items():
        series = pct_series.get(pid)
        if series is None:
            raise KeyError(f"no percent-change series for labeled parcel {pid}")
        if [(s.start_year, s.end_year) for s in series.steps] != intervals:
            raise ValueError(f"{pid}: step structure differs")
        values = series.values()
        by_cluster.setdefault(cluster, []).append([values[i] for i in retained_idx])

    trend: dict[int, tuple[float, ...]] = {}
    for cluster in sorted(by_cluster):
        rows = np.array(by_cluster[cluster])
        if rows.size == 0:
            raise ValueError(f"cluster {cluster} has no retained series")
        trend[cluster] = tuple(float(v) for v in rows.mean(axis=0))
    return trend, retained


def build_cluster_model(signatures: list[BinarySignature],
                        pct_series: dict[str, PctChangeSeries], k: int,
                        excluded_years: frozenset[int] | set[int] = DEFAULT_EXCLUDED_YEARS,
                        ) -> ClusterModel:
    """Distance matrix -> dendrogram -> k-cut -> per-cluster trends."""
    D = jaccard_matrix(signatures)
    dendrogram = ward_cluster(D)
    label_array = cut_tree(dendrogram, k)
    labels = {sig.parcel_id: int(label_array[i]) for i, sig in enumerate(signatures)}
    trend, retained = cluster_trends(labels, pct_series, excluded_years)
    sizes: dict[int, int] = {}
    for lab in labels.values():
        sizes[lab] = sizes.get(lab, 0) + 1
    return ClusterModel(
        k=k,
        labels=labels,
        trend=trend,
        retained_intervals=retained,
        cluster_sizes=sizes,
        merges=dendrogram.merges,
        parcel_order=tuple(s.parcel_id for s in signatures),
    )


def cluster_model_to_json(model: ClusterModel) -> str:
    doc = {
        "format_version": FORMAT_VERSION,
        "k": model.k,
        "labels": model.labels,
        "trend": {str(c): list(v) for c, v in model.trend.items()},
        "retained_intervals": [list(i) for i in model.retained_intervals],
        "cluster_sizes": {str(c): s for c, s in model.cluster_sizes.items()},
        "merges": [[m.node_a, m.node_b, m.height, m.new_node_id] for m in model.merges],
        "parcel_order": list(model.parcel_order),
    }
    return json.dumps(doc, sort_keys=True, indent=2)


def cluster_model_from_json(text: str) -> ClusterModel:
    doc = json.loads(text)
    if doc["format_version"] != FORMAT_VERSION:
        raise ValueError(f"unsupported cluster model format {doc['format_version']}")
    return ClusterModel(
        k=doc["k"],
        labels={pid: int(c) for pid, c in doc["labels"].items()},
        trend={int(c): tuple(v) for c, v in doc["trend"].items()},
        retained_intervals=tuple((s, e) for s, e in doc["retained_intervals"]),
        cluster_sizes={int(c): s for c, s in doc["cluster_sizes"].items()},
        merges=tuple(Merge(a, b, h, i) for a, b, h, i in doc["merges"]),
        parcel_order=tuple(doc["parcel_order"]),
    )
