"""Independent oracles used by the test suite.

These deliberately recompute results from first principles (different
formulas, different code paths) so they can catch implementation bugs.
"""

from __future__ import annotations

import numpy as np


def brute_force_ward(D: np.ndarray) -> list[tuple[int, int, float, int]]:
    """Exhaustive agglomeration computing every merge cost directly from
    the original matrix.

    Cluster-pair cost uses the centroid-gap identity on squared
    dissimilarities, cost(A,B) = 2|A||B|/(|A|+|B|) * gap(A,B), rather
    than any recursive update. Ties resolve to the lexicographically
    smallest id pair; merge m creates id n+m.
    """
    n = D.shape[0]
    S = np.asarray(D, dtype=float) ** 2
    clusters: dict[int, list[int]] = {i: [i] for i in range(n)}
    merges = []
    next_id = n

    def within(members: list[int]) -> float:
        total = 0.0
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                total += S[members[a], members[b]]
        return total / (len(members) ** 2)

    def cost(A: list[int], B: list[int]) -> float:
        cross = sum(S[a, b] for a in A for b in B) / (len(A) * len(B))
        gap = cross - within(A) - within(B)
        return 2.0 * len(A) * len(B) / (len(A) + len(B)) * gap

    for _ in range(n - 1):
        best = None
        for ia in sorted(clusters):
            for ib in sorted(clusters):
                if ia >= ib:
                    continue
                c = cost(clusters[ia], clusters[ib])
                if (best is None or c < best[0] - 1e-12
                        or (abs(c - best[0]) <= 1e-12 and (ia, ib) < best[1])):
                    best = (c, (ia, ib))
        c, (ia, ib) = best
        merges.append((ia, ib, float(np.sqrt(max(c, 0.0))), next_id))
        clusters[next_id] = clusters.pop(ia) + clusters.pop(ib)
        next_id += 1
    return merges


def random_distance_matrix(rng: np.random.Generator, n: int,
                           quantize: bool = False) -> np.ndarray:
    M = rng.random((n, n))
    D = (M + M.T) / 2.0
    if quantize:
        D = np.round(D * 4) / 4
        D = (D + D.T) / 2.0
    np.fill_diagonal(D, 0.0)
    return D


def adjusted_rand_index(a, b) -> float:
    """Contingency-table ARI; independent of any clustering library."""
    a = np.asarray(a)
    b = np.asarray(b)
    ua, ia = np.unique(a, return_inverse=True)
    ub, ib = np.unique(b, return_inverse=True)
    table = np.zeros((len(ua), len(ub)), dtype=np.int64)
    for x, y in zip(ia, ib):
        table[x, y] += 1

    def comb2(x):
        return x * (x - 1) / 2.0

    sum_ij = comb2(table).sum()
    sum_a = comb2(table.sum(axis=1)).sum()
    sum_b = comb2(table.sum(axis=0)).sum()
    total = comb2(len(a))
    expected = sum_a * sum_b / total
    max_index = (sum_a + sum_b) / 2.0
    if max_index == expected:
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))
