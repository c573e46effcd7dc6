"""Chow-Liu structure estimate: maximum-weight spanning tree of pairwise MI."""

from __future__ import annotations

import numpy as np

from .empirical import EmpiricalMoments
from .errors import DegenerateVariance, DimensionMismatch
from .model import TreeStructure


class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return True


def max_weight_spanning_tree(weights: np.ndarray) -> list[tuple[int, int]]:
    """Kruskal on a dense symmetric weight matrix; 0-based edges ``(i, j)``, ``i < j``.

    Equal weights are broken by lexicographic edge order, so the result is
    deterministic for exact (population) inputs.
    """
    d = weights.shape[0]
    iu, ju = np.triu_indices(d, k=1)
    w = weights[iu, ju]
    # lexsort: last key is primary -> descending weight, then i, then j
    order = np.lexsort((ju, iu, -w))
    uf = UnionFind(d)
    tree = []
    for k in order:
        i, j = int(iu[k]), int(ju[k])
        if uf.union(i, j):
            tree.append((i, j))
            if len(tree) == d - 1:
                break
    return tree


def squared_correlations(sigma_hat: np.ndarray) -> np.ndarray:
    diag = np.diag(sigma_hat)
    if np.any(diag <= 0):
        raise DegenerateVariance("empirical variance is zero for some node")
    return sigma_hat**2 / np.outer(diag, diag)


def learn_structure(moments: EmpiricalMoments | np.ndarray) -> TreeStructure:
    """Chow-Liu tree for an empirical (or population) covariance.

    Mutual information ``-1/2 log(1 - rho^2)`` is increasing in ``rho^2``, so
    ``rho^2`` is used as the edge weight; the spanning tree is the same.
    """
    sigma_hat = moments.sigma_hat if isinstance(moments, EmpiricalMoments) else np.asarray(moments, dtype=float)
    d = sigma_hat.shape[0]
    if d < 2:
        raise DimensionMismatch("need at least two variables")
    edges = max_weight_spanning_tree(squared_correlations(sigma_hat))
    return TreeStructure(d, [(i + 1, j + 1) for i, j in edges])


def structures_equal(a: TreeStructure, b: TreeStructure) -> bool:
    """True iff the edge sets coincide (labelled equality, not isomorphism)."""
    if a.d != b.d:
        raise DimensionMismatch(f"trees on {a.d} and {b.d} nodes")
    return a.edges == b.edges
