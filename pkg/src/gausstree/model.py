"""Tree-structured Gaussian models with unit variances.

Nodes are labelled ``1..d``. An edge is a tuple ``(i, j)`` with ``i < j``.
A model is fully described by its tree and one correlation per edge; the
covariance of any pair is the product of the edge correlations along the
unique path joining them.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from .errors import (
    CorrelationOutOfRange,
    InvalidCorrelation,
    NodeOutOfRange,
    NotATree,
    NotPositiveDefinite,
    NotTreeMarginalizable,
)

Edge = tuple[int, int]
CorrelationAssignment = Mapping[Edge, float]

PD_PIVOT_TOL = 1e-12


def canonical_edge(i: int, j: int) -> Edge:
    i, j = int(i), int(j)
    if i == j:
        raise NotATree(f"self-loop at node {i}")
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class TreeStructure:
    """Undirected spanning tree on nodes ``1..d``.

    Edges are canonicalised (``i < j``) and sorted lexicographically, so two
    trees with the same edge set compare equal.
    """

    d: int
    edges: tuple[Edge, ...]

    def __init__(self, d: int, edges: Iterable[Iterable[int]]):
        d = int(d)
        canon = tuple(sorted({canonical_edge(*e) for e in edges}))
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "edges", canon)
        self._validate()

    def _validate(self) -> None:
        if self.d < 2:
            raise NotATree(f"need at least 2 nodes, got d={self.d}")
        if len(self.edges) != self.d - 1:
            raise NotATree(f"a tree on {self.d} nodes has {self.d - 1} edges, got {len(self.edges)}")
        for i, j in self.edges:
            if not (1 <= i <= self.d and 1 <= j <= self.d):
                raise NodeOutOfRange(f"edge {(i, j)} outside 1..{self.d}")
        # d-1 edges + connected => acyclic
        seen = {1}
        queue = deque([1])
        while queue:
            u = queue.popleft()
            for v in self.adjacency[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        if len(seen) != self.d:
            raise NotATree("edge set is not connected")

    @cached_property
    def adjacency(self) -> dict[int, tuple[int, ...]]:
        nbrs: dict[int, list[int]] = {v: [] for v in range(1, self.d + 1)}
        for i, j in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        return {v: tuple(sorted(ns)) for v, ns in nbrs.items()}

    @cached_property
    def edge_index(self) -> dict[Edge, int]:
        return {e: k for k, e in enumerate(self.edges)}

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def has_edge(self, i: int, j: int) -> bool:
        return canonical_edge(i, j) in self.edge_index

    def non_edges(self) -> list[Edge]:
        return [
            (i, j)
            for i in range(1, self.d + 1)
            for j in range(i + 1, self.d + 1)
            if (i, j) not in self.edge_index
        ]

    def _parents_from(self, root: int) -> dict[int, int]:
        parent = {root: 0}
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v in self.adjacency[u]:
                if v not in parent:
                    parent[v] = u
                    queue.append(v)
        return parent

    def path(self, i: int, j: int) -> list[Edge]:
        """Edges of the unique path from ``i`` to ``j``, in walking order."""
        for v in (i, j):
            if not 1 <= v <= self.d:
                raise NodeOutOfRange(f"node {v} outside 1..{self.d}")
        if i == j:
            return []
        parent = self._parents_from(j)
        out = []
        u = i
        while u != j:
            out.append(canonical_edge(u, parent[u]))
            u = parent[u]
        return out

    def distances(self) -> np.ndarray:
        dist = np.zeros((self.d, self.d), dtype=int)
        for r in range(1, self.d + 1):
            parent = self._parents_from(r)
            # BFS order: parents are assigned before children
            for v in parent:
                if v != r:
                    dist[r - 1, v - 1] = dist[r - 1, parent[v] - 1] + 1
        return dist

    def diameter(self) -> int:
        return int(self.distances().max())

    def to_dict(self) -> dict:
        return {"d": self.d, "edges": [list(e) for e in self.edges]}


@dataclass(frozen=True)
class GaussianTreeModel:
    """Zero-mean, unit-variance Gaussian that is Markov on ``tree``."""

    tree: TreeStructure
    corr: dict[Edge, float]
    covariance: np.ndarray = field(repr=False, compare=False)

    @property
    def d(self) -> int:
        return self.tree.d

    @property
    def edges(self) -> tuple[Edge, ...]:
        return self.tree.edges

    def rho(self, i: int, j: int) -> float:
        """Correlation of any node pair (edge or not)."""
        return float(self.covariance[i - 1, j - 1])

    def edge_correlations(self) -> np.ndarray:
        """Correlations in the tree's canonical edge order."""
        return np.array([self.corr[e] for e in self.tree.edges])

    def path(self, i: int, j: int) -> list[Edge]:
        return self.tree.path(i, j)

    def to_dict(self) -> dict:
        return {"d": self.d, "edges": [[i, j, self.corr[(i, j)]] for i, j in self.tree.edges]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _check_rho(rho: float, edge) -> float:
    rho = float(rho)
    if not math.isfinite(rho) or abs(rho) >= 1.0 or rho == 0.0:
        raise InvalidCorrelation(f"correlation on edge {edge} must lie in (-1, 1) \\ {{0}}, got {rho}")
    return rho


def _path_product_covariance(tree: TreeStructure, corr: Mapping[Edge, float]) -> np.ndarray:
    d = tree.d
    cov = np.eye(d)
    for r in range(1, d + 1):
        parent = tree._parents_from(r)
        for v in parent:
            if v != r:
                p = parent[v]
                cov[r - 1, v - 1] = cov[r - 1, p - 1] * corr[canonical_edge(p, v)]
    # both BFS directions produce the same product; average away the last ulp
    return 0.5 * (cov + cov.T)


def _assert_positive_definite(cov: np.ndarray) -> None:
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("covariance is not positive definite") from exc
    if np.min(np.diag(chol)) ** 2 <= PD_PIVOT_TOL:
        raise NotPositiveDefinite("covariance is numerically singular")


def build_model(tree: TreeStructure, corr: CorrelationAssignment) -> GaussianTreeModel:
    """Assemble a model and its path-product covariance.

    Raises
    ------
    InvalidCorrelation
        If a correlation is zero, non-finite or has magnitude >= 1.
    NotATree
        If the correlation keys are not exactly the tree's edges.
    """
    canon = {canonical_edge(*e): _check_rho(r, e) for e, r in corr.items()}
    if set(canon) != set(tree.edges) or len(canon) != len(corr):
        raise NotATree("correlation keys must be exactly the tree edges")
    cov = _path_product_covariance(tree, canon)
    _assert_positive_definite(cov)
    return GaussianTreeModel(tree=tree, corr=dict(sorted(canon.items())), covariance=cov)


def model_from_edges(d: int, weighted_edges: Iterable[Iterable[float]]) -> GaussianTreeModel:
    """Build from ``[[i, j, rho], ...]`` (the JSON file layout)."""
    triples = [tuple(t) for t in weighted_edges]
    for t in triples:
        if len(t) != 3:
            raise NotATree(f"expected [i, j, rho], got {list(t)}")
    tree = TreeStructure(d, [(int(i), int(j)) for i, j, _ in triples])
    return build_model(tree, {(int(i), int(j)): r for i, j, r in triples})


def model_from_dict(payload: Mapping) -> GaussianTreeModel:
    try:
        return model_from_edges(payload["d"], payload["edges"])
    except KeyError as exc:
        raise NotATree(f"model JSON missing key {exc}") from exc


def load_model(path: str | Path) -> GaussianTreeModel:
    return model_from_dict(json.loads(Path(path).read_text()))


def save_model(model: GaussianTreeModel, path: str | Path) -> None:
    Path(path).write_text(model.to_json() + "\n")


def path(model: GaussianTreeModel, pair: Edge) -> list[Edge]:
    return model.tree.path(*pair)


def mutual_information(rho: float) -> float:
    """Mutual information (nats) of a bivariate Gaussian with correlation ``rho``."""
    rho = float(rho)
    if not abs(rho) < 1.0:
        raise CorrelationOutOfRange(f"|rho| must be < 1, got {rho}")
    return -0.5 * math.log1p(-rho * rho)


class LineGraph(NamedTuple):
    """Vertices are the tree's edges; ``edges`` holds index pairs into ``vertices``."""

    vertices: tuple[Edge, ...]
    edges: tuple[tuple[int, int], ...]


def line_graph(tree: TreeStructure) -> LineGraph:
    pairs = set()
    for v in range(1, tree.d + 1):
        incident = [tree.edge_index[canonical_edge(v, u)] for u in tree.adjacency[v]]
        for a in range(len(incident)):
            for b in range(a + 1, len(incident)):
                x, y = incident[a], incident[b]
                pairs.add((min(x, y), max(x, y)))
    return LineGraph(vertices=tree.edges, edges=tuple(sorted(pairs)))


def marginalize(model: GaussianTreeModel, keep: Iterable[int]) -> GaussianTreeModel:
    """Marginal model on ``keep``, relabelled to ``1..len(keep)`` in sorted order.

    Nodes outside ``keep`` are eliminated one at a time; each must be a leaf
    (its edge is dropped) or have degree two (its two edges merge into one
    carrying the product of their correlations).
    """
    keep = sorted(set(int(v) for v in keep))
    for v in keep:
        if not 1 <= v <= model.d:
            raise NodeOutOfRange(f"node {v} outside 1..{model.d}")
    if len(keep) < 2:
        raise NotTreeMarginalizable("need at least two kept nodes")

    nbrs = {v: dict() for v in range(1, model.d + 1)}
    for (i, j), r in model.corr.items():
        nbrs[i][j] = r
        nbrs[j][i] = r
    pending = set(range(1, model.d + 1)) - set(keep)
    while pending:
        removable = sorted(v for v in pending if len(nbrs[v]) <= 2)
        if not removable:
            raise NotTreeMarginalizable(
                f"nodes {sorted(pending)} all have degree > 2; the marginal is not a tree"
            )
        v = removable[0]
        pending.discard(v)
        adj = list(nbrs.pop(v).items())
        for u, _ in adj:
            del nbrs[u][v]
        if len(adj) == 2:
            (a, ra), (b, rb) = adj
            nbrs[a][b] = ra * rb
            nbrs[b][a] = ra * rb

    relabel = {old: new for new, old in enumerate(keep, start=1)}
    corr = {}
    for i in keep:
        for j, r in nbrs[i].items():
            if i < j:
                corr[(relabel[i], relabel[j])] = r
    tree = TreeStructure(len(keep), corr.keys())
    return build_model(tree, corr)
