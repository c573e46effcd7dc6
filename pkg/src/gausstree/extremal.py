"""Extremal tree structures for the approximate error exponent.

Constructions (star, chain, hybrid), brute-force checks over all labelled
trees via Pruefer sequences, and the leaf-attachment rules for growing a tree.

The approximate exponent of a tree only depends on which edges are adjacent,
so for a fixed tree the minimum over line-graph edges of a precomputed weight
matrix ``W`` gives the exponent of every placement of ``rho`` at once.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .approx_rate import RHO_CRIT, edge_weight_matrix
from .errors import CorrelationTooLarge, NodeOutOfRange, OddDimension
from .exponent import approx_exponent_linear
from .model import GaussianTreeModel, TreeStructure, build_model, canonical_edge, marginalize

MAX_ENUM_D = 7
SUBTREE_TOL = 1e-12


# --- constructions --------------------------------------------------------------


def _check_rho_count(d: int, rho: Sequence[float]) -> list[float]:
    rho = [float(r) for r in rho]
    if d < 2:
        raise NodeOutOfRange(f"need d >= 2, got {d}")
    if len(rho) != d - 1:
        raise ValueError(f"expected {d - 1} correlations for d={d}, got {len(rho)}")
    return rho


def star_structure(d: int) -> TreeStructure:
    return TreeStructure(d, [(1, j) for j in range(2, d + 1)])


def chain_structure(d: int) -> TreeStructure:
    return TreeStructure(d, [(i, i + 1) for i in range(1, d)])


def make_star(d: int, rho: Sequence[float]) -> GaussianTreeModel:
    """Star centred on node 1; edge ``(1, j)`` carries ``rho[j - 2]``."""
    if d < 3:
        raise NodeOutOfRange(f"a star needs d >= 3, got {d}")
    rho = _check_rho_count(d, rho)
    return build_model(star_structure(d), {(1, j): rho[j - 2] for j in range(2, d + 1)})


def make_chain(d: int, rho: Sequence[float], sort: bool = False) -> GaussianTreeModel:
    """Chain ``1 - 2 - ... - d``; edge ``(i, i+1)`` carries ``rho[i - 1]``.

    With ``sort=True`` the correlations are first ordered by decreasing
    magnitude, which is the placement that maximises the approximate exponent
    when every magnitude is below ``RHO_CRIT``.
    """
    rho = _check_rho_count(d, rho)
    if sort:
        rho = sorted(rho, key=abs, reverse=True)
    return build_model(chain_structure(d), {(i, i + 1): rho[i - 1] for i in range(1, d)})


def make_hybrid(d: int) -> TreeStructure:
    """Chain on ``1..d/2`` with nodes ``d/2+1..d`` hung as leaves on node ``d/2``."""
    if d % 2:
        raise OddDimension(f"hybrid needs an even d, got {d}")
    if d < 6:
        raise NodeOutOfRange(f"hybrid needs d >= 6, got {d}")
    h = d // 2
    edges = [(i, i + 1) for i in range(1, h)] + [(h, j) for j in range(h + 1, d + 1)]
    return TreeStructure(d, edges)


def place_correlations(tree: TreeStructure, rho: Sequence[float]) -> GaussianTreeModel:
    """Assign ``rho[k]`` to the ``k``-th edge in the tree's sorted edge order."""
    rho = _check_rho_count(tree.d, rho)
    return build_model(tree, dict(zip(tree.edges, rho)))


# --- enumeration ---------------------------------------------------------------


def pruefer_to_edges(seq: Sequence[int], d: int) -> list[tuple[int, int]]:
    """Decode a Pruefer sequence over labels ``1..d`` into a sorted edge list."""
    degree = [1] * (d + 1)
    for v in seq:
        degree[v] += 1
    leaves = [v for v in range(1, d + 1) if degree[v] == 1]
    heapq.heapify(leaves)
    edges = []
    for v in seq:
        leaf = heapq.heappop(leaves)
        edges.append(canonical_edge(leaf, v))
        degree[v] -= 1
        if degree[v] == 1:
            heapq.heappush(leaves, v)
    u, w = heapq.heappop(leaves), heapq.heappop(leaves)
    edges.append(canonical_edge(u, w))
    return sorted(edges)


@dataclass(frozen=True)
class TreeEnumeration:
    """All ``d^(d-2)`` labelled trees on ``d`` nodes, in Pruefer order."""

    d: int
    allow_large: bool = False

    def __post_init__(self):
        if self.d < 2:
            raise NodeOutOfRange(f"need d >= 2, got {self.d}")
        cap = MAX_ENUM_D + 1 if self.allow_large else MAX_ENUM_D
        if self.d > cap:
            raise ValueError(f"enumeration capped at d={cap}; got d={self.d}")

    def __len__(self) -> int:
        return self.d ** (self.d - 2)

    def __iter__(self) -> Iterator[TreeStructure]:
        for seq in itertools.product(range(1, self.d + 1), repeat=self.d - 2):
            yield TreeStructure(self.d, pruefer_to_edges(seq, self.d))


def adjacent_edge_index_pairs(tree: TreeStructure) -> tuple[np.ndarray, np.ndarray]:
    """Index pairs (into ``tree.edges``) of edges sharing a node: the line-graph edges."""
    idx = tree.edge_index
    I, J = [], []
    for v in range(1, tree.d + 1):
        inc = [idx[canonical_edge(v, u)] for u in tree.adjacency[v]]
        for a, b in itertools.combinations(inc, 2):
            I.append(a)
            J.append(b)
    return np.asarray(I, dtype=np.intp), np.asarray(J, dtype=np.intp)


def placement_exponents(tree: TreeStructure, W: np.ndarray, perms: np.ndarray) -> np.ndarray:
    """Approximate exponent of ``tree`` for each placement row of ``perms``.

    Row ``p`` puts correlation ``perms[p, k]`` (an index into the weight
    matrix ``W``) on edge ``tree.edges[k]``.
    """
    I, J = adjacent_edge_index_pairs(tree)
    if I.size == 0:
        return np.full(perms.shape[0], np.inf)
    return W[perms[:, I], perms[:, J]].min(axis=1)


@dataclass
class ExtremalReport:
    d: int
    rho: list[float]
    n_trees: int
    n_placements: int
    star_value: float
    chain_value: float
    global_min: float
    global_max: float
    min_tree: list
    max_tree: list
    chain_claim_applies: bool
    star_counterexamples: list = field(default_factory=list)
    chain_counterexamples: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.star_counterexamples and not (self.chain_claim_applies and self.chain_counterexamples)

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "rho": self.rho,
            "n_trees": self.n_trees,
            "n_placements": self.n_placements,
            "star_value": self.star_value,
            "chain_value": self.chain_value,
            "global_min": self.global_min,
            "global_max": self.global_max,
            "min_tree": self.min_tree,
            "max_tree": self.max_tree,
            "chain_claim_applies": self.chain_claim_applies,
            "star_counterexamples": self.star_counterexamples,
            "chain_counterexamples": self.chain_counterexamples,
            "ok": self.ok,
        }


def _placements(k: int, max_perms: int, rng: np.random.Generator) -> np.ndarray:
    if math.factorial(k) <= max_perms:
        return np.array(list(itertools.permutations(range(k))), dtype=np.intp)
    return np.array([rng.permutation(k) for _ in range(max_perms)], dtype=np.intp)


def verify_extremal(
    d: int,
    rho: Sequence[float],
    max_perms: int = 200,
    seed: int = 0,
    allow_large: bool = False,
    tol: float = 1e-12,
    max_examples: int = 10,
) -> ExtremalReport:
    """Scan every labelled tree and many placements of ``rho``.

    Confirms that the star attains the global minimum of the approximate
    exponent and, when all magnitudes are below ``RHO_CRIT``, that the chain
    with decreasing magnitudes attains the global maximum. All placements are
    tried when ``(d-1)! <= max_perms``; otherwise ``max_perms`` are sampled.

    Returns
    -------
    ExtremalReport
        Counterexamples are listed as ``{"edges", "rho", "value"}`` records.
    """
    rho = _check_rho_count(d, rho)
    if d < 3:
        raise NodeOutOfRange("extremal scan needs d >= 3")
    trees = TreeEnumeration(d, allow_large=allow_large)
    rho_arr = np.asarray(rho)
    W = edge_weight_matrix(rho_arr)
    perms = _placements(d - 1, max_perms, np.random.default_rng(seed))

    star_value = approx_exponent_linear(make_star(d, rho)).value
    chain_value = approx_exponent_linear(make_chain(d, rho, sort=True)).value
    chain_applies = bool(np.all(np.abs(rho_arr) < RHO_CRIT))
    star_tol = tol * max(1.0, abs(star_value))
    chain_tol = tol * max(1.0, abs(chain_value))

    gmin, gmax = math.inf, -math.inf
    min_tree = max_tree = None
    star_bad, chain_bad = [], []
    for tree in trees:
        vals = placement_exponents(tree, W, perms)
        lo, hi = int(np.argmin(vals)), int(np.argmax(vals))
        if vals[lo] < gmin:
            gmin, min_tree = float(vals[lo]), _record(tree, rho_arr, perms[lo], vals[lo])
        if vals[hi] > gmax:
            gmax, max_tree = float(vals[hi]), _record(tree, rho_arr, perms[hi], vals[hi])
        if vals[lo] < star_value - star_tol and len(star_bad) < max_examples:
            star_bad.append(_record(tree, rho_arr, perms[lo], vals[lo]))
        if vals[hi] > chain_value + chain_tol and len(chain_bad) < max_examples:
            chain_bad.append(_record(tree, rho_arr, perms[hi], vals[hi]))

    return ExtremalReport(
        d=d,
        rho=rho,
        n_trees=len(trees),
        n_placements=len(perms),
        star_value=star_value,
        chain_value=chain_value,
        global_min=gmin,
        global_max=gmax,
        min_tree=min_tree,
        max_tree=max_tree,
        chain_claim_applies=chain_applies,
        star_counterexamples=star_bad,
        chain_counterexamples=chain_bad,
    )


def _record(tree: TreeStructure, rho: np.ndarray, perm: np.ndarray, value: float) -> dict:
    return {
        "edges": [list(e) for e in tree.edges],
        "rho": [float(rho[k]) for k in perm],
        "value": float(value),
    }


# --- growing and shrinking ---------------------------------------------------------


def _max_incident(model: GaussianTreeModel) -> dict[int, float]:
    return {
        v: max(abs(model.corr[canonical_edge(v, u)]) for u in model.tree.adjacency[v])
        for v in range(1, model.d + 1)
    }


def _check_new_rho(model: GaussianTreeModel, rho_new: float) -> None:
    weakest = min(abs(r) for r in model.corr.values())
    if not abs(rho_new) < weakest:
        raise CorrelationTooLarge(f"|rho_new|={abs(rho_new)} is not below the weakest edge magnitude {weakest}")


def attach_edge(model: GaussianTreeModel, rho_new: float, vertex: int, check: bool = True) -> GaussianTreeModel:
    """Hang a new leaf ``d+1`` on ``vertex`` with correlation ``rho_new``.

    ``check`` enforces ``|rho_new| < min |rho_e|``, the hypothesis under
    which :func:`best_attachment` and :func:`worst_attachment` are optimal.
    """
    if not 1 <= vertex <= model.d:
        raise NodeOutOfRange(f"vertex {vertex} outside 1..{model.d}")
    if check:
        _check_new_rho(model, rho_new)
    new = model.d + 1
    tree = TreeStructure(new, list(model.edges) + [(vertex, new)])
    corr = dict(model.corr)
    corr[(vertex, new)] = rho_new
    return build_model(tree, corr)


def best_attachment(model: GaussianTreeModel, rho_new: float) -> int:
    """Vertex whose strongest incident edge is weakest; ties go to the smallest label."""
    _check_new_rho(model, rho_new)
    m = _max_incident(model)
    return min(m, key=lambda v: (m[v], v))


def worst_attachment(model: GaussianTreeModel, rho_new: float) -> int:
    """Vertex whose strongest incident edge is strongest; ties go to the smallest label."""
    _check_new_rho(model, rho_new)
    m = _max_incident(model)
    return min(m, key=lambda v: (-m[v], v))


def attachment_scan(model: GaussianTreeModel, rho_new: float) -> dict[int, float]:
    """Approximate exponent after attaching at each vertex."""
    return {v: approx_exponent_linear(attach_edge(model, rho_new, v)).value for v in range(1, model.d + 1)}


def removable_leaves(model: GaussianTreeModel) -> list[int]:
    return [v for v in range(1, model.d + 1) if model.tree.degree(v) == 1]


def subtree_exponent_check(model: GaussianTreeModel, keep, tol: float = SUBTREE_TOL) -> bool:
    """True iff the marginal tree on ``keep`` has approximate exponent at least that of ``model``.

    The guarantee holds when the kept edge correlations are a subset of the
    original ones, i.e. when only leaves are peeled off. Contracting a
    degree-2 node creates a weaker product edge and can lower the exponent.
    """
    keep = sorted(set(int(v) for v in keep))
    base = approx_exponent_linear(model).value
    if len(keep) == model.d:
        return True
    sub = marginalize(model, keep)
    value = approx_exponent_linear(sub).value
    if math.isinf(base):
        return math.isinf(value)
    return value >= base - tol


__all__ = [
    "TreeEnumeration",
    "ExtremalReport",
    "make_star",
    "make_chain",
    "make_hybrid",
    "star_structure",
    "chain_structure",
    "place_correlations",
    "pruefer_to_edges",
    "adjacent_edge_index_pairs",
    "placement_exponents",
    "verify_extremal",
    "attach_edge",
    "best_attachment",
    "worst_attachment",
    "attachment_scan",
    "removable_leaves",
    "subtree_exponent_check",
]
