import itertools
import math

import numpy as np
import pytest

from conftest import random_model, random_tree_edges
from gausstree.approx_rate import RHO_CRIT, edge_weight_matrix
from gausstree.errors import CorrelationTooLarge, NodeOutOfRange, OddDimension
from gausstree.exponent import approx_exponent_full, approx_exponent_linear
from gausstree.extremal import (
    TreeEnumeration,
    attach_edge,
    attachment_scan,
    best_attachment,
    chain_structure,
    make_chain,
    make_hybrid,
    make_star,
    place_correlations,
    placement_exponents,
    pruefer_to_edges,
    removable_leaves,
    subtree_exponent_check,
    verify_extremal,
    worst_attachment,
)
from gausstree.model import TreeStructure, build_model, marginalize


class TestConstructions:
    def test_star_covariance(self):
        m = make_star(4, [0.5, 0.4, 0.3])
        S = m.covariance
        np.testing.assert_allclose([S[1, 2], S[1, 3], S[2, 3]], [0.20, 0.15, 0.12])

    def test_chain_covariance(self):
        m = make_chain(4, [0.5, 0.4, 0.3])
        assert m.covariance[0, 3] == pytest.approx(0.06)

    def test_chain_sort(self):
        m = make_chain(4, [0.3, -0.6, 0.4], sort=True)
        np.testing.assert_allclose([m.corr[(1, 2)], m.corr[(2, 3)], m.corr[(3, 4)]], [-0.6, 0.4, 0.3])

    def test_hybrid(self):
        t = make_hybrid(10)
        assert list(t.edges) == [(1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (5, 7), (5, 8), (5, 9), (5, 10)]
        assert t.diameter() == 5
        with pytest.raises(OddDimension):
            make_hybrid(7)
        with pytest.raises(NodeOutOfRange):
            make_hybrid(4)

    def test_wrong_count(self):
        with pytest.raises(ValueError):
            make_star(4, [0.5, 0.4])


class TestEnumeration:
    @pytest.mark.parametrize("d,count", [(2, 1), (3, 3), (4, 16), (5, 125), (6, 1296)])
    def test_cayley_counts(self, d, count):
        trees = list(TreeEnumeration(d))
        assert len(trees) == count
        assert len({tuple(t.edges) for t in trees}) == count

    def test_known_decoding(self):
        assert pruefer_to_edges([4, 4, 4, 5], 6) == [(1, 4), (2, 4), (3, 4), (4, 5), (5, 6)]

    def test_cap(self):
        with pytest.raises(ValueError):
            TreeEnumeration(8)
        assert len(TreeEnumeration(8, allow_large=True)) == 8**6


class TestPlacementExponents:
    def test_matches_model_exponent(self, rng):
        rho = rng.uniform(0.1, 0.9, 4) * rng.choice([-1, 1], 4)
        W = edge_weight_matrix(rho)
        perms = np.array(list(itertools.permutations(range(4))))
        for tree in list(TreeEnumeration(5))[::17]:
            vals = placement_exponents(tree, W, perms)
            for k in (0, 7, 23):
                model = place_correlations(tree, rho[perms[k]])
                assert vals[k] == pytest.approx(approx_exponent_full(model).value, rel=1e-12)


class TestVerifyExtremal:
    def test_small_example(self):
        rep = verify_extremal(5, [0.6, 0.5, 0.4, 0.2])
        assert rep.n_trees == 125 and rep.n_placements == 24
        assert rep.ok and rep.chain_claim_applies
        assert rep.global_min == pytest.approx(rep.star_value)
        assert rep.global_max == pytest.approx(rep.chain_value)

    def test_random_d6(self, rng):
        for _ in range(3):
            rho = rng.uniform(0.05, RHO_CRIT - 0.01, 5)
            rep = verify_extremal(6, rho, max_perms=30, seed=int(rng.integers(1000)))
            assert rep.ok, rep.to_dict()

    def test_star_minimal_with_large_rho(self):
        rep = verify_extremal(5, [0.95, 0.9, 0.8, 0.3])
        assert not rep.chain_claim_applies
        assert not rep.star_counterexamples

    def test_star_exponent_shortcut(self, rng):
        # below rho_crit the star minimum lies in the weakest edge's row of W
        for _ in range(200):
            rho = rng.uniform(0.02, RHO_CRIT, int(rng.integers(3, 9)))
            W = edge_weight_matrix(rho)
            np.fill_diagonal(W, np.inf)
            star = approx_exponent_linear(make_star(len(rho) + 1, rho)).value
            assert star == pytest.approx(W[np.argmin(rho)].min(), rel=1e-12)


class TestAttachment:
    def setup_method(self):
        # max incident magnitudes: node 1 .8, node 2 .8, node 3 .6, node 4 .5
        self.model = make_chain(4, [0.8, 0.6, 0.5])

    def test_best_and_worst(self):
        assert best_attachment(self.model, 0.3) == 4
        assert worst_attachment(self.model, 0.3) == 1

    def test_matches_scan(self, rng):
        for _ in range(50):
            d = int(rng.integers(3, 11))
            model = random_model(rng, d, lo=0.2, hi=0.9)
            rho_new = min(abs(r) for r in model.corr.values()) * rng.uniform(0.1, 0.95)
            scan = attachment_scan(model, rho_new)
            best, worst = best_attachment(model, rho_new), worst_attachment(model, rho_new)
            assert scan[best] == pytest.approx(max(scan.values()), rel=1e-10, abs=1e-15)
            assert scan[worst] == pytest.approx(min(scan.values()), rel=1e-10, abs=1e-15)

    def test_too_large(self):
        with pytest.raises(CorrelationTooLarge):
            best_attachment(self.model, 0.55)
        assert attach_edge(self.model, 0.9, 2, check=False).d == 5


class TestSubtree:
    def test_leaf_removal(self, rng):
        for _ in range(100):
            model = random_model(rng, int(rng.integers(4, 9)))
            leaves = removable_leaves(model)
            keep = [v for v in range(1, model.d + 1) if v != leaves[0]]
            assert subtree_exponent_check(model, keep)
            assert approx_exponent_linear(marginalize(model, keep)).value >= approx_exponent_linear(model).value

    def test_keep_all(self):
        m = make_chain(4, [0.5, 0.4, 0.3])
        assert subtree_exponent_check(m, [1, 2, 3, 4])

    def test_degree_two_contraction_can_lower(self):
        m = make_chain(4, [0.5, 0.5, 0.5])
        sub = marginalize(m, [1, 3, 4])
        assert approx_exponent_linear(m).value == pytest.approx(0.01522, abs=1e-5)
        assert approx_exponent_linear(sub).value == pytest.approx(0.00532, abs=1e-5)
        assert not subtree_exponent_check(m, [1, 3, 4])
