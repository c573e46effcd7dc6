import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from gausstree.approx_rate import (
    RHO_CRIT,
    ApproxRateInputs,
    approx_rate_array,
    approx_rate_closed_form,
    approx_rate_snr,
    approx_rate_trace,
    edge_weight,
    information_density_variance,
    quadratic_form_covariance,
    rho_crit,
)
from gausstree.errors import CorrelationOutOfRange, DegenerateDenominator, NotPositiveDefinite
from gausstree.exact_rate import CrossoverProblem, crossover_problem, solve_crossover_rate
from gausstree.model import model_from_edges
from gausstree.simulate import symmetric_star_problem


def chain_problem(rho_e, rho_ep):
    m = model_from_edges(3, [(1, 2, rho_e), (2, 3, rho_ep / rho_e)])
    return crossover_problem(m, (1, 2), (1, 3))


def c3(x, y):
    return (
        3 * y**3 * x - 19 * y**2 * x - 3 * y - 2 * y**2 + 5 * y**3
        - 3 * y**2 * x**2 + 14 * x**2 * y + 3 * x + 8 * x * y - 6 * x**2
    )


class TestClosedForm:
    def test_equal_is_zero(self):
        assert approx_rate_closed_form(0.5, 0.5) == 0.0
        assert approx_rate_closed_form(0.5, -0.5) == 0.0

    def test_degenerate(self):
        with pytest.raises(DegenerateDenominator):
            approx_rate_closed_form(0.0, 0.0)

    @pytest.mark.parametrize("bad", [1.0, -1.0, 1.2])
    def test_out_of_range(self, bad):
        with pytest.raises(CorrelationOutOfRange):
            ApproxRateInputs(bad, 0.1)
        with pytest.raises(CorrelationOutOfRange):
            approx_rate_closed_form(0.3, bad)

    def test_hand_value(self):
        # A and B evaluated by hand for rho_e = 0.6, rho_ep = 0.18
        x, y = 0.18**2, 0.36
        A = (0.5 * math.log((1 - x) / (1 - y))) ** 2
        B = 2 * (x * x + x) / (1 - x) ** 2 + 2 * (y * y + y) / (1 - y) ** 2 - 4 * x * (y + 1) / ((1 - x) * (1 - y))
        assert approx_rate_closed_form(0.6, 0.18) == pytest.approx(A / B, rel=1e-14)

    def test_literal_form_off_diagonal(self, rng):
        def literal(re_, rep):
            x, y = rep * rep, re_ * re_
            A = (0.5 * math.log((1 - x) / (1 - y))) ** 2
            B = 2 * (x * x + x) / (1 - x) ** 2 + 2 * (y * y + y) / (1 - y) ** 2 - 4 * x * (y + 1) / ((1 - x) * (1 - y))
            return A / B

        for _ in range(1000):
            re_ = rng.uniform(0.02, 0.98)
            rep = re_ * rng.uniform(0.01, 0.9)
            assert approx_rate_closed_form(re_, rep) == pytest.approx(literal(re_, rep), rel=1e-9)

    def test_continuous_at_equality(self):
        for r in (0.1, 0.5, 0.9):
            near = approx_rate_closed_form(r, r * (1 - 1e-12))
            assert 0.0 <= near < 1e-10

    def test_array_matches_scalar(self, rng):
        a = rng.uniform(-0.95, 0.95, 200)
        b = a * rng.uniform(-0.99, 0.99, 200)
        expected = [approx_rate_closed_form(x, y) for x, y in zip(a, b)]
        np.testing.assert_allclose(approx_rate_array(a, b), expected, rtol=1e-13)

    @given(st.floats(0.01, 0.98), st.floats(0.01, 0.98))
    def test_even(self, a, b):
        v = approx_rate_closed_form(a, b)
        for sa in (1, -1):
            for sb in (1, -1):
                assert approx_rate_closed_form(sa * a, sb * b) == v


class TestSnrOracle:
    def test_chain_equivalence(self):
        p = chain_problem(0.6, 0.18)
        assert approx_rate_snr(p) == pytest.approx(approx_rate_closed_form(0.6, 0.18), rel=1e-10)

    def test_trace_form_matches_variance_form(self, rng):
        for _ in range(50):
            r_e = rng.uniform(0.05, 0.95)
            p = chain_problem(r_e, r_e * rng.uniform(0.05, 0.95))
            assert approx_rate_trace(p) == pytest.approx(approx_rate_snr(p), rel=1e-12)
        q = symmetric_star_problem(0.2)
        assert approx_rate_trace(q) == pytest.approx(approx_rate_snr(q), rel=1e-12)

    def test_equal_mi_zero(self):
        S = np.array([[1.0, 0.4, 0.16], [0.4, 1.0, 0.4], [0.16, 0.4, 1.0]])
        assert approx_rate_snr(CrossoverProblem(S, (0, 1), (1, 2))) == 0.0

    def test_variance_by_monte_carlo(self):
        # fourth-moment identity against a direct simulation
        S = symmetric_star_problem(0.3).sigma
        x = np.random.default_rng(0).multivariate_normal(np.zeros(4), S, size=400_000)
        from gausstree.approx_rate import _offdiag_precision

        a = _offdiag_precision(S, (0, 1))
        b = _offdiag_precision(S, (2, 3))
        mc = np.var(a * x[:, 0] * x[:, 1] - b * x[:, 2] * x[:, 3])
        assert information_density_variance(S, (0, 1), (2, 3)) == pytest.approx(mc, rel=0.02)

    def test_isserlis(self):
        # Cov(x1 x2, x3 x4) = S13 S24 + S14 S23
        S = symmetric_star_problem(0.4).sigma
        C1 = np.zeros((4, 4))
        C1[0, 1] = C1[1, 0] = 0.5
        C2 = np.zeros((4, 4))
        C2[2, 3] = C2[3, 2] = 0.5
        assert quadratic_form_covariance(S, C1, C2) == pytest.approx(S[0, 2] * S[1, 3] + S[0, 3] * S[1, 2])

    def test_star_problem_positive_and_below_exact(self):
        p = symmetric_star_problem(0.2)
        jt = approx_rate_snr(p)
        assert 0 < jt < solve_crossover_rate(p).rate

    def test_not_pd(self):
        class Fake:
            sigma = np.array([[1.0, 0.9, 0.9], [0.9, 1.0, -0.9], [0.9, -0.9, 1.0]])
            e, ep = (0, 1), (0, 2)

        with pytest.raises(NotPositiveDefinite):
            approx_rate_snr(Fake())


class TestRhoCrit:
    def test_constant(self):
        assert rho_crit() == 0.63055 == RHO_CRIT

    def test_turning_point_reproduces_constant(self):
        # smallest |rho_1| at which J~(rho_1, rho_1 rho_2) stops increasing, over rho_2
        def slope(r1, r2, h=1e-7):
            return approx_rate_closed_form(r1 + h, (r1 + h) * r2) - approx_rate_closed_form(r1 - h, (r1 - h) * r2)

        turns = [brentq(slope, 0.5, 0.95, args=(r2,), xtol=1e-12) for r2 in (1e-3, 1e-2, 0.1)]
        assert min(turns) == pytest.approx(RHO_CRIT, abs=2e-5)
        assert turns == sorted(turns)

    def test_monotone_up_to_063(self):
        g = np.arange(0.005, 0.63 + 1e-12, 0.005)
        assert np.all(np.diff(approx_rate_array(g, 0.5 * g)) > 0)

    def test_fails_above(self):
        g = np.arange(0.005, 0.995, 0.005)
        v = approx_rate_array(g, 0.99 * g)
        assert np.any(np.diff(v) < 0)


class TestMonotonicityGrids:
    def test_decreasing_in_non_edge(self):
        for r_e in np.arange(0.05, 0.951, 0.05):
            rep = np.arange(0.0, r_e + 1e-12, 0.005)
            assert np.all(np.diff(approx_rate_array(r_e, rep)) < 0)

    def test_c3_polynomial_sign(self):
        y = np.linspace(1e-3, 1 - 1e-3, 400)[:, None]
        t = np.linspace(0, 1, 401)[None, :]
        x = t * y
        vals = c3(x, y)
        assert np.all(vals[:, :-1] < 0)
        np.testing.assert_allclose(vals[:, -1], 0.0, atol=1e-12)


class TestEdgeWeight:
    @settings(max_examples=200)
    @given(st.floats(0.01, 0.99), st.floats(0.01, 0.99))
    def test_symmetric(self, a, b):
        assert edge_weight(a, b) == edge_weight(b, a)

    def test_below_crit_uses_weaker_edge(self, rng):
        for _ in range(500):
            a, b = rng.uniform(0.01, RHO_CRIT, 2)
            assert edge_weight(a, b) == pytest.approx(approx_rate_closed_form(min(a, b), a * b), rel=1e-14)

    def test_chain_inequality(self):
        g = np.arange(0.02, RHO_CRIT, 0.02)
        for i, ri in enumerate(g):
            for j in range(i + 1):
                for k in range(j + 1):
                    ri_, rj, rk = ri, g[j], g[k]
                    lhs = edge_weight(ri_, rk)
                    assert lhs <= min(edge_weight(ri_, rj), edge_weight(rj, rk)) + 1e-15
