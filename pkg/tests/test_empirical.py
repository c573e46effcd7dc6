import warnings

import numpy as np
import pytest

from gausstree.empirical import (
    EmpiricalMoments,
    empirical_covariance,
    empirical_mi,
    load_samples,
    sample,
    trial_rng,
)
from gausstree.errors import DegenerateVariance, PerfectCorrelationWarning
from gausstree.model import model_from_edges


@pytest.fixture
def chain3():
    return model_from_edges(3, [(1, 2, 0.6), (2, 3, -0.5)])


class TestSample:
    def test_deterministic(self, chain3):
        a = sample(chain3, 50, seed=3)
        b = sample(chain3, 50, seed=3)
        np.testing.assert_array_equal(a.data, b.data)
        assert not np.array_equal(a.data, sample(chain3, 50, seed=4).data)

    def test_correlation_recovered(self):
        m = model_from_edges(2, [(1, 2, 0.5)])
        rho = empirical_covariance(sample(m, 100_000, seed=1)).correlations()[0, 1]
        assert abs(rho - 0.5) < 0.01

    def test_covariance_five_sigma(self, chain3):
        n = 100_000
        est = empirical_covariance(sample(chain3, n, seed=11)).sigma_hat
        S = chain3.covariance
        # Var(x_i x_j) = S_ij^2 + S_ii S_jj for zero-mean Gaussians
        sd = np.sqrt((S**2 + np.outer(np.diag(S), np.diag(S))) / n)
        assert np.all(np.abs(est - S) < 5 * sd)

    def test_single_row_rank_one(self, chain3):
        mom = empirical_covariance(sample(chain3, 1, seed=0))
        assert np.linalg.matrix_rank(mom.sigma_hat) == 1

    def test_rejects_empty(self, chain3):
        with pytest.raises(ValueError):
            sample(chain3, 0, seed=0)

    def test_trial_streams_independent(self):
        a = trial_rng(5, 0).standard_normal(4)
        b = trial_rng(5, 1).standard_normal(4)
        assert not np.array_equal(a, b)
        np.testing.assert_array_equal(a, trial_rng(5, 0).standard_normal(4))

    def test_csv_round_trip(self, chain3, tmp_path):
        batch = sample(chain3, 20, seed=2)
        batch.to_csv(tmp_path / "x.csv")
        np.testing.assert_array_equal(load_samples(tmp_path / "x.csv").data, batch.data)


class TestEmpiricalCovariance:
    def test_zero_rows(self):
        np.testing.assert_array_equal(empirical_covariance(np.zeros((5, 3))).sigma_hat, np.zeros((3, 3)))

    def test_outer_product(self):
        x = np.array([[1.0, -2.0, 3.0]])
        np.testing.assert_array_equal(empirical_covariance(x).sigma_hat, np.outer(x[0], x[0]))

    def test_no_centering(self):
        x = np.ones((10, 2)) + np.array([[0.0, 1.0]])
        np.testing.assert_allclose(empirical_covariance(x).sigma_hat, [[1.0, 2.0], [2.0, 4.0]])


class TestEmpiricalMI:
    def test_identity(self):
        mom = EmpiricalMoments(np.eye(3), n=10)
        assert empirical_mi(mom, (1, 2)) == 0.0

    def test_value_and_evenness(self):
        S = np.array([[1.0, 0.6], [0.6, 1.0]])
        assert empirical_mi(EmpiricalMoments(S, 5), (1, 2)) == pytest.approx(-0.5 * np.log(0.64), rel=1e-14)
        S[0, 1] = S[1, 0] = -0.6
        assert empirical_mi(EmpiricalMoments(S, 5), (1, 2)) == pytest.approx(0.2231435513, rel=1e-9)

    def test_zero_variance(self):
        with pytest.raises(DegenerateVariance):
            empirical_mi(EmpiricalMoments(np.diag([1.0, 0.0]), 3), (1, 2))

    def test_perfect_correlation_warns(self):
        mom = EmpiricalMoments(np.ones((2, 2)), 3)
        with pytest.warns(PerfectCorrelationWarning):
            val = empirical_mi(mom, (1, 2))
        assert np.isfinite(val) and val > 10

    def test_no_warning_in_normal_case(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            empirical_mi(EmpiricalMoments(np.array([[1.0, 0.3], [0.3, 1.0]]), 3), (1, 2))
