"""Sampling from a tree model and the empirical moments Chow-Liu consumes.

Random streams come from Philox keyed by a :class:`numpy.random.SeedSequence`;
``trial_rng(seed, k)`` gives trial ``k`` its own stream so Monte Carlo results
do not depend on how trials are scheduled across workers.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateVariance, PerfectCorrelationWarning
from .model import GaussianTreeModel

PERFECT_CORRELATION_TOL = 1e-12


def trial_rng(seed: int, trial: int | None = None) -> np.random.Generator:
    spawn_key = () if trial is None else (int(trial),)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=spawn_key)))


@dataclass(frozen=True)
class SampleBatch:
    n: int
    data: np.ndarray = field(repr=False)
    seed: int

    def to_csv(self, path: str | Path) -> None:
        np.savetxt(path, self.data, delimiter=",", fmt="%.17g")


@dataclass(frozen=True)
class EmpiricalMoments:
    sigma_hat: np.ndarray = field(repr=False)
    n: int

    @property
    def d(self) -> int:
        return self.sigma_hat.shape[0]

    def correlations(self) -> np.ndarray:
        diag = np.diag(self.sigma_hat)
        if np.any(diag <= 0):
            raise DegenerateVariance("empirical variance is zero for some node")
        s = np.sqrt(diag)
        return self.sigma_hat / np.outer(s, s)


def _draw(chol: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal((n, chol.shape[0])) @ chol.T


def sample(model: GaussianTreeModel, n: int, seed: int) -> SampleBatch:
    """``n`` i.i.d. rows from ``N(0, Sigma)`` via the Cholesky factor of ``Sigma``."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    chol = np.linalg.cholesky(model.covariance)
    return SampleBatch(n=n, data=_draw(chol, n, trial_rng(seed)), seed=seed)


def load_samples(path: str | Path) -> SampleBatch:
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    if not np.all(np.isfinite(data)):
        raise ValueError(f"non-finite entries in {path}")
    return SampleBatch(n=data.shape[0], data=data, seed=-1)


def empirical_covariance(batch: SampleBatch | np.ndarray) -> EmpiricalMoments:
    """Second-moment matrix ``(1/n) sum x_k x_k^T``; the mean is known to be zero."""
    data = batch.data if isinstance(batch, SampleBatch) else np.asarray(batch, dtype=float)
    n = data.shape[0]
    sigma_hat = data.T @ data / n
    return EmpiricalMoments(sigma_hat=0.5 * (sigma_hat + sigma_hat.T), n=n)


def empirical_mi(moments: EmpiricalMoments, pair: tuple[int, int]) -> float:
    """Empirical mutual information (nats) of the 1-based node pair.

    A correlation of magnitude 1 (within 1e-12) is clipped and reported with a
    :class:`PerfectCorrelationWarning` instead of returning infinity.
    """
    i, j = pair[0] - 1, pair[1] - 1
    s = moments.sigma_hat
    if s[i, i] <= 0 or s[j, j] <= 0:
        raise DegenerateVariance(f"zero empirical variance on pair {pair}")
    rho = s[i, j] / math.sqrt(s[i, i] * s[j, j])
    r2 = rho * rho
    if r2 >= 1.0 - PERFECT_CORRELATION_TOL:
        warnings.warn(f"empirical correlation on {pair} is {rho:.15g}; MI clipped", PerfectCorrelationWarning)
        r2 = 1.0 - PERFECT_CORRELATION_TOL
    return -0.5 * math.log1p(-r2)
