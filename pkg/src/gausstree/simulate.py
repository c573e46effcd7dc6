"""Monte Carlo estimates of the structure-learning error probability.

Each trial draws its own ``n`` samples from a Philox stream keyed by
``(seed, trial)``, runs Chow-Liu and records whether the learned edge set
differs from the true one. Counts are therefore identical for any number of
worker threads.
"""

from __future__ import annotations

import csv
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import binomtest

from .approx_rate import approx_rate_snr
from .chow_liu import max_weight_spanning_tree
from .empirical import trial_rng
from .errors import GammaOutOfRange
from .exact_rate import CrossoverProblem, SolverOptions, exact_error_exponent, solve_crossover_rate
from .exponent import approx_exponent_linear
from .extremal import chain_structure, make_hybrid, place_correlations, star_structure
from .model import GaussianTreeModel

CI_LEVEL = 0.95
FIG8_SEED = 127
GAMMA_MAX = 1.0 / math.sqrt(3.0)


def default_threads() -> int:
    env = os.environ.get("GAUSSTREE_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def wilson_interval(errors: int, trials: int, level: float = CI_LEVEL) -> tuple[float, float]:
    ci = binomtest(errors, trials).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


def _count_errors(chol: np.ndarray, true_edges: frozenset, n: int, seed: int, trials: range) -> int:
    d = chol.shape[0]
    errors = 0
    for t in trials:
        x = trial_rng(seed, t).standard_normal((n, d)) @ chol.T
        s = x.T @ x
        diag = np.diag(s)
        w = s * s / np.outer(diag, diag)
        if frozenset(max_weight_spanning_tree(w)) != true_edges:
            errors += 1
    return errors


def _chunks(trials: int, parts: int) -> list[range]:
    bounds = np.linspace(0, trials, parts + 1).astype(int)
    return [range(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def estimate_error_probability(
    model: GaussianTreeModel, n: int, trials: int, seed: int = 0, threads: int = 1
) -> tuple[int, int, tuple[float, float]]:
    """Count trials whose Chow-Liu edge set differs from the true one.

    Returns
    -------
    (errors, trials, (ci_lo, ci_hi))
        The interval is the 95% Wilson score interval.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if n < model.d:
        warnings.warn(f"n={n} is below d={model.d}; the sample covariance is singular", RuntimeWarning)
    if model.d == 2:
        return 0, trials, wilson_interval(0, trials)
    chol = np.linalg.cholesky(model.covariance)
    true_edges = frozenset((i - 1, j - 1) for i, j in model.edges)
    parts = _chunks(trials, max(1, threads))
    if len(parts) == 1:
        errors = _count_errors(chol, true_edges, n, seed, parts[0])
    else:
        with ThreadPoolExecutor(max_workers=len(parts)) as pool:
            errors = sum(pool.map(lambda r: _count_errors(chol, true_edges, n, seed, r), parts))
    return errors, trials, wilson_interval(errors, trials)


@dataclass
class ErrorCell:
    n: int
    trials: int
    errors: int
    p_hat: float
    ci_lo: float
    ci_hi: float
    sim_exponent: float
    lower_bound: bool


@dataclass
class ErrorCurve:
    model_id: str
    cells: list[ErrorCell]
    K_p: float | None = None
    K_tilde: float | None = None
    meta: dict = field(default_factory=dict)

    COLUMNS = ("n", "trials", "errors", "p_hat", "ci_lo", "ci_hi", "sim_exponent", "K_p", "K_tilde")

    @property
    def n_grid(self) -> list[int]:
        return [c.n for c in self.cells]

    def exponents(self) -> np.ndarray:
        return np.array([c.sim_exponent for c in self.cells])

    def regression_exponent(self) -> float | None:
        """Minus the slope of ``log P_hat`` against ``n`` over cells with errors."""
        pts = [(c.n, math.log(c.p_hat)) for c in self.cells if c.errors > 0]
        if len(pts) < 2:
            return None
        n, lp = np.array(pts).T
        return float(-np.polyfit(n, lp, 1)[0])

    def rows(self) -> list[dict]:
        return [
            {
                "n": c.n,
                "trials": c.trials,
                "errors": c.errors,
                "p_hat": c.p_hat,
                "ci_lo": c.ci_lo,
                "ci_hi": c.ci_hi,
                "sim_exponent": c.sim_exponent,
                "K_p": self.K_p,
                "K_tilde": self.K_tilde,
            }
            for c in self.cells
        ]

    def to_csv(self, path_or_file) -> None:
        if isinstance(path_or_file, (str, Path)):
            with open(path_or_file, "w", newline="") as fh:
                self.to_csv(fh)
            return
        writer = csv.DictWriter(path_or_file, fieldnames=self.COLUMNS)
        writer.writeheader()
        writer.writerows(self.rows())


def _cell(n: int, errors: int, trials: int, ci) -> ErrorCell:
    if errors == 0:
        # only a bound: P < 1/trials
        return ErrorCell(n, trials, 0, 0.0, ci[0], ci[1], -math.log(1.0 / trials) / n, True)
    p = errors / trials
    return ErrorCell(n, trials, errors, p, ci[0], ci[1], -math.log(p) / n, False)


def parse_grid(spec: str) -> list[int]:
    """``"100:2000:100"`` (inclusive) or ``"250,500,1000"``."""
    if ":" in spec:
        parts = [int(p) for p in spec.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise ValueError(f"grid must be start:stop:step, got {spec!r}")
        start, stop, step = parts
        return list(range(start, stop + 1, step))
    return [int(p) for p in spec.split(",") if p.strip()]


def error_curve(
    model: GaussianTreeModel,
    n_grid: Sequence[int],
    trials: int,
    seed: int = 0,
    threads: int = 1,
    model_id: str = "model",
    exact: bool = True,
    solver_opts: SolverOptions | None = None,
) -> ErrorCurve:
    """Error probability and simulated exponent ``-(1/n) log P_hat`` over a grid.

    Each grid point uses an independent seed derived from ``seed`` and ``n``.
    The true exponent ``K_p`` (exact solver, skipped with ``exact=False``) and
    its approximation are attached as reference values.
    """
    grid = [int(n) for n in n_grid]
    if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("n grid must be non-empty and strictly ascending")
    cells = []
    for n in grid:
        cell_seed = int(np.random.SeedSequence([seed, n]).generate_state(1)[0])
        errors, t, ci = estimate_error_probability(model, n, trials, cell_seed, threads)
        cells.append(_cell(n, errors, t, ci))
    k_tilde = approx_exponent_linear(model).value
    k_p = exact_error_exponent(model, solver_opts).value if exact else None
    return ErrorCurve(model_id=model_id, cells=cells, K_p=k_p, K_tilde=k_tilde, meta={"seed": seed})


# --- experiment setups -------------------------------------------------------


def fig8_models(d: int = 10, seed: int = FIG8_SEED) -> dict[str, GaussianTreeModel]:
    """Star, hybrid and chain sharing one random placement of equally spaced correlations.

    The correlations ``linspace(0.1, 0.9, d-1)`` are permuted once with
    ``seed`` and written onto each tree's edges in sorted edge order.
    """
    rho = np.random.default_rng(seed).permutation(np.linspace(0.1, 0.9, d - 1))
    return {
        "star": place_correlations(star_structure(d), rho),
        "hybrid": place_correlations(make_hybrid(d), rho),
        "chain": place_correlations(chain_structure(d), rho),
    }


@dataclass
class Fig5Row:
    gamma: float
    J: float
    J_tilde: float
    mi_gap: float

    @property
    def rel_gap(self) -> float:
        return abs(self.J - self.J_tilde) / self.J


def symmetric_star_problem(gamma: float) -> CrossoverProblem:
    """Four-node star with unit-diagonal precision and ``gamma`` on the centre row.

    The crossover pair is the edge (1,2) against the non-edge (3,4).
    """
    if not 0.0 < gamma < GAMMA_MAX:
        raise GammaOutOfRange(f"gamma must lie in (0, 1/sqrt(3)), got {gamma}")
    K = np.eye(4)
    K[0, 1:] = K[1:, 0] = gamma
    sigma = np.linalg.inv(K)
    return CrossoverProblem(sigma=0.5 * (sigma + sigma.T), e=(0, 1), ep=(2, 3))


def fig5_experiment(gammas: Sequence[float], opts: SolverOptions | None = None) -> list[Fig5Row]:
    """Exact and approximate crossover rates on the symmetric star for each ``gamma``."""
    rows = []
    for g in gammas:
        prob = symmetric_star_problem(float(g))
        r_e, r_ep = prob.correlations()
        gap = 0.5 * (math.log1p(-r_ep * r_ep) - math.log1p(-r_e * r_e))
        J = solve_crossover_rate(prob, opts).rate
        rows.append(Fig5Row(gamma=float(g), J=J, J_tilde=approx_rate_snr(prob), mi_gap=gap))
    return rows
