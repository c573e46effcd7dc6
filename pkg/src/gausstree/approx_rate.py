"""Very-noisy (Euclidean) approximation of the crossover rate.

Two independent routes compute the same quantity:

* :func:`approx_rate_closed_form` -- rational expression in the squared
  correlations of an edge ``e`` and a non-edge ``e'`` whose path contains ``e``.
  This is the production path.
* :func:`approx_rate_snr` -- squared mutual-information gap over twice the
  variance of the information-density difference, with that variance obtained
  from the Gaussian fourth-moment identity. Works for any crossover problem
  and serves as the oracle for the closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CorrelationOutOfRange, DegenerateDenominator, NotPositiveDefinite

RHO_CRIT = 0.63055


def rho_crit() -> float:
    """Magnitude below which the approximate rate grows with the edge correlation."""
    return RHO_CRIT


@dataclass(frozen=True)
class ApproxRateInputs:
    rho_e: float
    rho_ep: float

    def __post_init__(self):
        for name in ("rho_e", "rho_ep"):
            v = getattr(self, name)
            if not abs(v) < 1.0:
                raise CorrelationOutOfRange(f"{name} must lie in (-1, 1), got {v}")


def _ratio(a, b):
    """``A/B`` with the common factor ``y - x`` cancelled analytically.

    ``B = 2 (y - x)(xy - 3x + y + 1) / ((1-x)^2 (1-y)^2)`` and
    ``A = (1/4) log1p((y - x)/(1 - y))^2``, so the rate is evaluated without
    the 0/0 cancellation the literal form suffers as ``|rho_e'| -> |rho_e|``.
    Works elementwise on numpy arrays.
    """
    a = np.abs(a)
    b = np.abs(b)
    x, y = b * b, a * a
    gap = (a - b) * (a + b)
    log_ratio = np.log1p(gap / (1.0 - y))
    # log_ratio^2 / gap -> gap / (1-y)^2 as gap -> 0
    with np.errstate(invalid="ignore", divide="ignore"):
        scaled = np.where(gap == 0.0, 0.0, log_ratio * log_ratio / np.where(gap == 0.0, 1.0, gap))
    return 0.125 * scaled * (1.0 - x) ** 2 * (1.0 - y) ** 2 / (x * y - 3.0 * x + y + 1.0)


def approx_rate_closed_form(rho_e: float, rho_ep: float) -> float:
    """Approximate crossover rate ``J~(rho_e, rho_ep)`` in nats.

    Parameters
    ----------
    rho_e : float
        Correlation on the true edge.
    rho_ep : float
        Correlation on the non-edge (product of correlations along its path).

    Raises
    ------
    DegenerateDenominator
        When both correlations vanish.
    """
    ApproxRateInputs(rho_e, rho_ep)
    if rho_e == 0.0 and rho_ep == 0.0:
        raise DegenerateDenominator("rho_e = rho_ep = 0 gives 0/0")
    return float(_ratio(rho_e, rho_ep))


def approx_rate_array(rho_e, rho_ep) -> np.ndarray:
    """Vectorised closed form for grids; same formula as the scalar path."""
    return _ratio(np.asarray(rho_e, dtype=float), np.asarray(rho_ep, dtype=float))


def edge_weight(rho_i: float, rho_j: float) -> float:
    """Weight between two adjacent edges: the smaller of their two crossover rates."""
    prod = rho_i * rho_j
    return min(approx_rate_closed_form(rho_i, prod), approx_rate_closed_form(rho_j, prod))


def edge_weight_matrix(rho) -> np.ndarray:
    """``W[a, b] = edge_weight(rho[a], rho[b])`` for all pairs (diagonal included)."""
    rho = np.asarray(rho, dtype=float)
    a = rho[:, None]
    b = rho[None, :]
    prod = a * b
    return np.minimum(approx_rate_array(a, prod), approx_rate_array(b, prod))


# --- SNR / fourth-moment route -------------------------------------------------


def _pair_correlation(sigma: np.ndarray, pair) -> float:
    i, j = pair
    return sigma[i, j] / math.sqrt(sigma[i, i] * sigma[j, j])


def _offdiag_precision(sigma: np.ndarray, pair) -> float:
    i, j = pair
    block = sigma[np.ix_([i, j], [i, j])]
    det = block[0, 0] * block[1, 1] - block[0, 1] ** 2
    if det <= 0.0:
        raise NotPositiveDefinite(f"2x2 block on {pair} is not positive definite")
    return -block[0, 1] / det


def information_density_matrix(sigma: np.ndarray, e, ep) -> np.ndarray:
    """Symmetric ``M`` with ``<M, Delta>`` the linearised MI difference ``I_e - I_ep``.

    ``M`` carries ``+1/2 [Sigma_e^-1]_od`` at ``e`` and ``-1/2 [Sigma_ep^-1]_od``
    at ``e'``; when the two pairs share a node both entries sit in that node's
    row and column.
    """
    m = sigma.shape[0]
    M = np.zeros((m, m))
    for pair, coef in ((e, 0.5 * _offdiag_precision(sigma, e)), (ep, -0.5 * _offdiag_precision(sigma, ep))):
        i, j = pair
        M[i, j] += coef
        M[j, i] += coef
    return M


def quadratic_form_covariance(sigma: np.ndarray, A: np.ndarray, B: np.ndarray) -> float:
    """``Cov(x'Ax, x'Bx) = 2 tr(A Sigma B Sigma)`` for ``x ~ N(0, Sigma)``, symmetric A, B."""
    return 2.0 * float(np.trace(A @ sigma @ B @ sigma))


def _pair_selector(m: int, pair) -> np.ndarray:
    i, j = pair
    C = np.zeros((m, m))
    C[i, j] = C[j, i] = 0.5
    return C


def information_density_variance(sigma: np.ndarray, e, ep) -> float:
    """``Var(s_e - s_ep)`` for ``x ~ N(0, sigma)``.

    Each information density is a constant minus ``[Sigma_pair^-1]_od x_i x_j``,
    so the variance expands into pairwise covariances of products, each from
    the fourth-moment identity.
    """
    m = sigma.shape[0]
    a = _offdiag_precision(sigma, e)
    b = _offdiag_precision(sigma, ep)
    Ce = _pair_selector(m, e)
    Cep = _pair_selector(m, ep)
    var_e = a * a * quadratic_form_covariance(sigma, Ce, Ce)
    var_ep = b * b * quadratic_form_covariance(sigma, Cep, Cep)
    cov = a * b * quadratic_form_covariance(sigma, Ce, Cep)
    return var_e + var_ep - 2.0 * cov


def approx_rate_snr(problem) -> float:
    """Approximate rate of a :class:`~gausstree.exact_rate.CrossoverProblem`.

    ``(I(p_ep) - I(p_e))^2 / (2 Var(s_ep - s_e))``, valid for adjacent (m=3)
    and disjoint (m=4) pairs and for arbitrary variances.
    """
    sigma = np.asarray(problem.sigma, dtype=float)
    try:
        np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("crossover covariance is not positive definite") from exc
    r_e = _pair_correlation(sigma, problem.e)
    r_ep = _pair_correlation(sigma, problem.ep)
    gap = -0.5 * math.log1p(-r_ep * r_ep) + 0.5 * math.log1p(-r_e * r_e)
    if gap == 0.0:
        return 0.0
    var = information_density_variance(sigma, problem.e, problem.ep)
    return gap * gap / (2.0 * var)


def approx_rate_trace(problem) -> float:
    """Same rate written as ``gap^2 / (4 tr((M Sigma)^2))``; cross-check of the variance."""
    sigma = np.asarray(problem.sigma, dtype=float)
    r_e = _pair_correlation(sigma, problem.e)
    r_ep = _pair_correlation(sigma, problem.ep)
    gap = -0.5 * math.log1p(-r_ep * r_ep) + 0.5 * math.log1p(-r_e * r_e)
    if gap == 0.0:
        return 0.0
    MS = information_density_matrix(sigma, problem.e, problem.ep) @ sigma
    return gap * gap / (4.0 * float(np.trace(MS @ MS)))
