"""Exact crossover rate: KL projection onto the equal-correlation surface.

For a pair ``e`` and a non-edge ``e'`` spanning ``m`` (3 or 4) nodes with joint
covariance ``Sigma``, the rate is

    min_Q  KL(N(0, Q) || N(0, Sigma))   s.t.   r_Q(e)^2 = r_Q(e')^2,

with ``r_Q`` the correlation under ``Q``. The problem is non-convex, so it is
solved from several starts. Each start runs

1. a quadratic-penalty schedule over the Cholesky factor of ``Q`` (always PD),
2. a damped Newton polish in which the ``e'`` covariance entry is solved from
   the constraint, leaving an unconstrained problem over the other entries.
   Both sign branches ``r_Q(e') = +-r_Q(e)`` are polished.

Accuracy degrades once ``Sigma`` is close to singular (condition numbers
beyond ~1e3); a :class:`SolverWarning` flags starts failing to converge.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import DimensionMismatch, NotPositiveDefinite, SolverDiverged, SolverWarning
from .model import Edge, GaussianTreeModel, canonical_edge

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CrossoverProblem:
    """Joint covariance of ``e`` and ``e'`` with 0-based index pairs into ``sigma``."""

    sigma: np.ndarray
    e: tuple[int, int]
    ep: tuple[int, int]

    def __post_init__(self):
        sigma = np.array(self.sigma, dtype=float)
        m = sigma.shape[0]
        if sigma.shape != (m, m) or m not in (3, 4):
            raise DimensionMismatch(f"crossover covariance must be 3x3 or 4x4, got {sigma.shape}")
        if not np.allclose(sigma, sigma.T, rtol=0, atol=1e-12):
            raise NotPositiveDefinite("crossover covariance is not symmetric")
        e = tuple(sorted(int(v) for v in self.e))
        ep = tuple(sorted(int(v) for v in self.ep))
        if e == ep or e[0] == e[1] or ep[0] == ep[1]:
            raise DimensionMismatch("e and e' must be distinct node pairs")
        if set(e) | set(ep) != set(range(m)):
            raise DimensionMismatch("e and e' must cover exactly the m nodes of sigma")
        try:
            np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefinite("crossover covariance is not positive definite") from exc
        object.__setattr__(self, "sigma", 0.5 * (sigma + sigma.T))
        object.__setattr__(self, "e", e)
        object.__setattr__(self, "ep", ep)

    @property
    def m(self) -> int:
        return self.sigma.shape[0]

    @property
    def adjacent(self) -> bool:
        return self.m == 3

    def correlations(self) -> tuple[float, float]:
        return _corr(self.sigma, self.e), _corr(self.sigma, self.ep)


def crossover_problem(model: GaussianTreeModel, e: Edge, ep: Edge) -> CrossoverProblem:
    """Extract the 3- or 4-node marginal covariance for node pairs ``e`` and ``e'`` (1-based)."""
    e = canonical_edge(*e)
    ep = canonical_edge(*ep)
    nodes = sorted(set(e) | set(ep))
    pos = {v: k for k, v in enumerate(nodes)}
    idx = [v - 1 for v in nodes]
    sigma = model.covariance[np.ix_(idx, idx)]
    return CrossoverProblem(sigma, (pos[e[0]], pos[e[1]]), (pos[ep[0]], pos[ep[1]]))


@dataclass
class SolverOptions:
    starts: int = 8
    perturbation: float = 0.1
    seed: int = 0
    penalty_weights: tuple[float, ...] = (1e2, 1e4, 1e6, 1e8, 1e10)
    gtol: float = 1e-8
    ctol: float = 1e-9
    # penalty iterate close enough to the surface for the eliminated Newton polish
    handoff: float = 1e-4
    maxiter: int = 10_000
    polish_maxiter: int = 200


@dataclass
class RateResult:
    rate: float
    q_star: np.ndarray = field(repr=False)
    starts_used: int
    constraint_violation: float
    spread: float


def _corr(Q: np.ndarray, pair) -> float:
    i, j = pair
    return Q[i, j] / math.sqrt(Q[i, i] * Q[j, j])


def constraint_value(Q: np.ndarray, e, ep) -> float:
    """``r_Q(e)^2 - r_Q(e')^2``."""
    return _corr(Q, e) ** 2 - _corr(Q, ep) ** 2


def gaussian_kl(q: np.ndarray, p: np.ndarray) -> float:
    """KL(N(0, q) || N(0, p)) in nats.

    Evaluated through the eigenvalues of ``p^{-1/2} q p^{-1/2}`` as
    ``1/2 sum(lam - 1 - log lam)``, so every term is non-negative.
    """
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    if q.shape != p.shape or q.shape[0] != q.shape[1]:
        raise DimensionMismatch(f"shapes {q.shape} and {p.shape} differ")
    try:
        Lp = np.linalg.cholesky(p)
        np.linalg.cholesky(q)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("KL arguments must be positive definite") from exc
    Linv = np.linalg.inv(Lp)
    lam = np.linalg.eigvalsh(Linv @ q @ Linv.T)
    if lam.min() <= 0:
        raise NotPositiveDefinite("KL arguments must be positive definite")
    return 0.5 * float(np.sum((lam - 1.0) - np.log(lam)))


def _constraint_grad(Q: np.ndarray, e, ep) -> np.ndarray:
    """Symmetric ``G`` with ``dh = tr(G dQ)`` for ``h = r_e^2 - r_ep^2``."""
    G = np.zeros_like(Q)
    for (i, j), sign in ((e, 1.0), (ep, -1.0)):
        qii, qjj, qij = Q[i, i], Q[j, j], Q[i, j]
        G[i, j] += sign * qij / (qii * qjj)
        G[j, i] += sign * qij / (qii * qjj)
        G[i, i] -= sign * qij * qij / (qii * qii * qjj)
        G[j, j] -= sign * qij * qij / (qii * qjj * qjj)
    return G


class _Objective:
    """KL(. || sigma) with cached inverse and log-determinant of sigma."""

    def __init__(self, sigma: np.ndarray):
        self.sigma = sigma
        self.m = sigma.shape[0]
        self.prec = np.linalg.inv(sigma)
        self.logdet = np.linalg.slogdet(sigma)[1]

    def value_grad(self, Q: np.ndarray):
        """KL and its symmetric matrix gradient; ``None`` when Q is not PD."""
        try:
            L = np.linalg.cholesky(Q)
        except np.linalg.LinAlgError:
            return None
        logdet_q = 2.0 * np.sum(np.log(np.diag(L)))
        val = 0.5 * (np.sum(self.prec * Q) - self.m - logdet_q + self.logdet)
        Linv = np.linalg.inv(L)
        grad = 0.5 * (self.prec - Linv.T @ Linv)
        return val, grad


# --- phase 1: quadratic penalty over the Cholesky factor ---------------------


def _penalty_phase(obj: _Objective, Q0: np.ndarray, e, ep, opts: SolverOptions) -> np.ndarray:
    m = obj.m
    tril = np.tril_indices(m)

    def unpack(x):
        L = np.zeros((m, m))
        L[tril] = x
        return L

    x = np.linalg.cholesky(Q0)[tril]
    for mu in opts.penalty_weights:

        def fun(x, mu=mu):
            L = unpack(x)
            Q = L @ L.T
            vg = obj.value_grad(Q)
            if vg is None:
                return np.inf, np.zeros_like(x)
            val, G = vg
            h = constraint_value(Q, e, ep)
            G = G + mu * h * _constraint_grad(Q, e, ep)
            return val + 0.5 * mu * h * h, (2.0 * G @ L)[tril]

        res = minimize(fun, x, jac=True, method="BFGS", options={"gtol": 1e-7, "maxiter": opts.maxiter})
        x = res.x
        L = unpack(x)
        if abs(constraint_value(L @ L.T, e, ep)) < opts.handoff:
            break
    L = unpack(x)
    return L @ L.T


# --- phase 2: constraint eliminated, damped Newton ---------------------------


class _Eliminated:
    """Free coordinates = upper-triangular entries of Q except ``Q[e']``.

    ``Q[e'] = s |Q[e]| sqrt(Q_kk Q_ll / (Q_ii Q_jj))`` enforces the constraint
    exactly on the branch with ``sign(r_ep) = s``.
    """

    def __init__(self, obj: _Objective, e, ep, sign: float):
        self.obj = obj
        self.e = e
        self.ep = ep
        self.sign = sign
        m = obj.m
        self.coords = [(a, b) for a in range(m) for b in range(a, m) if (a, b) != ep]

    def to_vector(self, Q: np.ndarray) -> np.ndarray:
        return np.array([Q[a, b] for a, b in self.coords])

    def to_matrix(self, y: np.ndarray) -> np.ndarray:
        m = self.obj.m
        Q = np.zeros((m, m))
        for (a, b), v in zip(self.coords, y):
            Q[a, b] = Q[b, a] = v
        (i, j), (k, l) = self.e, self.ep
        ratio = Q[k, k] * Q[l, l] / (Q[i, i] * Q[j, j])
        if not ratio > 0:
            return None
        Q[k, l] = Q[l, k] = self.sign * abs(Q[i, j]) * math.sqrt(ratio)
        return Q

    def value_grad(self, y: np.ndarray):
        Q = self.to_matrix(y)
        if Q is None:
            return None
        vg = self.obj.value_grad(Q)
        if vg is None:
            return None
        val, G = vg
        (i, j), (k, l) = self.e, self.ep
        g_ep = Q[k, l]
        # d Q[e'] / d (free entries); shared-node terms cancel via accumulation
        dep = {}
        if Q[i, j] != 0.0:
            dep[(i, j)] = g_ep / Q[i, j]
        for a, s in ((k, 0.5), (l, 0.5), (i, -0.5), (j, -0.5)):
            dep[(a, a)] = dep.get((a, a), 0.0) + s * g_ep / Q[a, a]
        grad = np.empty(len(self.coords))
        for n, (a, b) in enumerate(self.coords):
            direct = G[a, a] if a == b else 2.0 * G[a, b]
            grad[n] = direct + 2.0 * G[k, l] * dep.get((a, b), 0.0)
        return val, grad


def _fd_hessian(problem: _Eliminated, y: np.ndarray, h: float = 1e-6) -> np.ndarray:
    n = y.size
    H = np.empty((n, n))
    for c in range(n):
        step = np.zeros(n)
        step[c] = h
        gp = problem.value_grad(y + step)
        gm = problem.value_grad(y - step)
        if gp is None or gm is None:
            gp = problem.value_grad(y + 0.01 * step)
            gm = problem.value_grad(y - 0.01 * step)
            H[:, c] = (gp[1] - gm[1]) / (0.02 * h)
        else:
            H[:, c] = (gp[1] - gm[1]) / (2 * h)
    return 0.5 * (H + H.T)


def _newton_polish(problem: _Eliminated, y: np.ndarray, opts: SolverOptions):
    val, grad = problem.value_grad(y)
    for it in range(opts.polish_maxiter):
        gnorm = np.linalg.norm(grad)
        if gnorm < 1e-3 * opts.gtol:
            break
        H = _fd_hessian(problem, y)
        w, V = np.linalg.eigh(H)
        floor = 1e-10 * max(1.0, np.abs(w).max())
        w = np.maximum(np.abs(w), floor)
        step = -V @ ((V.T @ grad) / w)
        t = 1.0
        accepted = False
        while t > 1e-12:
            cand = problem.value_grad(y + t * step)
            if cand is not None:
                cval, cgrad = cand
                # near the optimum values stall at rounding level; gradient decrease still counts
                if cval <= val + 1e-4 * t * grad @ step or (
                    cval <= val + 1e-14 * max(1.0, abs(val)) and np.linalg.norm(cgrad) < gnorm
                ):
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            break
        y = y + t * step
        val, grad = cval, cgrad
    return y, val, float(np.linalg.norm(grad)), it


def _polish_branch(obj: _Objective, Qp: np.ndarray, e, ep, sign: float, opts: SolverOptions):
    elim = _Eliminated(obj, e, ep, sign)
    y0 = elim.to_vector(Qp)
    shrink = 0
    while elim.value_grad(y0) is None:
        # projecting the penalty iterate left the PD cone: pull it toward its diagonal
        shrink += 1
        if shrink > 20:
            return None
        Qp = 0.9 * Qp + 0.1 * np.diag(np.diag(Qp))
        y0 = elim.to_vector(Qp)
    y, val, gnorm, _ = _newton_polish(elim, y0, opts)
    return elim.to_matrix(y), max(val, 0.0), gnorm


def _solve_one_start(obj: _Objective, Q0: np.ndarray, e, ep, opts: SolverOptions):
    """Penalty phase, then a Newton polish on both sign branches ``r(e') = +-r(e)``.

    Each branch has its own local minimum; the penalty iterate picks the
    branch tried first and the better converged one is kept.
    """
    Qp = _penalty_phase(obj, Q0, e, ep, opts)
    k, l = ep
    first = 1.0 if Qp[k, l] >= 0 else -1.0
    best = None
    for sign in (first, -first):
        out = _polish_branch(obj, Qp, e, ep, sign, opts)
        if out is None:
            continue
        Q, val, gnorm = out
        ok = gnorm < opts.gtol and abs(constraint_value(Q, e, ep)) < opts.ctol
        if ok and (best is None or val < best[1]):
            best = out
    if best is None:
        # report the first branch's iterate so the caller can log why it failed
        return _polish_branch(obj, Qp, e, ep, first, opts)
    return best


def _starting_points(sigma: np.ndarray, opts: SolverOptions) -> list[np.ndarray]:
    m = sigma.shape[0]
    rng = np.random.default_rng(np.random.SeedSequence(opts.seed))
    starts = [sigma.copy()]
    while len(starts) < opts.starts:
        A = np.eye(m) + opts.perturbation * rng.standard_normal((m, m))
        if abs(np.linalg.det(A)) < 1e-3:
            continue
        starts.append(A @ sigma @ A.T)
    return starts


def solve_crossover_rate(problem: CrossoverProblem, opts: SolverOptions | None = None) -> RateResult:
    """Minimise KL(Q || Sigma) over PD ``Q`` with ``r_Q(e)^2 = r_Q(e')^2``.

    The problem is solved in correlation units (unit-diagonal ``Sigma``) since
    the rate is invariant to variance rescaling; ``q_star`` is mapped back.
    The best local minimum across starts is returned together with the
    spread of converged values.
    """
    opts = opts or SolverOptions()
    scale = np.sqrt(np.diag(problem.sigma))
    sigma = problem.sigma / np.outer(scale, scale)
    obj = _Objective(sigma)
    e, ep = problem.e, problem.ep

    values, mats, violations = [], [], []
    for Q0 in _starting_points(sigma, opts):
        out = _solve_one_start(obj, Q0, e, ep, opts)
        if out is None:
            continue
        Q, val, gnorm = out
        viol = abs(constraint_value(Q, e, ep))
        if gnorm < opts.gtol and viol < opts.ctol:
            values.append(val)
            mats.append(Q)
            violations.append(viol)
        else:
            log.debug("start rejected: grad %.3e violation %.3e", gnorm, viol)
    if not values:
        raise SolverDiverged(f"no start converged for e={e}, e'={ep}")
    if 2 * len(values) < opts.starts:
        warnings.warn(
            f"only {len(values)}/{opts.starts} starts converged for e={e}, e'={ep}; "
            f"covariance condition number {np.linalg.cond(sigma):.3g}",
            SolverWarning,
        )
    best = int(np.argmin(values))
    q_star = mats[best] * np.outer(scale, scale)
    return RateResult(
        rate=float(values[best]),
        q_star=q_star,
        starts_used=len(values),
        constraint_violation=float(violations[best]),
        spread=float(max(values) - min(values)),
    )


def _pair_tasks(model: GaussianTreeModel):
    for ep in model.tree.non_edges():
        for e in model.path(*ep):
            yield e, ep


def _solve_pair(args):
    model_cov, d_edges, e, ep, opts = args
    problem = _problem_from_cov(model_cov, e, ep)
    try:
        res = solve_crossover_rate(problem, opts)
    except SolverDiverged as exc:
        raise SolverDiverged(f"crossover solve failed for e={e}, e'={ep}: {exc}") from exc
    return e, ep, res


def _problem_from_cov(cov: np.ndarray, e: Edge, ep: Edge) -> CrossoverProblem:
    nodes = sorted(set(e) | set(ep))
    pos = {v: k for k, v in enumerate(nodes)}
    idx = [v - 1 for v in nodes]
    return CrossoverProblem(cov[np.ix_(idx, idx)], (pos[e[0]], pos[e[1]]), (pos[ep[0]], pos[ep[1]]))


def crossover_rates(model: GaussianTreeModel, opts: SolverOptions | None = None, workers: int = 1, pairs=None):
    """Exact rates for every (path edge, non-edge) pair, as ``{(e, e'): RateResult}``."""
    opts = opts or SolverOptions()
    pairs = list(_pair_tasks(model)) if pairs is None else list(pairs)
    tasks = [(model.covariance, model.edges, e, ep, opts) for e, ep in pairs]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_solve_pair, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        results = [_solve_pair(t) for t in tasks]
    return {(e, ep): res for e, ep, res in results}


def exact_error_exponent(model: GaussianTreeModel, opts: SolverOptions | None = None, workers: int = 1):
    """Exact error exponent: min over non-edges and their path edges of the crossover rate.

    Returns an :class:`~gausstree.exponent.ExponentReport` with
    ``method="exact"``; a two-node model has no error events and reports
    ``value = inf``.
    """
    from .exponent import ExponentReport

    if model.d == 2:
        return ExponentReport(value=math.inf, argmin=None, method="exact")
    rates = crossover_rates(model, opts, workers)
    (e, ep), best = min(rates.items(), key=lambda kv: kv[1].rate)
    diagnostics = {
        "pairs": len(rates),
        "max_spread": max(r.spread for r in rates.values()),
        "max_constraint_violation": max(r.constraint_violation for r in rates.values()),
        "min_starts_used": min(r.starts_used for r in rates.values()),
    }
    return ExponentReport(value=best.rate, argmin=(e, ep), method="exact", diagnostics=diagnostics)
