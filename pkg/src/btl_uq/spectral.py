"""Rank centrality: stationary measure of the empirical comparison chain."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .core import BTLError, ComparisonDataset, DomainError, EstimatorUndefinedError
from .mle import EstimateReport, neg_log_likelihood


class DegenerateNormalizationError(BTLError, ValueError):
    pass


class ReducibleChainError(EstimatorUndefinedError):
    pass


class StationaryConvergenceError(BTLError):
    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic chain with off-diagonals ``P_ij = A_ij ybar_ji / d``.

    ``off`` holds the off-diagonal part (sparse, keyed by edges) and ``diag``
    the holding probabilities ``1 - sum_k P_ik``.
    """

    n: int
    d: float
    off: sp.csr_matrix
    diag: np.ndarray

    def dense(self) -> np.ndarray:
        P = self.off.toarray()
        P[np.diag_indices(self.n)] = self.diag
        return P

    def left_apply(self, pi: np.ndarray) -> np.ndarray:
        """Return ``pi^T P`` as a vector."""
        return self.off.T @ pi + self.diag * pi


def default_normalization(data: ComparisonDataset) -> float:
    """``2 n p`` when the edge probability is known, else twice the max degree."""
    if data.p is not None:
        return 2.0 * data.n * float(data.p)
    return 2.0 * float(data.degrees().max())


def build_transition(data: ComparisonDataset, d: float | None = None) -> TransitionMatrix:
    if d is None:
        d = default_normalization(data)
    if not d > 0:
        raise DomainError("normalization d must be positive")
    n = data.n
    # Moving i -> j happens at rate ybar_ji: the walker drifts toward winners.
    rows = np.concatenate([data.i, data.j])
    cols = np.concatenate([data.j, data.i])
    vals = np.concatenate([1.0 - data.ybar, data.ybar]) / d
    off = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    mass = np.asarray(off.sum(axis=1)).ravel()
    diag = 1.0 - mass
    bad = np.flatnonzero(diag < 0)
    if bad.size:
        r = int(bad[0])
        raise DegenerateNormalizationError(
            f"d={d:g} too small: row {r} has off-diagonal mass {mass[r] * d:g} > d "
            f"({bad.size} offending rows)"
        )
    return TransitionMatrix(n=n, d=float(d), off=off, diag=diag)


@dataclass(frozen=True)
class StationaryResult:
    probs: np.ndarray
    residual: float
    iterations: int


def _check_irreducible(P: TransitionMatrix) -> None:
    support = P.off.copy()
    support.data = (support.data > 0).astype(float)
    support.eliminate_zeros()
    k, labels = connected_components(support, directed=True, connection="strong")
    if k > 1:
        sizes = np.bincount(labels)
        raise ReducibleChainError(
            f"comparison chain is reducible ({k} strongly connected classes, "
            f"smallest has {sizes.min()} items); some items never win or never lose "
            "within their component"
        )


DENSE_LIMIT = 256
STALL_ITERS = 200


def _left_operator(P: TransitionMatrix):
    # Small chains: one dense matvec is far cheaper than sparse overhead.
    if P.n <= DENSE_LIMIT:
        return P.dense().T.copy()
    Pt = (P.off.T + sp.diags(P.diag)).tocsr()
    return Pt


def stationary(P: TransitionMatrix, tol: float = 1e-13,
               max_iters: int = 1_000_000) -> StationaryResult:
    """Left power iteration from the uniform vector.

    Stops once the l1 step is below ``tol`` and the geometric tail bound
    ``step * r / (1 - r)``, with ``r`` the observed contraction of successive
    steps, is too. On slowly mixing chains a small step alone leaves an error
    of order ``step / (1 - lambda_2)``. If rounding noise keeps the bound from
    settling, the iteration stops after ``STALL_ITERS`` steps without a new
    smallest step.
    """
    _check_irreducible(P)
    Pt = _left_operator(P)
    n = P.n
    pi = np.full(n, 1.0 / n)
    step = prev = best = np.inf
    since_best = 0
    it = 0
    done = False
    while it < max_iters:
        it += 1
        nxt = Pt @ pi
        nxt /= nxt.sum()
        prev, step = step, float(np.abs(nxt - pi).sum())
        pi = nxt
        if step < best:
            best, since_best = step, 0
        else:
            since_best += 1
        if step <= tol:
            r = step / prev if prev > 0 else 0.0
            if step == 0.0 or (r < 1.0 and step * r / (1.0 - r) <= tol) or since_best >= STALL_ITERS:
                done = True
                break
    residual = float(np.abs(Pt @ pi - pi).sum())
    if not done:
        raise StationaryConvergenceError(
            f"power iteration did not converge in {max_iters} iterations "
            f"(last step {step:.3e}, residual {residual:.3e})",
            residual=residual, iterations=it,
        )
    if np.any(pi <= 0):
        raise ReducibleChainError("stationary measure has zero entries")
    return StationaryResult(probs=pi, residual=residual, iterations=it)


def theta_from_pi(pi) -> np.ndarray:
    logs = np.log(np.asarray(pi, dtype=float))
    return logs - logs.mean()


def fit_spectral(data: ComparisonDataset, d: float | None = None) -> EstimateReport:
    data.require_connected()
    P = build_transition(data, d)
    res = stationary(P)
    theta = theta_from_pi(res.probs)
    return EstimateReport(
        theta_hat=theta,
        iterations=res.iterations,
        final_grad_norm=res.residual,
        converged=True,
        neg_log_lik=neg_log_likelihood(theta, data),
        estimator="spectral",
        message=f"d={P.d:g}",
    )
