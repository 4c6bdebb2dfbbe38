"""Constrained maximum likelihood for the BTL model via damped Newton.

The likelihood is the per-edge normalized one: each compared pair contributes
``ybar_ij log 1/psi(theta_i - theta_j) + ybar_ji log 1/psi(theta_j - theta_i)``
regardless of its comparison count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .core import ComparisonDataset, DomainError, center, log_inv_psi, psi_prime, win_residual

EPS = np.finfo(float).eps
DIVERGENCE_BOUND = 50.0


@dataclass(frozen=True)
class MleOptions:
    grad_tol: float = 1e-10
    max_iters: int = 100
    initial: np.ndarray | None = None
    step_tol: float = 1e-6
    max_halvings: int = 60

    def __post_init__(self):
        if not self.grad_tol > 0:
            raise DomainError("grad_tol must be positive")
        if self.max_iters < 1:
            raise DomainError("max_iters must be at least 1")


@dataclass
class EstimateReport:
    """Fitted merits plus solver diagnostics.

    ``final_grad_norm`` is the estimator's stopping statistic: the sup-norm of
    the likelihood gradient for the MLE, the l1 stationarity residual of the
    power iteration for the spectral estimator.
    """

    theta_hat: np.ndarray
    iterations: int
    final_grad_norm: float
    converged: bool
    neg_log_lik: float
    estimator: str = "mle"
    message: str = ""
    history: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "estimator": self.estimator,
            "theta_hat": [float(v) for v in self.theta_hat],
            "iterations": int(self.iterations),
            "final_grad_norm": float(self.final_grad_norm),
            "converged": bool(self.converged),
            "neg_log_lik": float(self.neg_log_lik),
            "message": self.message,
        }


def _edge_gaps(theta, data: ComparisonDataset) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (data.n,):
        raise DomainError(f"theta has shape {theta.shape}, expected ({data.n},)")
    if not np.all(np.isfinite(theta)):
        raise DomainError("theta must be finite")
    return theta[data.i] - theta[data.j]


def neg_log_likelihood(theta, data: ComparisonDataset) -> float:
    x = _edge_gaps(theta, data)
    y = data.ybar
    # ybar in {0, 1} zeroes one term; softplus stays finite so 0 * term == 0.
    return float(np.sum(y * log_inv_psi(x) + (1.0 - y) * log_inv_psi(-x)))


def gradient(theta, data: ComparisonDataset) -> np.ndarray:
    x = _edge_gaps(theta, data)
    r = win_residual(data.ybar, x)
    return np.bincount(data.j, weights=r, minlength=data.n) - np.bincount(
        data.i, weights=r, minlength=data.n
    )


def hessian(theta, data: ComparisonDataset) -> np.ndarray:
    """Dense Hessian of the negative log-likelihood: a weighted graph Laplacian."""
    x = _edge_gaps(theta, data)
    w = psi_prime(x)
    n = data.n
    H = np.zeros((n, n))
    H[data.i, data.j] = -w
    H[data.j, data.i] = -w
    H[np.diag_indices(n)] = np.bincount(data.i, weights=w, minlength=n) + np.bincount(
        data.j, weights=w, minlength=n
    )
    return H


def _newton_step(H: np.ndarray, g: np.ndarray) -> np.ndarray:
    n = H.shape[0]
    scale = np.trace(H) / n
    # The rank-one 11^T term lifts the Laplacian's null direction; because g
    # is orthogonal to 1 the solution stays in the centered subspace.
    M = H + (1e-12 * scale) * np.eye(n) + (scale / n) * np.ones((n, n))
    try:
        step = la.cho_solve(la.cho_factor(M, lower=True, check_finite=False), -g,
                            check_finite=False)
    except la.LinAlgError:
        step = la.lstsq(M, -g)[0]
    return step - step.mean()


def fit_mle(data: ComparisonDataset, opts: MleOptions | None = None) -> EstimateReport:
    """Minimize the negative log-likelihood over sum-zero merit vectors."""
    opts = opts or MleOptions()
    data.require_connected()
    n = data.n

    theta = np.zeros(n) if opts.initial is None else center(opts.initial)
    f = neg_log_likelihood(theta, data)
    g = gradient(theta, data)
    gnorm = float(np.max(np.abs(g)))
    history = [f]
    message = ""
    it = 0
    converged = False
    last_step = np.inf

    while True:
        # A small gradient alone is not enough: when the MLE does not exist the
        # gradient decays along a ray while Newton steps stay of order one.
        if gnorm <= opts.grad_tol and last_step <= opts.step_tol:
            converged = True
            break
        if it >= opts.max_iters:
            break
        step = _newton_step(hessian(theta, data), g)
        if gnorm <= opts.grad_tol and np.max(np.abs(step)) <= opts.step_tol:
            converged = True
            break
        it += 1
        # Objective changes below this floor are rounding noise; there the
        # gradient norm decides acceptance.
        f_noise = 64 * EPS * max(abs(f), 1.0)
        t = 1.0
        accepted = False
        for _ in range(opts.max_halvings):
            cand = center(theta + t * step)
            f_new = neg_log_likelihood(cand, data)
            if f_new < f:
                accepted = True
                break
            if f_new - f <= f_noise:
                g_new = gradient(cand, data)
                if np.max(np.abs(g_new)) < gnorm:
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            message = "line search failed to make progress"
            break
        last_step = float(np.max(np.abs(cand - theta)))
        theta, f = cand, f_new
        g = gradient(theta, data)
        gnorm = float(np.max(np.abs(g)))
        history.append(f)
        if np.max(np.abs(theta)) > DIVERGENCE_BOUND:
            message = "merits diverging; MLE likely does not exist for this data"
            break

    if not converged and not message:
        message = f"max_iters={opts.max_iters} reached"
    return EstimateReport(
        theta_hat=theta,
        iterations=it,
        final_grad_norm=gnorm,
        converged=converged,
        neg_log_lik=f,
        estimator="mle",
        message=message,
        history=history,
    )
