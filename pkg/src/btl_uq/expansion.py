"""First-order main terms of both estimators and their empirical remainders."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    ComparisonDataset, DomainError, UndefinedRatioError, center, merit_to_pi, psi, psi_prime,
    win_residual,
)


def _residuals(data: ComparisonDataset, theta_star):
    theta_star = np.asarray(theta_star, dtype=float)
    if theta_star.shape != (data.n,):
        raise DomainError(f"theta_star has shape {theta_star.shape}, expected ({data.n},)")
    gap = theta_star[data.i] - theta_star[data.j]
    return theta_star, gap, win_residual(data.ybar, gap)


def _require_degree(data: ComparisonDataset) -> None:
    isolated = np.flatnonzero(data.degrees() == 0)
    if isolated.size:
        raise UndefinedRatioError(f"items with no comparisons: {isolated[:10].tolist()}")


def _antisym_sum(data, w_edge, n):
    # Edge term enters item i with +w and item j with -w.
    return np.bincount(data.i, weights=w_edge, minlength=n) - np.bincount(
        data.j, weights=w_edge, minlength=n
    )


def _sym_sum(data, w_edge, n):
    return np.bincount(data.i, weights=w_edge, minlength=n) + np.bincount(
        data.j, weights=w_edge, minlength=n
    )


def mle_score_terms(data: ComparisonDataset, theta_star) -> tuple[np.ndarray, np.ndarray]:
    """(b, d): score and local Fisher information of each item at the truth."""
    _, gap, res = _residuals(data, theta_star)
    b = _antisym_sum(data, res, data.n)
    d = _sym_sum(data, psi_prime(gap), data.n)
    return b, d


def mle_main_term(data: ComparisonDataset, theta_star) -> np.ndarray:
    _require_degree(data)
    b, d = mle_score_terms(data, theta_star)
    return b / d


def spectral_score_terms(data: ComparisonDataset, theta_star) -> tuple[np.ndarray, np.ndarray]:
    """(b~, d~) for the spectral estimator, weighted by the population measure."""
    theta_star, gap, res = _residuals(data, theta_star)
    pi = merit_to_pi(theta_star)
    b = _antisym_sum(data, (pi[data.i] + pi[data.j]) * res, data.n)
    # psi(theta_j - theta_i) for item i, psi(theta_i - theta_j) for item j.
    lose = np.bincount(data.i, weights=psi(-gap), minlength=data.n) + np.bincount(
        data.j, weights=psi(gap), minlength=data.n
    )
    return b, pi * lose


def spectral_main_term(data: ComparisonDataset, theta_star) -> np.ndarray:
    _require_degree(data)
    b, d = spectral_score_terms(data, theta_star)
    return b / d


@dataclass(frozen=True)
class ExpansionReport:
    main_term: np.ndarray
    delta: np.ndarray
    scaled_sup: float
    scaled_l2: float

    def to_dict(self) -> dict:
        return {
            "main_term": self.main_term.tolist(),
            "delta": self.delta.tolist(),
            "scaled_sup": self.scaled_sup,
            "scaled_l2": self.scaled_l2,
        }


def remainder_report(estimate, theta_star, main_term, n: int, p: float, L: float) -> ExpansionReport:
    """delta = center(estimate - theta_star - main_term), with its scaled norms.

    ``scaled_sup = |delta|_inf sqrt(npL)`` and ``scaled_l2 = |delta|_2 sqrt(pL)``;
    both tend to zero when the first-order expansion is sharp.
    """
    estimate, theta_star, main_term = (np.asarray(v, dtype=float) for v in (estimate, theta_star, main_term))
    if not (estimate.shape == theta_star.shape == main_term.shape == (n,)):
        raise DomainError("estimate, theta_star and main_term must all have length n")
    delta = center(estimate - theta_star - main_term)
    return ExpansionReport(
        main_term=main_term,
        delta=delta,
        scaled_sup=float(np.max(np.abs(delta)) * math.sqrt(n * p * L)),
        scaled_l2=float(np.linalg.norm(delta) * math.sqrt(p * L)),
    )
