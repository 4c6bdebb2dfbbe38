"""Variance scales, confidence intervals for merits and ranks, and l2 risk constants."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ComparisonDataset, DomainError, UndefinedRatioError, psi_prime

# Acklam's rational approximation to the standard normal quantile.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _acklam(p: float) -> float:
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        return (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    if p > 1.0 - _P_LOW:
        return -_acklam(1.0 - p)
    q = p - 0.5
    r = q * q
    return (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / (
        ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)


def norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def norm_ppf(p: float) -> float:
    """Standard normal quantile.

    Acklam's approximation (relative error about 1e-9) followed by one Halley
    step on ``erfc``, which brings the error to a few ulps.
    """
    p = float(p)
    if not 0.0 < p < 1.0:
        if p == 0.0:
            return -math.inf
        if p == 1.0:
            return math.inf
        raise DomainError("p must lie in [0, 1]")
    x = _acklam(p)
    e = norm_cdf(x) - p
    u = e * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


VARIANTS = ("mle_sample", "mle_deterministic", "spectral_sample", "spectral_deterministic")


@dataclass(frozen=True)
class VarianceProfile:
    """Per-item inverse standard deviations; ``rho_i (est_i - truth_i)`` is ~N(0, 1)."""

    rho: np.ndarray
    variant: str

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise DomainError(f"unknown variant {self.variant!r}")


def _resolve_L(data: ComparisonDataset, L) -> float:
    if L is not None:
        return float(L)
    if data.L is not None:
        return float(data.L)
    if data.count.size and np.all(data.count == data.count[0]):
        return float(data.count[0])
    raise DomainError("heterogeneous comparison counts; pass L explicitly")


def _row_sums(theta: np.ndarray, fn, chunk: int = 512) -> np.ndarray:
    """sum_{j != i} fn(theta_i, theta_j) for every i, over the complete graph."""
    n = theta.size
    out = np.empty(n)
    for start in range(0, n, chunk):
        rows = theta[start:start + chunk, None]
        block = fn(rows, theta[None, :])
        idx = np.arange(block.shape[0])
        block[idx, start + idx] = 0.0
        out[start:start + chunk] = block.sum(axis=1)
    return out


def _check_theta(theta, n):
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (n,):
        raise DomainError(f"theta has shape {theta.shape}, expected ({n},)")
    return theta


def _require_degree(data):
    isolated = np.flatnonzero(data.degrees() == 0)
    if isolated.size:
        raise UndefinedRatioError(f"items with no comparisons: {isolated[:10].tolist()}")


def rho_mle(theta, data: ComparisonDataset, use_sample_graph: bool = True,
            p: float | None = None, L: float | None = None) -> VarianceProfile:
    theta = _check_theta(theta, data.n)
    L = _resolve_L(data, L)
    if use_sample_graph:
        _require_degree(data)
        w = psi_prime(theta[data.i] - theta[data.j])
        info = np.bincount(data.i, weights=w, minlength=data.n) + np.bincount(
            data.j, weights=w, minlength=data.n)
        return VarianceProfile(np.sqrt(L * info), "mle_sample")
    p = data.p if p is None else p
    if p is None or not p > 0:
        raise DomainError("the deterministic variant needs p > 0")
    info = _row_sums(theta, lambda a, b: psi_prime(a - b))
    return VarianceProfile(np.sqrt(p * L * info), "mle_deterministic")


def rho_spectral(theta, data: ComparisonDataset, use_sample_graph: bool = True,
                 p: float | None = None, L: float | None = None) -> VarianceProfile:
    theta = _check_theta(theta, data.n)
    L = _resolve_L(data, L)
    # The ratio is invariant to a common rescaling of e^theta.
    e = np.exp(theta - theta.max())
    if use_sample_graph:
        _require_degree(data)
        gap = theta[data.i] - theta[data.j]
        s = e[data.i] + e[data.j]
        w = psi_prime(gap)
        num = np.bincount(data.i, weights=s * w, minlength=data.n) + np.bincount(
            data.j, weights=s * w, minlength=data.n)
        den = np.bincount(data.i, weights=s * s * w, minlength=data.n) + np.bincount(
            data.j, weights=s * s * w, minlength=data.n)
        return VarianceProfile(np.sqrt(L * num ** 2 / den), "spectral_sample")
    p = data.p if p is None else p
    if p is None or not p > 0:
        raise DomainError("the deterministic variant needs p > 0")
    num, den = _spectral_sums(theta)
    # Replacing A_ij by p scales the numerator by p^2 and the denominator by p.
    return VarianceProfile(np.sqrt(p * L * num ** 2 / den), "spectral_deterministic")


def _spectral_sums(theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Complete-graph sums of (e^a + e^b) psi' and (e^a + e^b)^2 psi'."""
    top = theta.max()

    def weight(a, b):
        return np.exp(a - top) + np.exp(b - top)

    num = _row_sums(theta, lambda a, b: weight(a, b) * psi_prime(a - b))
    den = _row_sums(theta, lambda a, b: weight(a, b) ** 2 * psi_prime(a - b))
    return num, den


def z_quantile(alpha: float) -> float:
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie in (0, 1)")
    return norm_ppf(1.0 - alpha / 2.0)


def ci_target(theta_hat, rho: VarianceProfile, target: int, alpha: float) -> tuple[float, float]:
    """Two-sided asymptotic (1 - alpha) interval for one merit: theta_t +- z / rho_t."""
    half = z_quantile(alpha) / float(rho.rho[target])
    centre = float(np.asarray(theta_hat, dtype=float)[target])
    return centre - half, centre + half


def simultaneous_intervals(theta_hat, rho: VarianceProfile, c0: float = 0.1) -> np.ndarray:
    """Half-widths tau_i = (1 + c0) sqrt(2 log n) / rho_i."""
    if c0 < 0:
        raise DomainError("c0 must be nonnegative")
    n = np.asarray(theta_hat).size
    if n < 2:
        raise DomainError("need at least two items")
    return (1.0 + c0) * np.sqrt(2.0 * math.log(n) / rho.rho ** 2)


@dataclass(frozen=True)
class IntervalSet:
    target: int
    target_interval: tuple[float, float]
    lower: np.ndarray
    upper: np.ndarray
    alpha: float
    c0: float

    @property
    def n(self) -> int:
        return int(self.lower.size)

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "target_interval": list(self.target_interval),
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
            "alpha": self.alpha,
            "c0": self.c0,
        }


def build_intervals(theta_hat, rho: VarianceProfile, target: int = 0, alpha: float = 0.05,
                    c0: float = 0.1) -> IntervalSet:
    theta_hat = np.asarray(theta_hat, dtype=float)
    tau = simultaneous_intervals(theta_hat, rho, c0)
    return IntervalSet(
        target=int(target),
        target_interval=ci_target(theta_hat, rho, target, alpha),
        lower=theta_hat - tau,
        upper=theta_hat + tau,
        alpha=float(alpha),
        c0=float(c0),
    )


@dataclass(frozen=True)
class RankInterval:
    n1: int
    n2: int
    n: int

    @property
    def interval(self) -> tuple[int, int]:
        return self.n1 + 1, self.n - self.n2

    def __contains__(self, rank: int) -> bool:
        lo, hi = self.interval
        return lo <= rank <= hi

    def to_dict(self) -> dict:
        return {"n1": self.n1, "n2": self.n2, "interval": list(self.interval)}


def rank_ci(intervals: IntervalSet) -> RankInterval:
    """Rank interval [n1 + 1, n - n2] from strict separation of intervals.

    n1 counts items whose interval lies entirely above the target's, n2 those
    entirely below. Touching endpoints count as overlap.
    """
    lo_t, hi_t = intervals.target_interval
    others = np.ones(intervals.n, dtype=bool)
    others[intervals.target] = False
    n1 = int(np.count_nonzero(others & (hi_t < intervals.lower)))
    n2 = int(np.count_nonzero(others & (intervals.upper < lo_t)))
    return RankInterval(n1=n1, n2=n2, n=intervals.n)


def true_rank(theta_star, target: int) -> int:
    """1 + number of items with strictly larger merit (ties resolved in the target's favour)."""
    theta_star = np.asarray(theta_star, dtype=float)
    return 1 + int(np.count_nonzero(theta_star > theta_star[target]))


def _check_pL(p, L, n):
    if n < 2:
        raise DomainError("need at least two items")
    if not p > 0 or L < 1:
        raise DomainError("need p > 0 and L >= 1")


def l2_constant_mle(theta_star, p: float, L: float) -> float:
    """(1 / pL) sum_i 1 / sum_{k != i} psi'(theta_i - theta_k)."""
    theta = np.asarray(theta_star, dtype=float)
    _check_pL(p, L, theta.size)
    info = _row_sums(theta, lambda a, b: psi_prime(a - b))
    return float(np.sum(1.0 / info) / (p * L))


def l2_constant_spectral(theta_star, p: float, L: float) -> float:
    theta = np.asarray(theta_star, dtype=float)
    _check_pL(p, L, theta.size)
    num, den = _spectral_sums(theta)
    return float(np.sum(den / num ** 2) / (p * L))
