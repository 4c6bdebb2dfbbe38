"""Seeded generation of merits, Erdos-Renyi comparison graphs and BTL outcomes."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import ComparisonDataset, DomainError, center, psi

MASK64 = (1 << 64) - 1


def substream_seed(master: int, *keys) -> int:
    """Derive an independent 64-bit seed as ``master XOR hash(keys)``.

    The hash is an unkeyed BLAKE2b digest of the ``repr`` of the keys, so the
    same (master, keys) pair gives the same seed on every platform and in any
    execution order.
    """
    digest = hashlib.blake2b(repr(keys).encode(), digest_size=8).digest()
    return (int(master) & MASK64) ^ int.from_bytes(digest, "little")


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(int(seed) & MASK64)


def polylog_p(n: int, exponent: float) -> float:
    """Edge probability (log n)^exponent / n, capped at 1."""
    return min(1.0, math.log(n) ** exponent / n)


def resolve_p(rule, n: int) -> float:
    """Turn a p-rule (``"polylog:3"``, ``"0.2"`` or a number) into a probability."""
    if isinstance(rule, (int, float)):
        p = float(rule)
    elif isinstance(rule, str) and rule.startswith("polylog:"):
        p = polylog_p(n, float(rule.split(":", 1)[1]))
    else:
        try:
            p = float(rule)
        except (TypeError, ValueError):
            raise DomainError(f"unrecognised p-rule {rule!r}") from None
    if not 0.0 < p <= 1.0:
        raise DomainError(f"p must lie in (0, 1], got {p} from rule {rule!r}")
    return p


@dataclass(frozen=True)
class SimConfig:
    n: int
    p: float
    L: int = 1
    kappa: float = 2.0
    merit_law: str = "uniform"
    merits: Sequence[float] | None = field(default=None, compare=False)
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise DomainError("n must be at least 2")
        if not 0.0 < self.p <= 1.0:
            raise DomainError("p must lie in (0, 1]")
        if self.L < 1:
            raise DomainError("L must be at least 1")
        if self.kappa < 0:
            raise DomainError("kappa must be nonnegative")
        if self.merit_law not in ("uniform", "fixed"):
            raise DomainError(f"unknown merit_law {self.merit_law!r}")
        if self.merit_law == "fixed":
            if self.merits is None or len(self.merits) != self.n:
                raise DomainError("merit_law='fixed' needs a merits vector of length n")


def sample_merits(cfg: SimConfig, seed=None) -> tuple[np.ndarray, np.ndarray]:
    """Draw merits; returns (raw, centered).

    The raw vector drives data generation. The centered copy is the estimand.
    """
    if cfg.merit_law == "fixed":
        raw = np.asarray(cfg.merits, dtype=float).copy()
    elif cfg.kappa == 0:
        raw = np.zeros(cfg.n)
    else:
        rng = make_rng(cfg.seed if seed is None else seed)
        raw = rng.uniform(0.0, cfg.kappa, size=cfg.n)
    return raw, center(raw)


def sample_er_graph(n: int, p: float, seed) -> tuple[np.ndarray, np.ndarray]:
    """Erdos-Renyi G(n, p) edge list as ``(i, j)`` arrays with ``i < j``."""
    if n < 2:
        raise DomainError("n must be at least 2")
    rng = make_rng(seed)
    if p >= 1.0:
        return np.triu_indices(n, k=1)
    rows, cols = [], []
    # Row-wise draws keep memory at O(n) and the stream layout fixed.
    for a in range(n - 1):
        hit = np.flatnonzero(rng.random(n - a - 1) < p)
        if hit.size:
            rows.append(np.full(hit.size, a, dtype=np.int64))
            cols.append(hit + a + 1)
    if not rows:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty.copy()
    return np.concatenate(rows), np.concatenate(cols)


def sample_comparisons(edges, theta_raw, L: int, seed, n: int | None = None,
                       p: float | None = None) -> ComparisonDataset:
    """wins_ij ~ Binomial(L, psi(theta_i - theta_j)) independently per edge."""
    i, j = (np.asarray(e, dtype=np.int64) for e in edges)
    if i.size == 0:
        raise DomainError("edge set is empty")
    theta_raw = np.asarray(theta_raw, dtype=float)
    rng = make_rng(seed)
    prob = psi(theta_raw[i] - theta_raw[j])
    wins = rng.binomial(L, prob)
    return ComparisonDataset.from_wins(
        n=theta_raw.size if n is None else n,
        i=i, j=j, wins=wins, count=np.full(i.size, L, dtype=np.int64), p=p, L=L,
    )


def noiseless_dataset(edges, theta, n: int | None = None, p: float | None = None,
                      L: int = 1) -> ComparisonDataset:
    """Dataset with ybar_ij = psi(theta_i - theta_j) exactly (population values)."""
    i, j = (np.asarray(e, dtype=np.int64) for e in edges)
    theta = np.asarray(theta, dtype=float)
    return ComparisonDataset(
        n=theta.size if n is None else n, i=i, j=j,
        ybar=psi(theta[i] - theta[j]), count=np.full(i.size, L, dtype=np.int64), p=p, L=L,
    )


@dataclass(frozen=True)
class SimDraw:
    theta_raw: np.ndarray
    theta_star: np.ndarray
    data: ComparisonDataset
    cfg: SimConfig


def simulate(cfg: SimConfig, *keys, merits: tuple[np.ndarray, np.ndarray] | None = None) -> SimDraw:
    """One synthetic dataset, a pure function of ``(cfg, keys)``.

    ``keys`` (e.g. a replication index) select independent substreams of
    ``cfg.seed``. Pass ``merits`` to hold the truth fixed across draws.
    """
    if merits is None:
        merits = sample_merits(cfg, substream_seed(cfg.seed, "merits", *keys))
    raw, star = merits
    edges = sample_er_graph(cfg.n, cfg.p, substream_seed(cfg.seed, "graph", *keys))
    if edges[0].size == 0:
        raise DomainError("sampled comparison graph has no edges")
    data = sample_comparisons(edges, raw, cfg.L, substream_seed(cfg.seed, "outcomes", *keys),
                              n=cfg.n, p=cfg.p)
    return SimDraw(theta_raw=raw, theta_star=star, data=data, cfg=cfg)
