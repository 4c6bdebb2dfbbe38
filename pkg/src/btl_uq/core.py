"""Logistic primitives, the comparison dataset model, and dataset validation."""

from __future__ import annotations

import csv
import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp


class BTLError(Exception):
    """Base class for every error raised by this package."""


class DomainError(BTLError, ValueError):
    pass


class DatasetFormatError(BTLError, ValueError):
    pass


class EstimatorUndefinedError(BTLError):
    """The requested estimator does not exist for this dataset."""


class DisconnectedGraphError(EstimatorUndefinedError):
    pass


class UndefinedRatioError(EstimatorUndefinedError):
    pass


def _as_finite(x, name="x"):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def _scalarize(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


def psi(x):
    """Logistic function e^x / (1 + e^x), stable for large |x|."""
    arr = _as_finite(x)
    e = np.exp(-np.abs(arr))
    out = np.where(arr >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return _scalarize(out, x)


def psi_prime(x):
    """Derivative of the logistic function, psi(x) * psi(-x)."""
    arr = _as_finite(x)
    e = np.exp(-np.abs(arr))
    out = e / (1.0 + e) ** 2
    return _scalarize(out, x)


def log_inv_psi(x):
    """log(1 / psi(x)) = log(1 + e^{-x}), i.e. softplus(-x)."""
    return np.logaddexp(0.0, -np.asarray(x, dtype=float))


def win_residual(ybar, x):
    """ybar - psi(x), written as ybar psi(-x) - (1 - ybar) psi(x) to avoid cancellation."""
    ybar = np.asarray(ybar, dtype=float)
    return ybar * psi(-x) - (1.0 - ybar) * psi(x)


def center(values) -> np.ndarray:
    """Subtract the arithmetic mean so the result sums to zero."""
    arr = _as_finite(values, "values").ravel()
    if arr.size == 0:
        raise DomainError("cannot center an empty vector")
    return arr - arr.mean()


def merit_to_pi(theta) -> np.ndarray:
    """Softmax of the merit vector (the population stationary measure)."""
    arr = _as_finite(theta, "theta").ravel()
    w = np.exp(arr - arr.max())
    return w / w.sum()


def dynamic_range(theta) -> float:
    arr = np.asarray(theta, dtype=float)
    return float(arr.max() - arr.min())


def in_parameter_space(theta, kappa: float, atol: float = 1e-9) -> bool:
    """Membership in Theta(kappa): centered and spread at most kappa."""
    arr = np.asarray(theta, dtype=float)
    return abs(arr.sum()) <= atol and dynamic_range(arr) <= kappa + atol


@dataclass(frozen=True)
class ComparisonDataset:
    """Aggregated pairwise comparisons on an undirected graph.

    Edges are stored once, oriented ``i < j``. ``ybar[e]`` is the fraction of
    the ``count[e]`` comparisons on edge ``e`` won by ``i[e]``; the reverse
    fraction is always derived as ``1 - ybar``.

    Construction only normalizes array types. Call :func:`validate_dataset`
    to diagnose, or :meth:`require_valid` to refuse malformed data.
    """

    n: int
    i: np.ndarray
    j: np.ndarray
    ybar: np.ndarray
    count: np.ndarray
    p: float | None = None
    L: int | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        i = np.asarray(self.i, dtype=np.int64).ravel()
        j = np.asarray(self.j, dtype=np.int64).ravel()
        ybar = np.asarray(self.ybar, dtype=float).ravel()
        count = np.asarray(self.count, dtype=np.int64).ravel()
        if not (i.size == j.size == ybar.size == count.size):
            raise DatasetFormatError("edge arrays must have equal length")
        if int(self.n) < 1:
            raise DatasetFormatError("n must be positive")
        for name, arr in (("i", i), ("j", j), ("ybar", ybar), ("count", count)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "n", int(self.n))

    @classmethod
    def from_wins(cls, n, i, j, wins, count, **kw) -> ComparisonDataset:
        wins = np.asarray(wins, dtype=float)
        count = np.asarray(count, dtype=np.int64)
        return cls(n=n, i=i, j=j, ybar=wins / count, count=count, **kw)

    @property
    def n_edges(self) -> int:
        return int(self.i.size)

    @property
    def wins(self) -> np.ndarray:
        return np.rint(self.ybar * self.count).astype(np.int64)

    def degrees(self) -> np.ndarray:
        return np.bincount(self.i, minlength=self.n) + np.bincount(self.j, minlength=self.n)

    def adjacency(self) -> sp.csr_matrix:
        """Symmetric 0/1 adjacency matrix in CSR form."""
        ones = np.ones(2 * self.n_edges)
        rows = np.concatenate([self.i, self.j])
        cols = np.concatenate([self.j, self.i])
        return sp.csr_matrix((ones, (rows, cols)), shape=(self.n, self.n))

    def require_valid(self) -> ValidationReport:
        report = validate_dataset(self)
        if not report.well_formed:
            raise DatasetFormatError("; ".join(report.problems()))
        return report

    def require_connected(self) -> None:
        report = self.require_valid()
        if not report.connected:
            raise DisconnectedGraphError(
                f"comparison graph is disconnected ({report.n_components} components); "
                "the estimator is undefined"
            )

    def permuted(self, perm) -> ComparisonDataset:
        """Relabel item ``k`` as ``perm[k]``, keeping the ``i < j`` orientation."""
        perm = np.asarray(perm, dtype=np.int64)
        a, b = perm[self.i], perm[self.j]
        swap = a > b
        return ComparisonDataset(
            n=self.n,
            i=np.where(swap, b, a),
            j=np.where(swap, a, b),
            ybar=np.where(swap, 1.0 - self.ybar, self.ybar),
            count=self.count,
            p=self.p,
            L=self.L,
        )


@dataclass
class ValidationReport:
    n: int
    degrees: np.ndarray
    connected: bool
    n_components: int
    duplicate_pairs: list = field(default_factory=list)
    self_loops: list = field(default_factory=list)
    misoriented: list = field(default_factory=list)
    out_of_bounds: list = field(default_factory=list)
    range_violations: list = field(default_factory=list)
    count_violations: list = field(default_factory=list)

    @property
    def well_formed(self) -> bool:
        return not self.problems()

    @property
    def ok(self) -> bool:
        return self.well_formed and self.connected

    def problems(self) -> list[str]:
        out = []
        for label, items in (
            ("duplicate pairs", self.duplicate_pairs),
            ("self loops", self.self_loops),
            ("edges with i > j", self.misoriented),
            ("item index out of range", self.out_of_bounds),
            ("win fraction outside [0, 1]", self.range_violations),
            ("comparison count below 1", self.count_violations),
        ):
            if items:
                out.append(f"{label}: {items[:5]}{' ...' if len(items) > 5 else ''}")
        return out

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "degrees": self.degrees.tolist(),
            "connected": self.connected,
            "n_components": self.n_components,
            "problems": self.problems(),
        }


def _bfs_components(n: int, adj: sp.csr_matrix) -> int:
    seen = np.zeros(n, dtype=bool)
    indptr, indices = adj.indptr, adj.indices
    components = 0
    for start in range(n):
        if seen[start]:
            continue
        components += 1
        seen[start] = True
        queue = deque([start])
        while queue:
            u = queue.popleft()
            nbrs = indices[indptr[u]:indptr[u + 1]]
            fresh = nbrs[~seen[nbrs]]
            seen[fresh] = True
            queue.extend(fresh.tolist())
    return components


def validate_dataset(data: ComparisonDataset) -> ValidationReport:
    """Diagnose a dataset without raising; every finding goes in the report."""
    n, i, j = data.n, data.i, data.j
    in_bounds = (i >= 0) & (i < n) & (j >= 0) & (j < n)
    out_of_bounds = np.flatnonzero(~in_bounds).tolist()
    self_loops = np.flatnonzero(in_bounds & (i == j)).tolist()
    misoriented = np.flatnonzero(in_bounds & (i > j)).tolist()

    lo, hi = np.minimum(i, j), np.maximum(i, j)
    keys = lo * n + hi
    uniq, counts = np.unique(keys, return_counts=True)
    dup_keys = uniq[counts > 1]
    duplicate_pairs = [(int(k // n), int(k % n)) for k in dup_keys]

    ybar = data.ybar
    range_violations = np.flatnonzero(~((ybar >= 0.0) & (ybar <= 1.0))).tolist()
    count_violations = np.flatnonzero(data.count < 1).tolist()

    good = in_bounds & (i != j)
    rows = np.concatenate([i[good], j[good]])
    cols = np.concatenate([j[good], i[good]])
    adj = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
    degrees = np.asarray((adj > 0).sum(axis=1)).ravel()
    n_components = _bfs_components(n, adj)

    return ValidationReport(
        n=n,
        degrees=np.asarray(degrees, dtype=np.int64),
        connected=n_components == 1,
        n_components=n_components,
        duplicate_pairs=duplicate_pairs,
        self_loops=self_loops,
        misoriented=misoriented,
        out_of_bounds=out_of_bounds,
        range_violations=range_violations,
        count_violations=count_violations,
    )


CSV_HEADER = ["i", "j", "wins", "count"]


def write_dataset(data: ComparisonDataset, path, sidecar: dict | None = None) -> None:
    """Write ``i,j,wins,count`` CSV; optional metadata goes to ``<path>.json``."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for a, b, w, c in zip(data.i.tolist(), data.j.tolist(), data.wins.tolist(), data.count.tolist()):
            writer.writerow([a, b, w, c])
    meta = {"n": data.n, "p": data.p, "L": data.L}
    meta.update(sidecar or {})
    if sidecar is not None or data.p is not None:
        sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def read_dataset(path, n: int | None = None) -> ComparisonDataset:
    """Read a dataset CSV, picking up ``n``/``p``/``L`` from the JSON sidecar if present."""
    path = Path(path)
    meta = {}
    if sidecar_path(path).exists():
        meta = json.loads(sidecar_path(path).read_text())
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != CSV_HEADER:
            raise DatasetFormatError(f"expected header {','.join(CSV_HEADER)}, got {header}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                a, b, w, c = (int(v) for v in row)
            except ValueError as exc:
                raise DatasetFormatError(f"line {lineno}: {exc}") from None
            if not a < b:
                raise DatasetFormatError(f"line {lineno}: require i < j, got {a},{b}")
            if c < 1:
                raise DatasetFormatError(f"line {lineno}: count must be >= 1")
            rows.append((a, b, w, c))
    arr = np.array(rows, dtype=np.int64).reshape(-1, 4)
    if n is None:
        n = meta.get("n") or (int(arr[:, :2].max()) + 1 if arr.size else 1)
    counts = arr[:, 3]
    homogeneous = meta.get("L")
    if homogeneous is None and counts.size and np.all(counts == counts[0]):
        homogeneous = int(counts[0])
    return ComparisonDataset.from_wins(
        n=int(n),
        i=arr[:, 0],
        j=arr[:, 1],
        wins=arr[:, 2],
        count=counts,
        p=meta.get("p"),
        L=homogeneous,
        meta=meta,
    )
