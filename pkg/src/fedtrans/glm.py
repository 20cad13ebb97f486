"""Canonical-link GLM losses on indexed subsets of a partitioned dataset.

All losses here are unnormalized sums over rows; callers divide by the
relevant sample count.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

_LOGIT_CUT = 35.0
_MU_EPS = 1e-15


def _logistic_psi(t):
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    hi = t > _LOGIT_CUT
    lo = t < -_LOGIT_CUT
    mid = ~(hi | lo)
    out[hi] = t[hi]
    out[lo] = np.exp(t[lo])
    out[mid] = np.log1p(np.exp(t[mid]))
    return out


def _logistic_mean(t):
    t = np.asarray(t, dtype=float)
    mu = 0.5 * (1.0 + np.tanh(0.5 * t))
    return np.clip(mu, _MU_EPS, 1.0 - _MU_EPS)


def _logistic_var(t):
    mu = _logistic_mean(t)
    return mu * (1.0 - mu)


@dataclass(frozen=True)
class GlmFamily:
    """Cumulant function of a canonical-link GLM and its two derivatives."""

    name: str
    psi: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    psi_dot: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    psi_ddot: Callable[[np.ndarray], np.ndarray] = field(repr=False)

    def check_response(self, y):
        y = np.asarray(y, dtype=float)
        if not np.all(np.isfinite(y)):
            raise ValueError("response contains non-finite values")
        if self.name == "logistic" and not np.all((y == 0) | (y == 1)):
            raise ValueError("logistic response must be coded 0/1")
        return y


GAUSSIAN = GlmFamily(
    "gaussian",
    psi=lambda t: 0.5 * np.square(np.asarray(t, dtype=float)),
    psi_dot=lambda t: np.asarray(t, dtype=float).copy(),
    psi_ddot=lambda t: np.ones_like(np.asarray(t, dtype=float)),
)

LOGISTIC = GlmFamily(
    "logistic", psi=_logistic_psi, psi_dot=_logistic_mean, psi_ddot=_logistic_var
)

FAMILIES = {"gaussian": GAUSSIAN, "logistic": LOGISTIC}


def get_family(family) -> GlmFamily:
    if isinstance(family, GlmFamily):
        return family
    try:
        return FAMILIES[family]
    except KeyError:
        raise ValueError(f"unknown family {family!r}; expected one of {sorted(FAMILIES)}")


@dataclass
class PartitionedDataset:
    """Rows of a design split into (site, population) cells.

    ``site_of`` holds site ids in 1..M and ``pop_of`` population ids in 0..K,
    population 0 being the target.  Column 0 of ``X`` is the intercept when
    the caller includes one.
    """

    X: np.ndarray
    y: np.ndarray
    site_of: np.ndarray
    pop_of: np.ndarray

    def __post_init__(self):
        self.X = np.ascontiguousarray(np.atleast_2d(np.asarray(self.X, dtype=float)))
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        self.site_of = np.asarray(self.site_of, dtype=np.int64).reshape(-1)
        self.pop_of = np.asarray(self.pop_of, dtype=np.int64).reshape(-1)
        n = self.X.shape[0]
        if not (len(self.y) == len(self.site_of) == len(self.pop_of) == n):
            raise ValueError(
                f"row counts disagree: X has {n}, y {len(self.y)}, "
                f"site_of {len(self.site_of)}, pop_of {len(self.pop_of)}"
            )
        if self.X.shape[1] < 1:
            raise ValueError("design needs at least one column")
        if n and (self.site_of.min() < 1 or self.pop_of.min() < 0):
            raise ValueError("site ids start at 1 and population ids at 0")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def sites(self) -> list[int]:
        return sorted(int(m) for m in np.unique(self.site_of))

    @property
    def populations(self) -> list[int]:
        return sorted(int(k) for k in np.unique(self.pop_of))

    @property
    def n_sites(self) -> int:
        return int(self.site_of.max()) if self.n else 0

    @property
    def n_sources(self) -> int:
        return int(self.pop_of.max()) if self.n else 0

    def cell(self, site: int, pop: int) -> np.ndarray:
        """Row indices of cell (site, pop), ascending."""
        return np.flatnonzero((self.site_of == site) & (self.pop_of == pop))

    def population_rows(self, pop: int) -> np.ndarray:
        """Rows of one population ordered by site, then row index."""
        idx = np.flatnonzero(self.pop_of == pop)
        return idx[np.argsort(self.site_of[idx], kind="stable")]

    def site_rows(self, site: int) -> np.ndarray:
        return np.flatnonzero(self.site_of == site)

    def cell_count(self, site: int, pop: int) -> int:
        return int(np.count_nonzero((self.site_of == site) & (self.pop_of == pop)))

    def pop_count(self, pop: int) -> int:
        return int(np.count_nonzero(self.pop_of == pop))

    def subset(self, rows) -> "PartitionedDataset":
        rows = np.asarray(rows, dtype=np.int64)
        return PartitionedDataset(
            self.X[rows], self.y[rows], self.site_of[rows], self.pop_of[rows]
        )


def _rows(data: PartitionedDataset, subset) -> np.ndarray:
    if subset is None:
        return np.arange(data.n)
    subset = np.asarray(subset)
    if subset.dtype == bool:
        return np.flatnonzero(subset)
    return subset.astype(np.int64, copy=False)


def _check_coef(data: PartitionedDataset, b) -> np.ndarray:
    b = np.asarray(b, dtype=float).reshape(-1)
    if b.shape[0] != data.p:
        raise ValueError(f"coefficient length {b.shape[0]} does not match p={data.p}")
    return b


def _site_blocks(data: PartitionedDataset, rows: np.ndarray):
    # canonical order: sites ascending, rows ascending within a site
    rows = np.sort(rows)
    sites = data.site_of[rows]
    for m in np.unique(sites):
        yield rows[sites == m]


# Row-level kernels shared by the dataset functions and by the sites.

def nll_rows(family: GlmFamily, X, y, b) -> float:
    eta = X @ b
    return float(np.sum(family.psi(eta) - y * eta))


def grad_rows(family: GlmFamily, X, y, b) -> np.ndarray:
    eta = X @ b
    return X.T @ (family.psi_dot(eta) - y)


def hess_rows(family: GlmFamily, X, b) -> np.ndarray:
    w = family.psi_ddot(X @ b)
    H = (X * w[:, None]).T @ X
    # exact symmetry
    return np.triu(H) + np.triu(H, 1).T


def neg_log_lik(family: GlmFamily, data: PartitionedDataset, subset, b) -> float:
    """Sum of psi(x'b) - y x'b over ``subset`` (all rows when None)."""
    b = _check_coef(data, b)
    rows = _rows(data, subset)
    total = 0.0
    for blk in _site_blocks(data, rows):
        total += nll_rows(family, data.X[blk], data.y[blk], b)
    return total


def gradient(family: GlmFamily, data: PartitionedDataset, subset, b) -> np.ndarray:
    """Unnormalized gradient sum_i x_i (psi'(x_i'b) - y_i)."""
    b = _check_coef(data, b)
    rows = _rows(data, subset)
    g = np.zeros(data.p)
    for blk in _site_blocks(data, rows):
        g = g + grad_rows(family, data.X[blk], data.y[blk], b)
    return g


def hessian(family: GlmFamily, data: PartitionedDataset, subset, b) -> np.ndarray:
    """Unnormalized Hessian sum_i x_i x_i' psi''(x_i'b), exactly symmetric."""
    b = _check_coef(data, b)
    rows = _rows(data, subset)
    H = np.zeros((data.p, data.p))
    for blk in _site_blocks(data, rows):
        H = H + hess_rows(family, data.X[blk], b)
    return H
