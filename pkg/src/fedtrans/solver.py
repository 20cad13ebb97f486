"""L1-penalized minimization of smooth convex objectives.

The workhorse is a monotone accelerated proximal gradient method with
backtracking.  Coordinates can be left unpenalized through per-coordinate
penalty weights (used for the intercept).
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .glm import GlmFamily, nll_rows

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 10000


class SolverDivergence(FloatingPointError):
    """Objective or gradient became non-finite during a solve."""


@dataclass
class SmoothObjective:
    """Smooth convex loss exposed through value and gradient callbacks.

    ``hess_matvec`` (optional) is used only to estimate a starting step size;
    ``lipschitz`` short-circuits that estimate when known.
    """

    value_at: Callable[[np.ndarray], float]
    gradient_at: Callable[[np.ndarray], np.ndarray]
    dim: int
    lipschitz: Optional[float] = None
    hess_matvec: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    value_and_gradient: Optional[Callable[[np.ndarray], tuple]] = None

    def both(self, b):
        if self.value_and_gradient is not None:
            return self.value_and_gradient(b)
        return self.value_at(b), self.gradient_at(b)

    def scaled(self, c: float) -> "SmoothObjective":
        hv = None if self.hess_matvec is None else (lambda b, v: c * self.hess_matvec(b, v))
        vg = None
        if self.value_and_gradient is not None:
            def vg(b):
                f, g = self.value_and_gradient(b)
                return c * f, c * g
        return SmoothObjective(
            lambda b: c * self.value_at(b),
            lambda b: c * self.gradient_at(b),
            self.dim,
            None if self.lipschitz is None else c * self.lipschitz,
            hv,
            vg,
        )


def quadratic_objective(A, q, const: float = 0.0) -> SmoothObjective:
    """f(b) = 0.5 b'Ab + q'b + const with A symmetric PSD."""
    A = np.asarray(A, dtype=float)
    q = np.asarray(q, dtype=float)

    def vg(b):
        Ab = A @ b
        return 0.5 * float(b @ Ab) + float(q @ b) + const, Ab + q

    return SmoothObjective(
        value_at=lambda b: vg(b)[0],
        gradient_at=lambda b: A @ b + q,
        dim=len(q),
        lipschitz=float(max(np.linalg.eigvalsh(A)[-1], 0.0)) if len(q) else 0.0,
        hess_matvec=lambda b, v: A @ v,
        value_and_gradient=vg,
    )


def glm_objective(family: GlmFamily, X, y, offset=None, scale: float = 1.0) -> SmoothObjective:
    """scale * sum_i psi(x_i'b + o_i) - y_i (x_i'b + o_i) as a SmoothObjective."""
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    off = np.zeros(len(y)) if offset is None else np.asarray(offset, dtype=float)

    def vg(b):
        eta = X @ b + off
        f = scale * float(np.sum(family.psi(eta) - y * eta))
        g = scale * (X.T @ (family.psi_dot(eta) - y))
        return f, g

    def hv(b, v):
        w = family.psi_ddot(X @ b + off)
        return scale * (X.T @ (w * (X @ v)))

    return SmoothObjective(
        value_at=lambda b: vg(b)[0],
        gradient_at=lambda b: vg(b)[1],
        dim=X.shape[1],
        hess_matvec=hv,
        value_and_gradient=vg,
    )


@dataclass
class PenaltyConfig:
    lam: float
    c0: float = 1.0
    c1: float = 1.0
    c_n: int = 1
    penalize_intercept: bool = False

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.c0 <= 0:
            raise ValueError("c0 must be positive")
        if self.c1 < 1:
            raise ValueError("c1 must be at least 1")
        if self.c_n < 1:
            raise ValueError("c_n must be at least 1")


@dataclass(frozen=True)
class SparsityBudget:
    s: int
    h: int = 0

    def __post_init__(self):
        if self.s < 1 or self.h < 0:
            raise ValueError("need s >= 1 and h >= 0")


@dataclass
class L1Solution:
    coef: np.ndarray
    converged: bool
    n_iter: int
    objective: float
    kkt: float
    history: list = field(default_factory=list, repr=False)


def soft_threshold(v, tau):
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def hard_threshold_topk(v, k: int) -> np.ndarray:
    """Keep the k largest-magnitude entries; ties go to the lower index."""
    v = np.asarray(v, dtype=float)
    k = int(k)
    if k < 0 or k > v.shape[0]:
        raise ValueError(f"k={k} outside [0, {v.shape[0]}]")
    out = np.zeros_like(v)
    if k == 0:
        return out
    keep = np.argsort(-np.abs(v), kind="stable")[:k]
    out[keep] = v[keep]
    return out


def penalty_weights(p: int, penalize_intercept: bool = True, intercept_index: int = 0):
    w = np.ones(p)
    if not penalize_intercept and p > 0:
        w[intercept_index] = 0.0
    return w


def kkt_residual(grad, b, lam, weights=None) -> float:
    """Max-norm violation of the lasso optimality conditions."""
    grad = np.asarray(grad, dtype=float)
    w = np.ones_like(grad) if weights is None else np.asarray(weights, dtype=float)
    lw = lam * w
    nz = b != 0
    r = np.where(nz, np.abs(grad + lw * np.sign(b)), np.maximum(np.abs(grad) - lw, 0.0))
    return float(r.max()) if r.size else 0.0


def power_iteration(matvec, dim: int, n_iter: int = 20, seed: int = 0) -> float:
    v = np.random.default_rng(seed).standard_normal(dim)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(n_iter):
        u = matvec(v)
        est = float(np.linalg.norm(u))
        if est == 0.0 or not np.isfinite(est):
            break
        v = u / est
    return est


def solve_l1(
    obj: SmoothObjective,
    lam: float,
    init=None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    weights=None,
    penalize_intercept: Optional[bool] = None,
    record_history: bool = False,
) -> L1Solution:
    """Minimize obj(b) + lam * sum_j weights_j |b_j|.

    Stops when the KKT residual in max norm falls below ``tol``.  The
    iterates are monotone in the penalized objective: an accelerated step
    that increases it is replaced by a plain proximal step and momentum is
    reset.  A ``PenaltyConfig`` can be passed in place of ``lam``.
    """
    if isinstance(lam, PenaltyConfig):
        if penalize_intercept is None:
            penalize_intercept = lam.penalize_intercept
        lam = lam.lam
    if tol <= 0:
        raise ValueError("tol must be positive")
    p = obj.dim
    if weights is None:
        weights = penalty_weights(p, True if penalize_intercept is None else penalize_intercept)
    weights = np.asarray(weights, dtype=float)
    x = np.zeros(p) if init is None else np.array(init, dtype=float).reshape(-1)

    def pen(b):
        return lam * float(np.sum(weights * np.abs(b)))

    def check(f, g):
        if not np.isfinite(f) or not np.all(np.isfinite(g)):
            raise SolverDivergence("non-finite objective or gradient")

    fx, gx = obj.both(x)
    check(fx, gx)
    if obj.lipschitz is not None:
        L = obj.lipschitz
    elif obj.hess_matvec is not None:
        L = power_iteration(lambda v: obj.hess_matvec(x, v), p)
    else:
        L = 1.0
    L = max(L, 1e-12)

    Fx = fx + pen(x)
    best = (Fx, x.copy())
    history = [Fx] if record_history else []
    y, fy, gy = x, fx, gx
    t = 1.0
    converged = kkt_residual(gx, x, lam, weights) <= tol
    it = 0
    while not converged and it < max_iter:
        it += 1
        # backtracking on the extrapolated point
        while True:
            z = soft_threshold(y - gy / L, lam * weights / L)
            fz, gz = obj.both(z)
            check(fz, gz)
            d = z - y
            if fz <= fy + float(gy @ d) + 0.5 * L * float(d @ d) + 1e-12 * max(1.0, abs(fy)):
                break
            L *= 2.0
        Fz = fz + pen(z)
        if Fz > Fx and y is not x:
            # restart from x with a monotone proximal step
            t = 1.0
            y, fy, gy = x, fx, gx
            continue
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        x_prev = x
        x, fx, gx, Fx = z, fz, gz, Fz
        if record_history:
            history.append(Fx)
        if Fx < best[0]:
            best = (Fx, x.copy())
        if kkt_residual(gx, x, lam, weights) <= tol:
            converged = True
            break
        mom = (t - 1.0) / t_next
        t = t_next
        if mom > 0:
            y = x + mom * (x - x_prev)
            fy, gy = obj.both(y)
            check(fy, gy)
        else:
            y, fy, gy = x, fx, gx
        # let the step grow back slowly
        L *= 0.98

    if not converged:
        log.debug("solve_l1 stopped after %d iterations without converging", it)
        x = best[1]
        fx, gx = obj.both(x)
    return L1Solution(x, converged, it, fx + pen(x), kkt_residual(gx, x, lam, weights), history)


def lambda_max(obj: SmoothObjective, weights=None, at=None) -> float:
    """Smallest lambda whose lasso solution is all-zero on penalized coordinates.

    Exact when no coordinate is unpenalized; with an unpenalized intercept the
    gradient is taken at ``at`` (typically the intercept-only fit).
    """
    b = np.zeros(obj.dim) if at is None else np.asarray(at, dtype=float)
    g = np.abs(obj.gradient_at(b))
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        g = g[w > 0] / w[w > 0]
    return float(g.max()) if g.size else 0.0


def lambda_grid(lam_max: float, n: int = 20, ratio: float = 0.01) -> np.ndarray:
    return np.geomspace(lam_max, ratio * lam_max, n)


def cross_validate_lambda(
    fit_fn,
    X,
    y,
    family: GlmFamily,
    lambda_grid,
    folds: int = 5,
    seed: int = 0,
) -> float:
    """Pick the grid value with the smallest mean held-out negative log-likelihood.

    ``fit_fn(X_train, y_train, lam, warm_start)`` returns a coefficient vector;
    the grid is visited from largest to smallest lambda so fits can warm start.
    Ties resolve to the larger lambda.
    """
    grid = np.asarray(lambda_grid, dtype=float).reshape(-1)
    if grid.size == 0:
        raise ValueError("lambda grid is empty")
    if np.any(np.diff(grid) >= 0):
        raise ValueError("lambda grid must be strictly decreasing")
    if folds < 2:
        raise ValueError("need at least two folds")
    if grid.size == 1:
        return float(grid[0])
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(y)
    rng = np.random.default_rng(seed)

    def assign():
        return rng.permutation(np.arange(n) % folds)

    def bad(fold_id):
        if family.name != "logistic":
            return False
        for f in range(folds):
            tr = y[fold_id != f]
            if tr.min() == tr.max():
                return True
        return False

    fold_id = assign()
    if bad(fold_id):
        fold_id = assign()
        if bad(fold_id):
            raise ValueError("cross-validation fold left a single outcome class in training")

    loss = np.zeros(grid.size)
    for f in range(folds):
        tr, te = fold_id != f, fold_id == f
        warm = None
        for j, lam in enumerate(grid):
            warm = fit_fn(X[tr], y[tr], float(lam), warm)
            loss[j] += nll_rows(family, X[te], y[te], warm) / max(int(te.sum()), 1)
    loss /= folds
    # first index attaining the minimum is the largest lambda
    return float(grid[int(np.argmin(loss))])


def lasso_fit_fn(family: GlmFamily, penalize_intercept: bool = False, tol: float = 1e-6):
    """fit_fn for ``cross_validate_lambda`` backed by ``solve_l1``."""

    def fit(X, y, lam, warm=None):
        obj = glm_objective(family, X, y, scale=1.0 / len(y))
        w = penalty_weights(X.shape[1], penalize_intercept)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return solve_l1(obj, lam, init=warm, tol=tol, weights=w).coef

    return fit
