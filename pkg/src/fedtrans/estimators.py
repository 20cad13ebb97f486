"""Transfer-learning estimators: pooled, federated (full and local Hessian),
federated lasso baselines, initialization strategies, and aggregation.

Sign convention: the contrast estimated on target data at the offset w_k,
``argmin L0(w_k + d)``, approximates beta - w_k, so source losses enter the
joint step as ``L_k(b - d_k)``.  Both the pooled and the federated joint steps
use this form.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .federation import (
    EmptyPopulationError,
    Network,
    QuadraticSurrogate,
    combine_surrogate,
    merge_surrogates,
)
from .glm import GlmFamily, PartitionedDataset, nll_rows
from .solver import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    SolverDivergence,
    cross_validate_lambda,
    glm_objective,
    hard_threshold_topk,
    lambda_grid,
    lambda_max,
    lasso_fit_fn,
    penalty_weights,
    quadratic_objective,
    solve_l1,
)

log = logging.getLogger(__name__)

DOMINANCE_SHARE = 0.2


class ConfigurationError(ValueError):
    pass


@dataclass
class Penalties:
    """Penalty levels: lam_source[k] for source fits, lam_delta, lam_beta,
    and lam_target for the target-only estimator."""

    lam_source: dict
    lam_delta: float
    lam_beta: float
    lam_target: float

    def source(self, k: int) -> float:
        return self.lam_source[k]


def theory_penalties(p: int, counts: dict, c0: float = 1.0, h: int = 0,
                     c_delta: Optional[float] = None) -> Penalties:
    """Rate-driven defaults from the per-population totals ``counts``.

    lam_source[k] = c0 sqrt(log p / N_k), lam_delta = c_delta sqrt(log p / N_0),
    lam_beta = c0 sqrt(log p / N) + h log p / N_0; c_delta defaults to c0.
    """
    c_delta = c0 if c_delta is None else c_delta
    lp = math.log(p)
    N0 = counts.get(0, 0)
    if N0 <= 0:
        raise EmptyPopulationError("target population is empty")
    N = sum(counts.values())
    lam_src = {k: c0 * math.sqrt(lp / n) for k, n in counts.items() if k != 0 and n > 0}
    return Penalties(
        lam_source=lam_src,
        lam_delta=c_delta * math.sqrt(lp / N0),
        lam_beta=c0 * math.sqrt(lp / N) + h * lp / N0,
        lam_target=c0 * math.sqrt(lp / N0),
    )


def delta_budget(n_target: int, p: int) -> int:
    """floor(sqrt(N0 / log p))."""
    return int(math.floor(math.sqrt(n_target / math.log(p))))


@dataclass
class CoefficientSet:
    beta: np.ndarray
    w: dict = field(default_factory=dict)
    delta: dict = field(default_factory=dict)        # thresholded contrasts
    delta_raw: dict = field(default_factory=dict)    # before thresholding
    round_index: int = 0
    converged: bool = True
    history: list = field(default_factory=list, repr=False)  # beta after each round
    penalties: Optional[Penalties] = field(default=None, repr=False)


@dataclass
class EstimatorConfig:
    T: int = 1
    algorithm: str = "alg1"              # pooled | alg1 | alg2
    init_strategy: str = "single_site"   # single_site | multi_site
    leading_site: int = 1
    penalties: Optional[Penalties] = None
    c0: float = 1.0
    c1: float = 1.0
    cn_c0: float = 1.0
    c_n: Optional[int] = None
    delta_threshold_budget: Optional[int] = None
    aggregation: bool = True
    validation_fraction: float = 0.2
    cross_fit: bool = False
    penalize_intercept: bool = False
    h: int = 0
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    schedule_rho: float = 0.5

    def __post_init__(self):
        if self.T < 1:
            raise ConfigurationError("T must be >= 1")
        if self.algorithm not in ("pooled", "alg1", "alg2"):
            raise ConfigurationError(f"unknown algorithm {self.algorithm!r}")
        if self.init_strategy not in ("single_site", "multi_site"):
            raise ConfigurationError(f"unknown init_strategy {self.init_strategy!r}")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ConfigurationError("validation_fraction must lie in (0, 1)")
        if self.c_n is not None and self.c_n < 1:
            raise ConfigurationError("c_n must be >= 1")


def _lasso(obj, lam, p, cfg_or_pen, init=None, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    w = penalty_weights(p, cfg_or_pen)
    return solve_l1(obj, lam, init=init, tol=tol, max_iter=max_iter, weights=w)


# --------------------------------------------------------------------------
# pooled (individual-level) transfer learning

def pooled_transfer(
    data: PartitionedDataset,
    family: GlmFamily,
    penalties: Optional[Penalties] = None,
    budget: Optional[int] = None,
    penalize_intercept: bool = False,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    c0: float = 1.0,
    h: int = 0,
) -> CoefficientSet:
    """Source fits, target-side contrast adjustment, then a joint fit.

    Needs row-level access to every population; used as the oracle, the
    'pooled' comparator, and inside single-site initialization.
    """
    p = data.p
    N0 = data.pop_count(0)
    if N0 == 0:
        raise EmptyPopulationError("target population is empty")
    counts = {k: data.pop_count(k) for k in data.populations}
    if penalties is None:
        penalties = theory_penalties(p, counts, c0=c0, h=h)
    if budget is None:
        budget = delta_budget(N0, p)
    budget = min(budget, p)
    rows0 = data.population_rows(0)
    X0, y0 = data.X[rows0], data.y[rows0]
    converged = True

    w_hat, d_raw, d_chk = {}, {}, {}
    for k in data.populations:
        if k == 0:
            continue
        rk = data.population_rows(k)
        if len(rk) == 0:
            warnings.warn(f"source population {k} is empty; dropped")
            continue
        fit = _lasso(glm_objective(family, data.X[rk], data.y[rk], scale=1.0 / len(rk)),
                     penalties.source(k), p, penalize_intercept, tol=tol, max_iter=max_iter)
        converged &= fit.converged
        w_hat[k] = fit.coef
        fit_d = _lasso(glm_objective(family, X0, y0, offset=X0 @ fit.coef, scale=1.0 / N0),
                       penalties.lam_delta, p, penalize_intercept, tol=tol, max_iter=max_iter)
        converged &= fit_d.converged
        d_raw[k] = fit_d.coef
        d_chk[k] = hard_threshold_topk(fit_d.coef, budget)

    obj = _joint_glm_objective(data, family, d_chk)
    fit_b = _lasso(obj, penalties.lam_beta, p, penalize_intercept, tol=tol, max_iter=max_iter)
    converged &= fit_b.converged
    return CoefficientSet(fit_b.coef, w_hat, d_chk, d_raw, 0, converged, [fit_b.coef], penalties)


def _joint_glm_objective(data: PartitionedDataset, family: GlmFamily, d_chk: dict):
    """(1/N)[L0(b) + sum_k L_k(b - d_k)] over the populations present."""
    blocks = [data.population_rows(0)] + [data.population_rows(k) for k in sorted(d_chk)]
    rows = np.concatenate(blocks)
    X = data.X[rows]
    offset = np.zeros(len(rows))
    pos = len(blocks[0])
    for k, blk in zip(sorted(d_chk), blocks[1:]):
        offset[pos:pos + len(blk)] = -(data.X[blk] @ d_chk[k])
        pos += len(blk)
    return glm_objective(family, X, data.y[rows], offset=offset, scale=1.0 / len(rows))


def pooled_joint_objective_value(data, family, coefs: CoefficientSet, b, penalize_intercept=False):
    """Penalized joint-step objective at b, using the contrasts stored in ``coefs``."""
    obj = _joint_glm_objective(data, family, coefs.delta)
    w = penalty_weights(data.p, penalize_intercept)
    return obj.value_at(b) + coefs.penalties.lam_beta * float(np.sum(w * np.abs(b)))


def lasso_on_rows(data, family, rows, lam, penalize_intercept=False, tol=DEFAULT_TOL,
                  max_iter=DEFAULT_MAX_ITER, init=None) -> np.ndarray:
    rows = np.asarray(rows)
    obj = glm_objective(family, data.X[rows], data.y[rows], scale=1.0 / len(rows))
    return _lasso(obj, lam, data.p, penalize_intercept, init=init, tol=tol, max_iter=max_iter).coef


# --------------------------------------------------------------------------
# federated machinery

def _quad_solve(terms, lam, p, penalize_intercept, init, tol, max_iter):
    """Minimize sum_i weight_i * R_i(b) + lam |b|_1 over quadratic surrogates."""
    A = np.zeros((p, p))
    q = np.zeros(p)
    c = 0.0
    for weight, sur in terms:
        Ai, qi, ci = sur.coefficients()
        A += weight * Ai
        q += weight * qi
        c += weight * ci
    return _lasso(quadratic_objective(A, q, c), lam, p, penalize_intercept,
                  init=init, tol=tol, max_iter=max_iter)


def resolve_c_n(network: Network, cfg: EstimatorConfig) -> int:
    """Anchor-thresholding budget.

    Default: cn_c0 * min_k sqrt(n_init_k / log p) with n_init_k the
    initialization cell sizes (sources at the leading site for single-site,
    each population at its largest site for multi-site).
    """
    if cfg.c_n is not None:
        return min(cfg.c_n, network.p)
    census = network.census()
    lp = math.log(network.p)
    pops = sorted({k for c in census.values() for k in c})
    if cfg.init_strategy == "single_site":
        cell = census[cfg.leading_site]
        ns = [cell.get(k, 0) for k in pops if k != 0] or [cell.get(0, 0)]
    else:
        ns = [max(c.get(k, 0) for c in census.values()) for k in pops]
    n_init = max(min(ns), 1)
    return int(min(network.p, max(1, round(cfg.cn_c0 * math.sqrt(n_init / lp)))))


def network_counts(network: Network) -> dict:
    census = network.census()
    pops = sorted({k for c in census.values() for k in c})
    return {k: network.population_total(k) for k in pops}


def _leader_hessian(network: Network, pop: int, anchor) -> np.ndarray:
    """Normalized Hessian of population ``pop`` on the leading site's rows.

    Computed where the coordinator lives, so nothing is transmitted.
    """
    site = network.leader
    n = site.n_local(pop)
    if n == 0:
        raise ConfigurationError(
            f"leading site {site.site_id} holds no rows of population {pop}; "
            "the local-Hessian algorithm needs every population there"
        )
    return site.local_hessian(pop, anchor)


def fed_transfer(
    network: Network,
    family: GlmFamily,
    config: EstimatorConfig,
    init: tuple,
    local_hessian: bool = False,
) -> CoefficientSet:
    """Rounds of surrogate-likelihood transfer learning.

    With ``local_hessian`` the Hessians come from the leading site alone and the
    penalties follow a geometric schedule toward the full-Hessian values.
    """
    p = network.p
    counts = network_counts(network)
    N0 = counts.get(0, 0)
    if N0 == 0:
        raise EmptyPopulationError("target population is empty")
    sources = [k for k in sorted(counts) if k != 0 and counts[k] > 0]
    pen = config.penalties or theory_penalties(p, counts, config.c0, config.h)
    c_n = resolve_c_n(network, config)
    budget = config.delta_threshold_budget
    if budget is None:
        budget = delta_budget(N0, p)
    budget = min(budget, p)
    if local_hessian:
        lead = network.leader
        for k in [0] + sources:
            if lead.n_local(k) == 0:
                raise ConfigurationError(
                    f"leading site {lead.site_id} has no rows of population {k}"
                )
            if lead.n_local(k) <= p:
                # singular local Hessian: the lasso surrogate may be unbounded below
                log.warning("leading site %d holds %d rows of population %d for %d coefficients; "
                            "local Hessian is singular", lead.site_id, lead.n_local(k), k, p)
        lp = math.log(p)
        lam0 = {k: config.c0 * math.sqrt(lp / lead.n_local(k)) for k in [0] + sources}

    beta0, w0 = init
    beta = np.asarray(beta0, dtype=float).copy()
    w = {k: np.asarray(w0[k], dtype=float).copy() for k in sources}
    out = CoefficientSet(beta, dict(w), {}, {}, 0, True, [], pen)
    N = N0 + sum(counts[k] for k in sources)
    pi = config.penalize_intercept
    tol, mi = config.tol, config.max_iter

    for t in range(1, config.T + 1):
        if local_hessian:
            rho_t = config.schedule_rho ** t
            lam_src = {k: max(pen.source(k), lam0[k] * rho_t) for k in sources}
            lam_d = max(pen.lam_delta, lam0[0] * rho_t)
            lam_b = max(pen.lam_beta, lam0[0] * rho_t)
        else:
            lam_src = {k: pen.source(k) for k in sources}
            lam_d, lam_b = pen.lam_delta, pen.lam_beta

        beta_chk = hard_threshold_topk(beta, c_n)
        w_chk = {k: hard_threshold_topk(w[k], c_n) for k in sources}
        anchors = {0: beta_chk, **w_chk}
        network.next_round()
        msgs = network.gather(anchors, hessian_sites="none" if local_hessian else "all")

        def surrogate(k, anchor):
            hess = _leader_hessian(network, k, anchor) if local_hessian else None
            return combine_surrogate(msgs[k], anchor, hessian=hess)

        try:
            R0 = surrogate(0, beta_chk)
            Rk = {k: surrogate(k, w_chk[k]) for k in sources}
            w_new, d_raw, d_chk = {}, {}, {}
            ok = True
            for k in sources:
                fit = _quad_solve([(1.0, Rk[k])], lam_src[k], p, pi, w[k], tol, mi)
                w_new[k] = fit.coef
                fd = _quad_solve([(1.0, R0.shifted(w_new[k]))], lam_d, p, pi, None, tol, mi)
                d_raw[k] = fd.coef
                d_chk[k] = hard_threshold_topk(fd.coef, budget)
                ok &= fit.converged and fd.converged
            terms = [(N0 / N, R0)] + [(counts[k] / N, Rk[k].shifted(-d_chk[k])) for k in sources]
            fb = _quad_solve(terms, lam_b, p, pi, beta, tol, mi)
            ok &= fb.converged
        except SolverDivergence as exc:
            log.warning("round %d aborted: %s", t, exc)
            out.converged = False
            return out
        beta, w = fb.coef, w_new
        out = CoefficientSet(beta, dict(w), d_chk, d_raw, t, out.converged and ok,
                             out.history + [beta.copy()], pen)
    return out


def fed_transfer_alg1(network, family, config, init) -> CoefficientSet:
    return fed_transfer(network, family, config, init, local_hessian=False)


def fed_transfer_alg2(network, family, config, init) -> CoefficientSet:
    return fed_transfer(network, family, config, init, local_hessian=True)


def fed_lasso(
    network: Network,
    family: GlmFamily,
    populations: list,
    lam: float,
    T: int,
    init,
    c_n: Optional[int] = None,
    penalize_intercept: bool = False,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> CoefficientSet:
    """Surrogate-likelihood lasso over the pooled rows of ``populations``.

    Labels are ignored across the listed populations; each round pools their
    gradients and Hessians at a common thresholded anchor.
    """
    p = network.p
    beta = np.asarray(init, dtype=float).copy()
    c_n = p if c_n is None else min(c_n, p)
    history = []
    converged = True
    for t in range(1, T + 1):
        anchor = hard_threshold_topk(beta, c_n)
        network.next_round()
        msgs = network.gather({k: anchor for k in populations}, hessian_sites="all",
                              populations=populations)
        parts = [combine_surrogate(msgs[k], anchor) for k in populations if k in msgs]
        if not parts:
            raise EmptyPopulationError(f"populations {populations} have no rows")
        R = merge_surrogates(parts)
        fit = _quad_solve([(1.0, R)], lam, p, penalize_intercept, beta, tol, max_iter)
        beta = fit.coef
        converged &= fit.converged
        history.append(beta.copy())
    return CoefficientSet(beta, round_index=T, converged=converged, history=history)


def local_lasso_init(network: Network, family: GlmFamily, populations: list, c0: float = 1.0,
                     penalize_intercept: bool = False, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Lasso on the site holding the most rows of ``populations`` (lowest id on ties)."""
    best, best_n = None, -1
    for s in network.sites:
        n = sum(s.n_local(k) for k in populations)
        if n > best_n:
            best, best_n = s, n
    if best_n <= 0:
        raise EmptyPopulationError(f"populations {populations} have no rows")
    local = best.local_data(populations)
    lam = c0 * math.sqrt(math.log(network.p) / local.n)
    return lasso_on_rows(local, family, np.arange(local.n), lam, penalize_intercept, tol)


def fed_target_only(network, family, config: EstimatorConfig, init=None, T=None) -> CoefficientSet:
    """Federated lasso on target rows with lam_target = c0 sqrt(log p / N0)."""
    counts = network_counts(network)
    if counts.get(0, 0) == 0:
        raise EmptyPopulationError("target population is empty")
    pen = config.penalties or theory_penalties(network.p, counts, config.c0, config.h)
    if init is None:
        init = local_lasso_init(network, family, [0], config.c0, config.penalize_intercept, config.tol)
    return fed_lasso(network, family, [0], pen.lam_target, config.T if T is None else T, init,
                     resolve_c_n(network, config), config.penalize_intercept, config.tol, config.max_iter)


# --------------------------------------------------------------------------
# initialization

def init_single_site(network: Network, family: GlmFamily, config: EstimatorConfig):
    """Pooled transfer learning on the leading site's own rows."""
    site = network.site(config.leading_site)
    pops = sorted({k for c in network.census().values() for k in c})
    missing = [k for k in pops if site.n_local(k) == 0]
    if missing or site.n_local(0) == 0:
        raise ConfigurationError(
            f"site {site.site_id} lacks populations {missing or [0]}; "
            "use multi-site initialization instead"
        )
    local = site.local_data()
    res = pooled_transfer(local, family, None, None, config.penalize_intercept,
                          config.tol, config.max_iter, c0=config.c0, h=config.h)
    return res.beta, res.w


def _relabel_as_target(data: PartitionedDataset, k: int) -> PartitionedDataset:
    pop = data.pop_of.copy()
    pop[data.pop_of == k] = 0
    pop[data.pop_of == 0] = k
    return PartitionedDataset(data.X, data.y, data.site_of, pop)


def init_multi_site(network: Network, family: GlmFamily, config: EstimatorConfig):
    """Each population initialized at the site where it is largest.

    Dominant populations (at least 20% of that site's rows) get a local lasso
    with c1 sqrt(log p / n); minority populations get local transfer learning
    with the population itself as target.
    """
    census = network.census()
    pops = sorted({k for c in census.values() for k in c})
    if 0 not in pops:
        raise EmptyPopulationError("target population is empty everywhere")
    lp = math.log(network.p)
    est = {}
    for k in pops:
        best_site, best_n = None, 0
        for sid in sorted(census):
            n = census[sid].get(k, 0)
            if n > best_n:
                best_site, best_n = sid, n
        if best_site is None:
            raise EmptyPopulationError(f"population {k} is empty at every site")
        site = network.site(best_site)
        local = site.local_data()
        share = best_n / local.n
        if share >= DOMINANCE_SHARE or len(site.populations) == 1:
            rows = np.flatnonzero(local.pop_of == k)
            est[k] = lasso_on_rows(local, family, rows, config.c1 * math.sqrt(lp / best_n),
                                   config.penalize_intercept, config.tol, config.max_iter)
        else:
            res = pooled_transfer(_relabel_as_target(local, k), family, None, None,
                                  config.penalize_intercept, config.tol, config.max_iter,
                                  c0=config.c0, h=config.h)
            est[k] = res.beta
    return est[0], {k: est[k] for k in pops if k != 0}


def initialize(network, family, config):
    if config.init_strategy == "single_site":
        return init_single_site(network, family, config)
    return init_multi_site(network, family, config)


# --------------------------------------------------------------------------
# aggregation

@dataclass
class AggregationChoice:
    B_hat: np.ndarray          # p x 2: (target-only, transfer)
    eta: np.ndarray            # e1 or e2
    log_lik: np.ndarray        # validation log-likelihood per column

    @property
    def selected(self) -> int:
        return int(np.argmax(self.eta))

    @property
    def beta(self) -> np.ndarray:
        return self.B_hat[:, self.selected].copy()


def aggregate(beta_transfer, beta_target, X_val, y_val, family: GlmFamily) -> AggregationChoice:
    """Pick the candidate with the larger validation log-likelihood; ties go to target-only."""
    X_val = np.atleast_2d(np.asarray(X_val, dtype=float))
    y_val = np.asarray(y_val, dtype=float)
    if len(y_val) == 0:
        raise ValueError("empty validation set")
    if family.name == "logistic" and y_val.min() == y_val.max():
        warnings.warn("validation outcomes contain a single class")
    B = np.column_stack([beta_target, beta_transfer]).astype(float)
    ll = np.array([-nll_rows(family, X_val, y_val, B[:, j]) for j in range(2)])
    j = 1 if ll[1] > ll[0] else 0
    eta = np.zeros(2)
    eta[j] = 1.0
    return AggregationChoice(B, eta, ll)


def holdout_validation(data: PartitionedDataset, leading_site: int, fraction: float, seed=0):
    """Split ceil(fraction * n) target rows at the leading site off as validation.

    Returns (training data, X_val, y_val).
    """
    cell = data.cell(leading_site, 0)
    if len(cell) == 0:
        raise ConfigurationError(f"leading site {leading_site} holds no target rows")
    n_val = int(math.ceil(fraction * len(cell)))
    n_val = min(max(n_val, 1), len(cell) - 1)
    rng = np.random.default_rng(seed)
    val = np.sort(rng.choice(cell, size=n_val, replace=False))
    keep = np.setdiff1d(np.arange(data.n), val)
    return data.subset(keep), data.X[val], data.y[val]


def cross_fit_folds(data: PartitionedDataset, leading_site: int, fraction: float, seed=0):
    """Disjoint validation folds covering the leading site's target rows."""
    cell = data.cell(leading_site, 0)
    n_folds = max(2, int(round(1.0 / fraction)))
    perm = np.random.default_rng(seed).permutation(cell)
    for val in np.array_split(perm, n_folds):
        val = np.sort(val)
        keep = np.setdiff1d(np.arange(data.n), val)
        yield data.subset(keep), data.X[val], data.y[val]


# --------------------------------------------------------------------------
# cross-validated penalties

def cv_penalties(network: Network, family: GlmFamily, config: EstimatorConfig,
                 folds: int = 5, n_grid: int = 20, seed: int = 0) -> Penalties:
    """Penalties chosen by cross-validation at the leading site, rescaled to
    the federated sample sizes by sqrt(n_local / N_total)."""
    site = network.leader
    counts = network_counts(network)
    pi = config.penalize_intercept
    fit = lasso_fit_fn(family, pi)

    def cv_on(local: PartitionedDataset, rows):
        X, y = local.X[rows], local.y[rows]
        obj = glm_objective(family, X, y, scale=1.0 / len(y))
        wts = penalty_weights(local.p, pi)
        lam_hi = lambda_max(obj, wts, at=_intercept_only(family, y, local.p, pi))
        grid = lambda_grid(max(lam_hi, 1e-8), n_grid)
        return cross_validate_lambda(fit, X, y, family, grid, folds, seed)

    local = site.local_data()
    rows0 = np.flatnonzero(local.pop_of == 0)
    lam_t_local = cv_on(local, rows0)
    lam_src = {}
    for k in counts:
        if k == 0 or counts[k] == 0:
            continue
        rk = np.flatnonzero(local.pop_of == k)
        if len(rk) < folds * 2:
            lam_src[k] = config.c0 * math.sqrt(math.log(network.p) / counts[k])
            continue
        lam_src[k] = cv_on(local, rk) * math.sqrt(len(rk) / counts[k])
    all_rows = np.arange(local.n)
    lam_b_local = cv_on(local, all_rows)
    N0, N = counts[0], sum(counts.values())
    scale0 = math.sqrt(len(rows0) / N0)
    return Penalties(
        lam_source=lam_src,
        lam_delta=lam_t_local * scale0,
        lam_beta=lam_b_local * math.sqrt(local.n / N),
        lam_target=lam_t_local * scale0,
    )


def _intercept_only(family, y, p, penalize_intercept):
    b = np.zeros(p)
    if not penalize_intercept:
        m = float(np.mean(y))
        if family.name == "logistic":
            m = min(max(m, 1e-6), 1 - 1e-6)
            b[0] = math.log(m / (1 - m))
        else:
            b[0] = m
    return b
