"""Config-driven experiments: scenario -> fits -> metrics -> reports."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import metrics
from .estimators import (
    EstimatorConfig,
    aggregate,
    delta_budget,
    fed_lasso,
    fed_target_only,
    fed_transfer_alg1,
    fed_transfer_alg2,
    holdout_validation,
    cross_fit_folds,
    initialize,
    local_lasso_init,
    pooled_transfer,
    resolve_c_n,
    theory_penalties,
    cv_penalties,
    network_counts,
)
from .federation import Network, ledger_report
from .simulate import Scenario, SimConfig, build_federated_scenario, load_scenario

log = logging.getLogger(__name__)

METHODS = ("target_only", "source_only", "combined", "proposed_T1", "proposed_T3", "pooled")


@dataclass
class ExperimentConfig:
    scenario: object = field(default_factory=SimConfig)   # SimConfig or scenario directory
    methods: list = field(default_factory=lambda: list(METHODS))
    replications: int = 1
    seeds: Optional[list] = None
    root_seed: int = 0
    output_dir: str = "results"
    tuning: str = "cv"
    c0: float = 0.3
    c_delta: Optional[float] = None
    cn_c0: float = 1.0
    c_n: Optional[int] = None
    T: int = 3  # rounds for proposed_T3 and the federated baselines
    init_strategy: str = "single_site"
    leading_site: int = 1
    aggregation: bool = True
    validation_fraction: float = 0.2
    cross_fit: bool = False
    algorithm: str = "alg1"
    tol: float = 1e-7
    max_iter: int = 10000
    workers: int = 1
    record_wall_time: bool = True

    def __post_init__(self):
        if isinstance(self.scenario, dict):
            self.scenario = SimConfig.from_dict(self.scenario)
        self.validate()

    def validate(self):
        errs = []
        if not self.methods:
            errs.append("methods must be nonempty")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            errs.append(f"methods: unknown {bad}; choose from {list(METHODS)}")
        if self.replications < 1:
            errs.append("replications must be >= 1")
        if self.seeds is not None and len(self.seeds) < self.replications:
            errs.append("seeds must list at least `replications` values")
        if self.tuning not in ("theory_formula", "cv"):
            errs.append("tuning must be theory_formula or cv")
        if self.T < 1:
            errs.append("T must be ≥ 1")
        if self.algorithm not in ("alg1", "alg2"):
            errs.append("algorithm must be alg1 or alg2")
        if self.workers < 1:
            errs.append("workers must be >= 1")
        if errs:
            raise ValueError("; ".join(errs))

    def seed_list(self) -> list:
        if self.seeds is not None:
            return [int(s) for s in self.seeds[: self.replications]]
        ss = np.random.SeedSequence(self.root_seed)
        return [int(c.generate_state(1)[0]) for c in ss.spawn(self.replications)]

    def estimator_config(self, T: int) -> EstimatorConfig:
        return EstimatorConfig(
            T=T, algorithm=self.algorithm, init_strategy=self.init_strategy,
            leading_site=self.leading_site, c0=self.c0, cn_c0=self.cn_c0, c_n=self.c_n,
            aggregation=self.aggregation, validation_fraction=self.validation_fraction,
            cross_fit=self.cross_fit,
            tol=self.tol, max_iter=self.max_iter,
        )

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if isinstance(self.scenario, SimConfig):
            d["scenario"] = self.scenario.to_dict()
        return d


def load_config(path, overrides: Optional[dict] = None) -> ExperimentConfig:
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict):
        raise ValueError("config must be a JSON object")
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    doc.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return ExperimentConfig(**doc)


def _scenario_for(cfg: ExperimentConfig, seed: int) -> Scenario:
    if isinstance(cfg.scenario, SimConfig):
        return build_federated_scenario(dataclasses.replace(cfg.scenario, seed=seed))
    return load_scenario(cfg.scenario)


def _evaluate(scn: Scenario, beta) -> dict:
    raw = scn.to_raw(beta)
    out = {"mse": metrics.mse(raw, scn.truth.beta), "sse": metrics.sse(raw, scn.truth.beta)}
    if scn.config.family == "logistic" and len(scn.y_test):
        scores = scn.X_test @ beta
        out["auc"] = metrics.auc(scores, scn.y_test)
        out["odds_ratio"] = metrics.odds_ratio_quintiles(scores, scn.y_test)
    return out


def resolved_penalties(cfg: ExperimentConfig, network: Network, family):
    counts = network_counts(network)
    if cfg.tuning == "cv":
        return cv_penalties(network, family, cfg.estimator_config(1))
    return theory_penalties(network.p, counts, cfg.c0, c_delta=cfg.c_delta)


class _Fits:
    """Per-dataset fitting closures sharing one initialization and target-only cache."""

    def __init__(self, cfg: ExperimentConfig, scn: Scenario, train):
        self.cfg, self.scn, self.train = cfg, scn, train
        self.fam = scn.family
        probe = Network(scn.sites(train), leading_site=cfg.leading_site)
        self.probe = probe
        self.counts = network_counts(probe)
        self.pen = resolved_penalties(cfg, probe, self.fam)
        base = cfg.estimator_config(1)
        base.penalties = self.pen
        self.base = base
        self.c_n = resolve_c_n(probe, base)
        self.lp = math.log(train.p)
        self.cache = {}

    def net(self):
        return Network(self.scn.sites(self.train), leading_site=self.cfg.leading_site)

    def transfer_init(self):
        if "init" not in self.cache:
            self.cache["init"] = initialize(self.probe, self.fam, self.base)
        return self.cache["init"]

    def target_only(self, T):
        key = ("tar", T)
        if key not in self.cache:
            cfg = self.cfg
            if "tinit" not in self.cache:
                self.cache["tinit"] = local_lasso_init(self.probe, self.fam, [0], cfg.c0, False, cfg.tol)
            n = self.net()
            res = fed_lasso(n, self.fam, [0], self.pen.lam_target, T, self.cache["tinit"], self.c_n,
                            False, cfg.tol, cfg.max_iter)
            self.cache[key] = (res.beta, ledger_report(n.ledger))
        return self.cache[key]

    def transfer(self, T):
        key = ("fed", T)
        if key not in self.cache:
            cfg = self.cfg
            n = self.net()
            ecfg = cfg.estimator_config(T)
            ecfg.penalties = self.pen
            algo = fed_transfer_alg2 if cfg.algorithm == "alg2" else fed_transfer_alg1
            fit = algo(n, self.fam, ecfg, self.transfer_init())
            self.cache[key] = (fit.beta, ledger_report(n.ledger))
        return self.cache[key]

    def baseline(self, pops):
        """Federated lasso ignoring population labels; source-only uses the
        source penalty, the combined fit the joint one."""
        cfg = self.cfg
        n = self.net()
        init = local_lasso_init(n, self.fam, pops, cfg.c0, False, cfg.tol)
        lam = self.pen.lam_source[pops[0]] if len(pops) == 1 else self.pen.lam_beta
        res = fed_lasso(n, self.fam, pops, lam, cfg.T, init, self.c_n, False, cfg.tol, cfg.max_iter)
        return res.beta, ledger_report(n.ledger)


def _selection_folds(cfg: ExperimentConfig, scn: Scenario, seed):
    """(fits on the estimation data, [(fold fits, X_val, y_val), ...])."""
    ss = np.random.SeedSequence([seed, 5])
    if cfg.cross_fit:
        folds = [(_Fits(cfg, scn, tr), Xv, yv)
                 for tr, Xv, yv in cross_fit_folds(scn.data, cfg.leading_site, cfg.validation_fraction, ss)]
        return _Fits(cfg, scn, scn.data), folds
    train, X_val, y_val = holdout_validation(scn.data, cfg.leading_site, cfg.validation_fraction, seed=ss)
    fits = _Fits(cfg, scn, train)
    return fits, [(fits, X_val, y_val)]


def run_replication(cfg: ExperimentConfig, seed: int) -> list:
    """All requested methods on one freshly generated scenario."""
    scn = _scenario_for(cfg, seed)
    fam = scn.family
    try:
        fits, folds = _selection_folds(cfg, scn, seed)
    except Exception as exc:  # tuning failed: every method row carries the error
        log.warning("setup failed on seed %s: %s", seed, exc)
        msg = f"{type(exc).__name__}: {exc}"
        return [metrics.ReplicationReport(m, seed, error=msg) for m in cfg.methods]

    def proposed(T):
        beta, rep = fits.transfer(T)
        extra = {"selected": None}
        if cfg.aggregation:
            tar, tar_rep = fits.target_only(T)
            rep = _merge_reports(rep, tar_rep)
            ll = np.zeros(2)
            for f, X_val, y_val in folds:
                b_fed, r1 = f.transfer(T)
                b_tar, r2 = f.target_only(T)
                ll += aggregate(b_fed, b_tar, X_val, y_val, fam).log_lik
                if f is not fits:
                    rep = _merge_reports(rep, _merge_reports(r1, r2))
            # ties go to target-only
            if ll[1] > ll[0]:
                extra["selected"] = 2
            else:
                beta = tar
                extra["selected"] = 1
        return beta, rep, T, extra

    def run(method):
        if method == "target_only":
            beta, rep = fits.target_only(cfg.T)
            return beta, rep, cfg.T, {}
        if method == "source_only":
            return (*fits.baseline([1]), cfg.T, {})
        if method == "combined":
            return (*fits.baseline(sorted(fits.counts)), cfg.T, {})
        if method == "proposed_T1":
            return proposed(1)
        if method == "proposed_T3":
            return proposed(cfg.T)
        if method == "pooled":
            res = pooled_transfer(fits.train, fam, fits.pen, None, False, cfg.tol, cfg.max_iter)
            return res.beta, ledger_report(None), 0, {}
        raise ValueError(method)

    reports = []
    for method in cfg.methods:
        t0 = time.perf_counter()
        try:
            beta, led, rounds, extra = run(method)
            m = _evaluate(scn, beta)
            tot = led["total"]
            rep = metrics.ReplicationReport(
                method, seed, m["mse"], m["sse"], m.get("auc", float("nan")),
                m.get("odds_ratio", float("nan")), tot["gradient_bytes"], tot["hessian_bytes"],
                rounds, extra=dict(extra, beta=beta),
            )
        except Exception as exc:  # recorded per row, experiment continues
            log.warning("method %s failed on seed %s: %s", method, seed, exc)
            rep = metrics.ReplicationReport(method, seed, error=f"{type(exc).__name__}: {exc}")
        if cfg.record_wall_time:
            rep.wall_ms = round(1000.0 * (time.perf_counter() - t0), 3)
        reports.append(rep)
    return reports


def _merge_reports(a: dict, b: dict) -> dict:
    tot = {k: a["total"][k] + b["total"][k] for k in a["total"]}
    return {"total": tot}


def _digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def run_experiment(cfg: ExperimentConfig, output_dir=None) -> dict:
    """Run every replication, write reports.csv, summary.json and manifest.json."""
    out = Path(output_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = cfg.seed_list()
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            per_seed = list(pool.map(run_replication, [cfg] * len(seeds), seeds))
    else:
        per_seed = [run_replication(cfg, s) for s in seeds]
    reports = [r for reps in per_seed for r in reps]

    csv_path = out / "reports.csv"
    metrics.write_reports_csv(csv_path, reports)
    summary = {
        "methods": list(cfg.methods),
        "seeds": seeds,
        "mse_normalization": "per coordinate on the genotype scale (divided by p)",
        "summary": metrics.summarize_reports(reports),
    }
    sel = [r.extra.get("selected") for r in reports if r.method.startswith("proposed") and not r.error]
    if sel and sel[0] is not None:
        summary["aggregation_target_only_rate"] = float(np.mean([s == 1 for s in sel]))
    sum_path = out / "summary.json"
    sum_path.write_text(json.dumps(summary, indent=2, sort_keys=True, default=_json_default))
    cfg_path = out / "config.resolved.json"
    cfg_path.write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True, default=_json_default))
    manifest = {
        "config": cfg.to_dict(),
        "files": {p.name: _digest(p) for p in (csv_path, sum_path, cfg_path)},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_json_default))
    return {"summary": summary, "reports": reports, "output_dir": str(out)}


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if dataclasses.is_dataclass(o):
        return dataclasses.asdict(o)
    raise TypeError(type(o).__name__)


def describe_config(cfg: ExperimentConfig) -> dict:
    """Fully resolved configuration with the derived tuning quantities."""
    d = cfg.to_dict()
    scn = cfg.scenario
    if isinstance(scn, SimConfig):
        lead = cfg.leading_site - 1
        n_val = 0 if cfg.cross_fit else max(1, math.ceil(cfg.validation_fraction * scn.n_target[lead]))
        N0 = sum(scn.n_target) - n_val
        N1 = sum(scn.n_source)
        p = scn.p + 1
        lp = math.log(p)
        cd = cfg.c0 if cfg.c_delta is None else cfg.c_delta
        targets = list(scn.n_target)
        targets[lead] -= n_val
        n_init = scn.n_source[lead] if cfg.init_strategy == "single_site" else min(max(targets), max(scn.n_source))
        d["derived"] = {
            "design_dimension": p,
            "N_target_train": N0,
            "N_source": N1,
            "validation_rows_at_leading_site": n_val,
            "lambda_source": f"c0*sqrt(log p/N1) = {cfg.c0 * math.sqrt(lp / N1):.6g}",
            "lambda_delta": f"c_delta*sqrt(log p/N0) = {cd * math.sqrt(lp / N0):.6g}",
            "lambda_beta": f"c0*sqrt(log p/N) = {cfg.c0 * math.sqrt(lp / (N0 + N1)):.6g}",
            "lambda_target": f"c0*sqrt(log p/N0) = {cfg.c0 * math.sqrt(lp / N0):.6g}",
            "delta_threshold_budget": delta_budget(N0, p),
            "c_n": cfg.c_n if cfg.c_n is not None else int(max(1, round(cfg.cn_c0 * math.sqrt(n_init / lp)))),
            "tuning": cfg.tuning,
        }
    return d
