"""Genotype-like federated simulation.

Randomness: every draw comes from ``np.random.SeedSequence(root_seed,
spawn_key=(stage, site, population))`` with the stage tags in ``STAGES``;
test-set draws use site 0.  No global generator state is touched.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.stats import norm

from .federation import SiteNode
from .glm import LOGISTIC, PartitionedDataset, get_family

STAGES = {"coefficients": 1, "mafs": 2, "genotypes": 3, "outcomes": 4, "split": 5}
MAF_FLOOR = 0.01


def stream(root_seed: int, stage: str, site: int = 0, pop: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(int(root_seed), spawn_key=(STAGES[stage], int(site), int(pop)))
    return np.random.default_rng(ss)


@dataclass(frozen=True)
class CovarianceSpec:
    blocks: int
    block_size: int
    rho: float


@dataclass
class SimConfig:
    M: int = 3
    n_target: list = field(default_factory=lambda: [100, 100, 100])
    n_source: list = field(default_factory=lambda: [500, 500, 500])
    p: int = 200
    s: int = 20
    h: int = 5
    Delta: float = 0.5
    setting: str = "S1"
    target_cov: CovarianceSpec = CovarianceSpec(40, 5, 0.3)
    source_cov: CovarianceSpec = CovarianceSpec(20, 10, 0.5)
    seed: int = 0
    test_size: int = 1000
    family: str = "logistic"
    noise_sd: float = 1.0
    delta_is_variance: bool = False
    standardize: bool = True
    maf_floor: float = MAF_FLOOR

    def __post_init__(self):
        if isinstance(self.n_target, int):
            self.n_target = [self.n_target] * self.M
        if isinstance(self.n_source, int):
            self.n_source = [self.n_source] * self.M
        self.n_target = [int(v) for v in self.n_target]
        self.n_source = [int(v) for v in self.n_source]
        if isinstance(self.target_cov, dict):
            self.target_cov = CovarianceSpec(**self.target_cov)
        if isinstance(self.source_cov, dict):
            self.source_cov = CovarianceSpec(**self.source_cov)
        self.validate()

    def validate(self):
        errs = []
        if self.M < 1:
            errs.append("M must be >= 1")
        if len(self.n_target) != self.M or len(self.n_source) != self.M:
            errs.append("n_target and n_source need one entry per site (M)")
        for name, cov in (("target_cov", self.target_cov), ("source_cov", self.source_cov)):
            if cov.blocks * cov.block_size != self.p:
                errs.append(f"{name}.blocks * {name}.block_size = {cov.blocks * cov.block_size} "
                            f"does not equal p = {self.p}")
            if not 0.0 <= cov.rho < 1.0:
                errs.append(f"{name}.rho must lie in [0, 1)")
        if not 1 <= self.s <= self.p:
            errs.append("s must lie in [1, p]")
        if not 0 <= self.h <= self.p:
            errs.append("h must lie in [0, p]")
        if self.setting not in ("S1", "S2"):
            errs.append("setting must be S1 or S2")
        if self.family not in ("logistic", "gaussian"):
            errs.append("family must be logistic or gaussian")
        if self.test_size < 0:
            errs.append("test_size must be >= 0")
        if errs:
            raise ValueError("; ".join(errs))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValueError(f"unknown scenario keys: {', '.join(unknown)}")
        return cls(**d)

    @classmethod
    def full_scale(cls, **kw) -> "SimConfig":
        base = dict(M=5, n_target=400, n_source=2000, p=2000, s=100, h=10, Delta=0.5,
                    target_cov=CovarianceSpec(40, 50, 0.3), source_cov=CovarianceSpec(20, 100, 0.5))
        base.update(kw)
        return cls(**base)

    @classmethod
    def desk_scale(cls, **kw) -> "SimConfig":
        return cls(**kw)


@dataclass
class GroundTruth:
    beta: np.ndarray
    w: np.ndarray
    H_set: np.ndarray
    mafs: np.ndarray


def gen_covariance(blocks: int, block_size: int, rho: float, p: Optional[int] = None) -> np.ndarray:
    """Block-diagonal matrix with AR(1) blocks rho^|i-j|."""
    if p is not None and blocks * block_size != p:
        raise ValueError(f"blocks ({blocks}) * block_size ({block_size}) != p ({p})")
    idx = np.arange(block_size)
    B = rho ** np.abs(idx[:, None] - idx[None, :])
    return np.kron(np.eye(blocks), B)


def hw_cutpoints(mafs) -> tuple:
    """Standard-normal cutpoints giving Hardy-Weinberg genotype frequencies."""
    f = np.asarray(mafs, dtype=float)
    return norm.ppf((1.0 - f) ** 2), norm.ppf(1.0 - f ** 2)


def gen_genotypes(n: int, Sigma, mafs, seed) -> np.ndarray:
    """Latent Gaussian draws cut into 0/1/2 at Hardy-Weinberg quantiles."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    Sigma = np.asarray(Sigma, dtype=float)
    L = np.linalg.cholesky(Sigma)  # LinAlgError when not positive definite
    z = rng.standard_normal((n, Sigma.shape[0])) @ L.T
    lo, hi = hw_cutpoints(mafs)
    return (z > lo).astype(np.float64) + (z > hi)


def gen_coefficients(setting: str, s: int, h: int, Delta: float, p: int, seed,
                     delta_is_variance: bool = False) -> tuple:
    """(beta, w, H) for settings S1 (constant shift) and S2 (normal shifts)."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    beta = np.zeros(p)
    support = rng.choice(p, size=s, replace=False)
    beta[support] = rng.uniform(-0.5, 0.5, size=s)
    H = np.sort(rng.choice(p, size=h, replace=False)) if h else np.zeros(0, dtype=int)
    w = beta.copy()
    if setting == "S1":
        w[H] += Delta
    elif setting == "S2":
        sd = math.sqrt(Delta) if delta_is_variance else Delta
        w[H] += rng.normal(0.0, sd, size=h)
    else:
        raise ValueError(f"unknown setting {setting!r}")
    return beta, w, H


def gen_outcomes(X, coefficients, seed, family: str = "logistic", noise_sd: float = 1.0) -> np.ndarray:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    eta = np.asarray(X, dtype=float) @ np.asarray(coefficients, dtype=float)
    if family == "gaussian":
        return eta + noise_sd * rng.standard_normal(len(eta))
    return (rng.random(len(eta)) < LOGISTIC.psi_dot(eta)).astype(np.float64)


@dataclass
class Scenario:
    """A generated federated dataset on the model (design) scale.

    ``data.X`` and ``X_test`` carry an intercept in column 0 followed by the
    (optionally standardized) genotypes.  ``col_mean``/``col_scale`` map
    design coefficients back to the raw genotype scale.
    """

    config: SimConfig
    data: PartitionedDataset
    X_test: np.ndarray
    y_test: np.ndarray
    truth: GroundTruth
    col_mean: np.ndarray
    col_scale: np.ndarray

    @property
    def family(self):
        return get_family(self.config.family)

    def sites(self, data: Optional[PartitionedDataset] = None) -> list:
        data = self.data if data is None else data
        return [SiteNode.from_dataset(data, m, self.family) for m in data.sites]

    def to_raw(self, coef) -> np.ndarray:
        """Genotype-scale effects (intercept dropped)."""
        return np.asarray(coef, dtype=float)[1:] / self.col_scale

    def to_design(self, raw) -> np.ndarray:
        raw = np.asarray(raw, dtype=float)
        return np.concatenate([[float(raw @ self.col_mean)], raw * self.col_scale])

    def design_truth(self) -> np.ndarray:
        return self.to_design(self.truth.beta)


def _design(G, mean, scale):
    return np.column_stack([np.ones(len(G)), (G - mean) / scale])


def build_federated_scenario(config: SimConfig) -> Scenario:
    cfg = config
    fam = cfg.family
    beta, w, H = gen_coefficients(cfg.setting, cfg.s, cfg.h, cfg.Delta, cfg.p,
                                  stream(cfg.seed, "coefficients"), cfg.delta_is_variance)
    mafs = np.clip(stream(cfg.seed, "mafs").uniform(0.0, 0.5, cfg.p), cfg.maf_floor, 0.5)
    sig = {0: gen_covariance(cfg.target_cov.blocks, cfg.target_cov.block_size, cfg.target_cov.rho, cfg.p),
           1: gen_covariance(cfg.source_cov.blocks, cfg.source_cov.block_size, cfg.source_cov.rho, cfg.p)}
    coef = {0: beta, 1: w}

    cells = []
    for m in range(1, cfg.M + 1):
        for k, n in ((0, cfg.n_target[m - 1]), (1, cfg.n_source[m - 1])):
            G = gen_genotypes(n, sig[k], mafs, stream(cfg.seed, "genotypes", m, k))
            y = gen_outcomes(G, coef[k], stream(cfg.seed, "outcomes", m, k), fam, cfg.noise_sd)
            cells.append((m, k, G, y))
    G_test = gen_genotypes(cfg.test_size, sig[0], mafs, stream(cfg.seed, "genotypes", 0, 0))
    y_test = gen_outcomes(G_test, beta, stream(cfg.seed, "outcomes", 0, 0), fam, cfg.noise_sd)

    if cfg.standardize:
        # per-site column sums pooled into common centring/scaling
        n_tot = sum(len(G) for *_, G, _ in cells)
        s1 = sum(G.sum(axis=0) for *_, G, _ in cells)
        s2 = sum((G * G).sum(axis=0) for *_, G, _ in cells)
        mean = s1 / n_tot
        var = np.maximum(s2 / n_tot - mean ** 2, 0.0)
        scale = np.where(var > 1e-12, np.sqrt(var), 1.0)
    else:
        mean, scale = np.zeros(cfg.p), np.ones(cfg.p)

    X = np.vstack([_design(G, mean, scale) for *_, G, _ in cells])
    y = np.concatenate([yy for *_, yy in cells])
    site_of = np.concatenate([np.full(len(G), m) for m, _, G, _ in cells])
    pop_of = np.concatenate([np.full(len(G), k) for _, k, G, _ in cells])
    data = PartitionedDataset(X, y, site_of, pop_of)
    return Scenario(cfg, data, _design(G_test, mean, scale), y_test,
                    GroundTruth(beta, w, H, mafs), mean, scale)


# --------------------------------------------------------------------------
# directory serialization

_MAT = struct.Struct("<II")


def write_matrix(path, A):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.ndim != 2:
        raise ValueError("matrix must be 2-D")
    with open(path, "wb") as fh:
        fh.write(_MAT.pack(A.shape[0], A.shape[1]))
        fh.write(np.ascontiguousarray(A, dtype="<f8").tobytes())


def read_matrix(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    if len(buf) < _MAT.size:
        raise ValueError(f"{path}: truncated header")
    n, p = _MAT.unpack_from(buf)
    body = buf[_MAT.size:]
    if len(body) != 8 * n * p:
        raise ValueError(f"{path}: expected {8 * n * p} payload bytes, got {len(body)}")
    return np.frombuffer(body, dtype="<f8").reshape(n, p).astype(float)


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def save_scenario(scn: Scenario, directory) -> Path:
    """One X and one y file per (site, population) cell, truth arrays, manifest."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    files = []
    data = scn.data
    for m in data.sites:
        for k in data.populations:
            rows = data.cell(m, k)
            for stem, arr in (("x", data.X[rows]), ("y", data.y[rows][:, None])):
                name = f"{stem}_site{m}_pop{k}.bin"
                write_matrix(d / name, arr if len(rows) else np.zeros((0, arr.shape[1])))
                files.append(name)
    arrays = {
        "x_test.bin": scn.X_test, "y_test.bin": scn.y_test[:, None],
        "beta.bin": scn.truth.beta[None, :], "w.bin": scn.truth.w[None, :],
        "mafs.bin": scn.truth.mafs[None, :], "h_set.bin": scn.truth.H_set.astype(float)[None, :],
        "col_mean.bin": scn.col_mean[None, :], "col_scale.bin": scn.col_scale[None, :],
    }
    for name, arr in arrays.items():
        write_matrix(d / name, arr)
        files.append(name)
    manifest = {
        "config": scn.config.to_dict(),
        "seed_derivation": "SeedSequence(seed, spawn_key=(stage, site, population))",
        "stages": STAGES,
        "cells": [[m, k, data.cell_count(m, k)] for m in data.sites for k in data.populations],
        "files": {name: _sha256(d / name) for name in files},
    }
    (d / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return d


def load_scenario(directory) -> Scenario:
    d = Path(directory)
    manifest = json.loads((d / "manifest.json").read_text())
    for name, digest in manifest["files"].items():
        if _sha256(d / name) != digest:
            raise ValueError(f"{name}: content digest mismatch")
    cfg = SimConfig.from_dict(manifest["config"])
    Xs, ys, sites, pops = [], [], [], []
    for m, k, n in manifest["cells"]:
        X = read_matrix(d / f"x_site{m}_pop{k}.bin")
        y = read_matrix(d / f"y_site{m}_pop{k}.bin")[:, 0]
        Xs.append(X)
        ys.append(y)
        sites.append(np.full(n, m))
        pops.append(np.full(n, k))
    data = PartitionedDataset(np.vstack(Xs), np.concatenate(ys), np.concatenate(sites), np.concatenate(pops))
    row = lambda name: read_matrix(d / name)[0]
    truth = GroundTruth(row("beta.bin"), row("w.bin"), row("h_set.bin").astype(int), row("mafs.bin"))
    return Scenario(cfg, data, read_matrix(d / "x_test.bin"), read_matrix(d / "y_test.bin")[:, 0],
                    truth, row("col_mean.bin"), row("col_scale.bin"))
