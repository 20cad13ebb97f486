"""Estimation and prediction metrics, replication summaries, report files."""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata


class UndefinedMetricError(ValueError):
    pass


def sse(estimate, truth) -> float:
    estimate, truth = np.asarray(estimate, dtype=float), np.asarray(truth, dtype=float)
    if estimate.shape != truth.shape:
        raise ValueError(f"shape mismatch {estimate.shape} vs {truth.shape}")
    d = estimate - truth
    return float(d @ d)


def mse(estimate, truth) -> float:
    """Squared error averaged over coordinates."""
    return sse(estimate, truth) / np.asarray(truth).size


def auc(scores, labels) -> float:
    """Mann-Whitney AUC; tied pairs count one half."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos = labels == 1
    n1 = int(pos.sum())
    n0 = len(labels) - n1
    if n1 == 0 or n0 == 0:
        raise UndefinedMetricError("AUC needs both classes")
    r = rankdata(scores)  # average ranks handle ties
    u = r[pos].sum() - n1 * (n1 + 1) / 2.0
    return float(u / (n1 * n0))


def odds_ratio_quintiles(scores, labels) -> float:
    """Odds of y=1 in the top fifth of scores over the bottom fifth.

    Groups are cut from a stable ascending sort; a 0.5 correction goes on all
    four cells when any cell is empty.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    n = len(scores)
    if n < 10:
        raise UndefinedMetricError("need at least 10 samples")
    if labels.min() == labels.max():
        raise UndefinedMetricError("need both classes")
    g = int(math.floor(0.2 * n))
    if g == 0:
        raise UndefinedMetricError("quintile group is empty")
    order = np.argsort(scores, kind="stable")
    bottom, top = labels[order[:g]], labels[order[n - g:]]
    a, b = float(np.sum(top == 1)), float(np.sum(top == 0))
    c, d = float(np.sum(bottom == 1)), float(np.sum(bottom == 0))
    if min(a, b, c, d) == 0:
        a, b, c, d = a + 0.5, b + 0.5, c + 0.5, d + 0.5
    return (a / b) / (c / d)


CSV_FIELDS = ["method", "seed", "mse", "sse", "auc", "odds_ratio", "comm_gradient_bytes",
              "comm_hessian_bytes", "rounds", "wall_ms", "error"]


@dataclass
class ReplicationReport:
    method: str
    seed: int
    mse: float = float("nan")
    sse: float = float("nan")
    auc: float = float("nan")
    odds_ratio: float = float("nan")
    comm_gradient_bytes: int = 0
    comm_hessian_bytes: int = 0
    rounds: int = 0
    wall_ms: float = 0.0
    error: str = ""
    extra: dict = field(default_factory=dict, repr=False)

    def row(self) -> dict:
        d = asdict(self)
        d.pop("extra")
        return d


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_reports_csv(path, reports, append: bool = False):
    path = Path(path)
    new = not (append and path.exists())
    with open(path, "a" if append else "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        if new:
            wr.writerow(CSV_FIELDS)
        for r in reports:
            row = r.row()
            wr.writerow([_fmt(row[k]) for k in CSV_FIELDS])


def read_reports_csv(path) -> list:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(ReplicationReport(
                method=row["method"], seed=int(row["seed"]), mse=float(row["mse"]),
                sse=float(row["sse"]), auc=float(row["auc"]), odds_ratio=float(row["odds_ratio"]),
                comm_gradient_bytes=int(row["comm_gradient_bytes"]),
                comm_hessian_bytes=int(row["comm_hessian_bytes"]), rounds=int(row["rounds"]),
                wall_ms=float(row["wall_ms"]), error=row["error"],
            ))
    return out


def summarize(values) -> dict:
    v = np.asarray([x for x in values if np.isfinite(x)], dtype=float)
    if v.size == 0:
        return {"n": 0, "mean": float("nan"), "median": float("nan"), "se": float("nan")}
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return {"n": int(v.size), "mean": float(v.mean()), "median": float(np.median(v)), "se": se}


def summarize_reports(reports) -> dict:
    """Per-method mean, median and standard error of each metric."""
    by = {}
    for r in reports:
        by.setdefault(r.method, []).append(r)
    out = {}
    for method, rs in by.items():
        ok = [r for r in rs if not r.error]
        out[method] = {
            "replications": len(rs),
            "failures": len(rs) - len(ok),
            **{m: summarize([getattr(r, m) for r in ok]) for m in ("mse", "sse", "auc", "odds_ratio")},
            "log_odds_ratio": summarize([math.log(r.odds_ratio) for r in ok if r.odds_ratio > 0]),
        }
    return out
