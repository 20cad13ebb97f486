import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fedtrans.metrics import (
    CSV_FIELDS,
    ReplicationReport,
    UndefinedMetricError,
    auc,
    mse,
    odds_ratio_quintiles,
    read_reports_csv,
    sse,
    summarize,
    summarize_reports,
    write_reports_csv,
)


def test_mse_examples():
    v = np.array([0.3, -1.0])
    assert mse(v, v) == 0.0
    assert mse([1.0, 0.0], [0.0, 0.0]) == 0.5
    rng = np.random.default_rng(0)
    a, b = rng.standard_normal(7), rng.standard_normal(7)
    assert mse(a, b) == pytest.approx(sum((x - y) ** 2 for x, y in zip(a, b)) / 7, rel=1e-14)
    assert sse([1.0, 2.0], [0.0, 0.0]) == 5.0
    with pytest.raises(ValueError):
        mse([1.0], [1.0, 2.0])


def brute_auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    tot = sum(1.0 if p > q else 0.5 if p == q else 0.0 for p in pos for q in neg)
    return tot / (len(pos) * len(neg))


def test_auc_examples():
    assert auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0
    assert auc([0.4] * 6, [1, 0, 1, 0, 1, 0]) == 0.5
    assert auc([0.9, 0.3, 0.8, 0.2], [1, 0, 0, 1]) == 0.5
    with pytest.raises(UndefinedMetricError):
        auc([0.1, 0.2], [1, 1])


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(2, 40))
def test_auc_matches_pair_enumeration_and_invariances(seed, n):
    rng = np.random.default_rng(seed)
    scores = np.round(rng.standard_normal(n), 1)
    labels = np.zeros(n, int)
    labels[rng.choice(n, rng.integers(1, n), replace=False)] = 1
    a = auc(scores, labels)
    assert a == pytest.approx(brute_auc(scores, labels), abs=1e-12)
    assert auc(np.exp(scores), labels) == a
    assert 0.0 <= a <= 1.0
    distinct = scores + np.arange(n) * 1e-6
    assert auc(distinct, labels) + auc(-distinct, labels) == pytest.approx(1.0, abs=1e-12)


def test_odds_ratio_examples():
    scores = np.arange(1.0, 11.0)
    labels = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1]
    assert odds_ratio_quintiles(scores, labels) == pytest.approx(25.0)
    lab = np.repeat([0, 1], 50)
    assert odds_ratio_quintiles(lab.astype(float), lab) > 100
    with pytest.raises(UndefinedMetricError):
        odds_ratio_quintiles(np.arange(9.0), [0, 1] * 4 + [0])
    with pytest.raises(UndefinedMetricError):
        odds_ratio_quintiles(np.arange(20.0), [1] * 20)


def test_odds_ratio_without_correction():
    # top 2: one positive, one negative; bottom 2 same -> OR 1
    scores = np.arange(10.0)
    labels = [1, 0, 0, 1, 0, 1, 0, 1, 0, 1]
    assert odds_ratio_quintiles(scores, labels) == 1.0
    assert odds_ratio_quintiles(scores ** 3 + 5, labels) == 1.0


def test_odds_ratio_near_one_for_noise():
    logs = []
    for seed in range(200):
        rng = np.random.default_rng(seed)
        logs.append(math.log(odds_ratio_quintiles(rng.standard_normal(1000), rng.integers(0, 2, 1000))))
    assert abs(np.mean(logs)) < 0.1


def test_summaries():
    s = summarize([1.0, 2.0, 3.0, float("nan")])
    assert s == {"n": 3, "mean": 2.0, "median": 2.0, "se": pytest.approx(1 / math.sqrt(3))}
    assert summarize([])["n"] == 0
    reps = [ReplicationReport("a", 1, mse=1.0, auc=0.6, odds_ratio=2.0),
            ReplicationReport("a", 2, error="boom")]
    out = summarize_reports(reps)
    assert out["a"]["replications"] == 2 and out["a"]["failures"] == 1
    assert out["a"]["mse"]["mean"] == 1.0
    assert out["a"]["log_odds_ratio"]["mean"] == pytest.approx(math.log(2.0))


def test_csv_round_trip_and_header(tmp_path):
    reps = [ReplicationReport("target_only", 3, 0.1, 20.0, 0.61, 1.7, 800, 16000, 3, 12.5),
            ReplicationReport("pooled", 3, error="ValueError: x")]
    path = tmp_path / "r.csv"
    write_reports_csv(path, reps)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(CSV_FIELDS)
    back = read_reports_csv(path)
    assert back[0].row() == reps[0].row()
    assert back[1].error == "ValueError: x" and math.isnan(back[1].mse)
    write_reports_csv(path, reps[:1], append=True)
    assert len(path.read_text().splitlines()) == 4
