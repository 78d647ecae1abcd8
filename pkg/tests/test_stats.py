import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from percept_probe.errors import ConstantSeries, LengthMismatch, TooFew, ValidationError
from percept_probe.experiments import GroupResult
from percept_probe.stats import (average_ranks, correlate_experiment, read_scatter_csv,
                                 scatter_export, spearman)


def brute_ranks(x):
    """Average each element's rank over every ordering that respects the values."""
    n = len(x)
    distinct = sorted(set(x))
    ties = [[i for i in range(n) if x[i] == v] for v in distinct]
    total = [0.0] * n
    count = 0
    for orders in itertools.product(*(itertools.permutations(t) for t in ties)):
        flat = [i for group in orders for i in group]
        for rank, i in enumerate(flat, start=1):
            total[i] += rank
        count += 1
    return [t / count for t in total]


def pearson(a, b):
    ma, mb = sum(a) / len(a), sum(b) / len(b)
    cov = math.fsum((p - ma) * (q - mb) for p, q in zip(a, b))
    va = math.fsum((p - ma) ** 2 for p in a)
    vb = math.fsum((q - mb) ** 2 for q in b)
    return cov / math.sqrt(va * vb)


def oracle_rho(x, y):
    return pearson(brute_ranks(x), brute_ranks(y))


def test_fixtures():
    assert spearman([1, 2, 3], [10, 20, 30]) == 1.0
    assert spearman([1, 2, 3], [3, 2, 1]) == -1.0
    assert spearman([1, 2, 3, 4, 5], [2, 1, 4, 3, 5]) == 0.8


def test_average_ranks():
    np.testing.assert_array_equal(average_ranks([10, 20, 10, 30, 20]), [1.5, 3.5, 1.5, 5, 3.5])


def test_matches_brute_force(rng):
    for _ in range(200):
        n = int(rng.integers(3, 9))
        x = [int(v) for v in rng.integers(0, 4, n)]
        y = [int(v) for v in rng.integers(0, 4, n)]
        if len(set(x)) == 1 or len(set(y)) == 1:
            continue
        assert spearman(x, y) == pytest.approx(oracle_rho(x, y), abs=1e-9)


def test_errors():
    with pytest.raises(LengthMismatch):
        spearman([1, 2, 3], [1, 2])
    with pytest.raises(TooFew):
        spearman([1, 2], [1, 2])
    with pytest.raises(ConstantSeries):
        spearman([1, 1, 1], [1, 2, 3])
    with pytest.raises(ValidationError):
        spearman([1, 2, np.nan], [1, 2, 3])


series = st.lists(st.integers(-5, 5), min_size=3, max_size=12)


@settings(max_examples=100, deadline=None)
@given(series, series)
def test_symmetric(x, y):
    n = min(len(x), len(y))
    x, y = x[:n], y[:n]
    if n < 3 or len(set(x)) == 1 or len(set(y)) == 1:
        return
    assert spearman(x, y) == pytest.approx(spearman(y, x), abs=1e-12)


def _monotone(rng):
    knots = np.concatenate([[-10.0], np.sort(rng.uniform(-10, 10, 4)), [10.0]])
    vals = np.cumsum(rng.uniform(0.1, 3.0, 6))
    return lambda v: np.interp(v, knots, vals)


def test_monotone_invariance(rng):
    for _ in range(100):
        x = rng.uniform(-10, 10, 10)
        y = rng.uniform(-10, 10, 10)
        f, g = _monotone(rng), _monotone(rng)
        fx, gy = f(x), g(y)
        assert spearman(fx, gy) == pytest.approx(spearman(x, y), abs=1e-12)


def _groups(dist, acc):
    return [GroupResult((f"dev{k % 5}", f"bg{k // 5}"), d, a, 4)
            for k, (d, a) in enumerate(zip(dist, acc))]


def test_correlate_perfect_inverse():
    rep = correlate_experiment(_groups([0.1, 0.2, 0.3, 0.4], [0.9, 0.7, 0.5, 0.1]), "background")
    assert rep.rho == -1.0 and rep.abs_rho == 1.0 and rep.n_groups == 4
    flipped = correlate_experiment(_groups([0.1, 0.2, 0.3, 0.4], [0.9, 0.7, 0.5, 0.1]),
                                   sign="similarity")
    assert flipped.rho == 1.0


def test_correlate_unrelated_bounded(rng):
    rep = correlate_experiment(_groups(rng.random(25), rng.random(25)))
    assert abs(rep.rho) <= 1.0


def test_scatter_round_trip(tmp_path, rng):
    rep = correlate_experiment(_groups(rng.random(25), rng.random(25)), "background", "mock",
                               "Color", "l2")
    csv_path, svg_path = scatter_export(rep, tmp_path / "scatter" / "bg")
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "group_key,mean_distance,mean_accuracy" and len(lines) == 26
    rows = read_scatter_csv(csv_path)
    again = spearman([r[1] for r in rows], [r[2] for r in rows])
    assert abs(again - rep.rho) <= 1e-12
    svg = svg_path.read_text()
    assert "average feature distance" in svg and "top-5 accuracy" in svg
    assert svg.count("<circle class=") == 25 + 5


def test_scatter_refuses_tiny(tmp_path):
    rep = correlate_experiment(_groups([0.1, 0.2, 0.3], [0.3, 0.2, 0.1]))
    rep.rows = []
    with pytest.raises(TooFew):
        scatter_export(rep, tmp_path / "x")


@settings(max_examples=100, deadline=None)
@given(series, series)
def test_reversal_flips_sign(x, y):
    n = min(len(x), len(y))
    x, y = x[:n], y[:n]
    if n < 3 or len(set(x)) == 1 or len(set(y)) == 1:
        return
    assert spearman(x, [-v for v in y]) == pytest.approx(-spearman(x, y), abs=1e-12)
