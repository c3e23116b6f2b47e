import math

import numpy as np
import pytest

from ollga.core import Policy, binned_theory_policy, static_policy, theory_policy
from ollga.exact import nearest_level_times, policy_runtime
from ollga.solver import IntervalSearchConfig, interval_bounds, optimal_lambda_at, optimal_policy


def test_config_validation():
    with pytest.raises(ValueError):
        IntervalSearchConfig(epsilon=0.3)
    with pytest.raises(ValueError):
        IntervalSearchConfig(epsilon=1e-8, tol=1e-7)


def test_interval_bounds():
    assert interval_bounds(10, 1) == (1.0, math.nextafter(1.5, 0.0))
    assert interval_bounds(10, 10) == (9.5, 10.0)
    lo, hi = interval_bounds(10, 4)
    assert lo == 3.5 and hi < 4.5 and math.nextafter(hi, 5.0) == 4.5


def test_single_bit():
    lam, T0, rec = optimal_lambda_at(1, 0, np.zeros(2))
    assert lam == 1.0 and T0 == pytest.approx(1.0)
    assert rec.capacity == 1


def test_top_level_matches_grid():
    n, f = 100, 99
    T = np.zeros(n + 1)
    lam, v, _ = optimal_lambda_at(n, f, T)
    grid = np.round(np.arange(1.0, n + 1e-9, 1e-3), 10)
    vals = nearest_level_times(n, f, grid, T)
    assert v <= vals.min() * (1 + 1e-6)
    assert v == pytest.approx(vals.min(), rel=1e-6)
    assert v == pytest.approx(nearest_level_times(n, f, [lam], T)[0], rel=1e-15)


def test_half_integers_near_optimum():
    n = 1000
    T = np.zeros(n + 1)
    for f in range(n - 1, n - 41, -1):
        lam, T[f], _ = optimal_lambda_at(n, f, T)
        if lam > 1:
            assert lam % 1.0 == 0.5, (f, lam)


@pytest.mark.parametrize("n", [30, 80])
def test_pruned_equals_exhaustive(n):
    a, ta = optimal_policy(n)
    b, tb = optimal_policy(n, IntervalSearchConfig(exhaustive=True))
    np.testing.assert_array_equal(a.lambdas, b.lambdas)
    assert ta.total == tb.total


def test_dominance_and_local_optimality():
    n = 60
    pol, table = optimal_policy(n)
    assert table.total == pytest.approx(policy_runtime(n, pol).total, rel=1e-12)
    others = [theory_policy(n), static_policy(n, 3.0), binned_theory_policy(n).to_policy(),
              binned_theory_policy(n, anchor="end").to_policy()]
    for other in others:
        assert table.total <= policy_runtime(n, other).total + 1e-9
    for f in range(n):
        for d in (-0.25, 0.25):
            lams = pol.lambdas.copy()
            lams[f] = min(float(n), max(1.0, lams[f] + d))
            assert policy_runtime(n, Policy(n, lams)).total >= table.total - 1e-9


def test_log_records_every_level():
    log = []
    optimal_policy(20, log=log)
    assert [r.f for r in log] == list(range(19, -1, -1))
    assert all(1 in r.candidates and 2 in r.candidates for r in log)
    assert set(log[0].to_dict()) == {"f", "lambda", "time", "capacity", "interior", "candidates"}


def test_n500_total():
    _, table = optimal_policy(500)
    assert table.total == pytest.approx(2916.94, abs=0.01)
