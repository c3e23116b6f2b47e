import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ollga.core import (
    BinnedPolicy,
    BinScheme,
    Policy,
    RoundingMode,
    bin_scheme,
    binned_theory_policy,
    dumps_policy,
    loads_policy,
    max_bins,
    reference_binned_policy,
    round_nearest,
    static_policy,
    theory_policy,
)


@pytest.mark.parametrize("f, expected", [(0, 1.0), (99, 10.0), (96, 5.0)])
def test_theory_policy_values(f, expected):
    assert theory_policy(100).lambdas[f] == pytest.approx(expected, abs=1e-15)


@given(st.integers(1, 300))
def test_theory_policy_range_and_monotone(n):
    lams = theory_policy(n).lambdas
    assert len(lams) == n
    assert lams.min() >= 1.0 and lams.max() <= math.sqrt(n) + 1e-12
    assert np.all(np.diff(lams) >= 0)


def test_round_nearest_examples():
    assert round_nearest(6.5) == 7
    assert round_nearest(math.nextafter(6.5, -math.inf)) == 6
    assert round_nearest(1.0) == 1
    assert round_nearest(11.5) == 12


@given(st.floats(1.0, 999.0, allow_nan=False))
def test_round_nearest_shift(x):
    y = x + 1.0
    if y - 1.0 != x:  # the shift itself rounded; the property is about exact shifts
        return
    assert round_nearest(y) == round_nearest(x) + 1


@given(st.floats(1.0, 1000.0, allow_nan=False))
def test_round_nearest_definition(x):
    frac = x - math.floor(x)
    assert round_nearest(x) == (math.floor(x) if frac < 0.5 else math.ceil(x))


def test_bin_scheme_examples():
    s = bin_scheme(20, 4)
    assert list(s.boundaries) == [0, 10, 15, 18]
    assert s.bins() == [(0, 9), (10, 14), (15, 17), (18, 20)]
    assert bin_scheme(20, 1).bins() == [(0, 20)]
    s9 = bin_scheme(500, 9)
    assert list(s9.boundaries) == [0, 250, 375, 438, 469, 485, 493, 497, 499]
    assert s9.bins()[-1] == (499, 500)


@pytest.mark.parametrize("k", [0, 6])
def test_bin_scheme_rejects_bad_k(k):
    assert max_bins(20) == 5
    with pytest.raises(ValueError):
        bin_scheme(20, k)


@given(st.integers(2, 2000), st.data())
def test_bin_scheme_prefix_property(n, data):
    K = max_bins(n)
    k1 = data.draw(st.integers(1, K))
    k2 = data.draw(st.integers(1, K))
    a, b = bin_scheme(n, k1).boundaries, bin_scheme(n, k2).boundaries
    m = min(k1, k2)
    assert list(a[:m]) == list(b[:m])
    # bins cover [0..n] disjointly and are non-empty
    cover = [f for lo, hi in bin_scheme(n, K).bins() for f in range(lo, hi + 1)]
    assert cover == list(range(n + 1))


@given(st.integers(2, 500), st.data())
def test_binned_expansion(n, data):
    k = data.draw(st.integers(1, max_bins(n)))
    vals = data.draw(st.lists(st.floats(1.0, float(n)), min_size=k, max_size=k))
    bp = BinnedPolicy(bin_scheme(n, k), vals)
    pol = bp.to_policy()
    for i, (lo, hi) in enumerate(bp.scheme.bins()):
        for f in range(lo, min(hi, n - 1) + 1):
            assert pol.lambdas[f] == vals[i]


def test_binned_theory_anchors():
    r2 = math.sqrt(2.0)
    assert binned_theory_policy(20, 4, "start").lambdas[1] == pytest.approx(r2)
    assert binned_theory_policy(20, 4, "end").lambdas[1] == pytest.approx(math.sqrt(20 / 6))
    assert binned_theory_policy(20, 4, "middle").lambdas[2] == pytest.approx(math.sqrt(5.0))


def test_reference_binned_policy():
    bp = reference_binned_policy(500)
    assert bp.k == 9
    assert list(bp.lambdas) == [1, 1, 1, 1, 6.5, 8.5, 11.5, 16.5, 24.5]


def test_policy_validation():
    with pytest.raises(ValueError):
        Policy(3, [1.0, 2.0])
    with pytest.raises(ValueError):
        Policy(3, [1.0, 0.5, 2.0])
    with pytest.raises(ValueError):
        Policy(3, [1.0, 2.0, 3.5])


def test_rounding_mode():
    assert RoundingMode.parse("nearest").kind == "nearest"
    with pytest.raises(ValueError):
        RoundingMode.parse("decoupled")
    with pytest.raises(ValueError):
        RoundingMode.decoupled([1, 4, 1])
    caps, w = RoundingMode("stochastic").capacity_mixture(3.25, 0)
    assert caps == (3, 4) and w == pytest.approx((0.75, 0.25))
    assert RoundingMode("stochastic").capacity_mixture(3.0, 0) == ((3, 3), (1.0, 0.0))


@given(st.integers(1, 60), st.data())
def test_policy_roundtrip(n, data):
    lams = data.draw(st.lists(st.floats(1.0, float(n)), min_size=n, max_size=n))
    caps = data.draw(st.none() | st.lists(st.integers(1, n), min_size=n, max_size=n))
    p = Policy(n, lams, caps)
    assert loads_policy(dumps_policy(p)) == p
    assert Policy.from_csv(p.to_csv()) == p


def test_binned_roundtrip():
    bp = BinnedPolicy(BinScheme.from_boundaries(100, [0, 51, 76, 89, 95, 98, 100]),
                      [1, 1, 1, 3.5, 5.5, 7.5, 10.5])
    back = loads_policy(dumps_policy(bp))
    assert list(back.scheme.boundaries) == [0, 51, 76, 89, 95, 98, 100]
    assert list(back.lambdas) == list(bp.lambdas)
    assert static_policy(10, 2.5).lambdas.tolist() == [2.5] * 10
