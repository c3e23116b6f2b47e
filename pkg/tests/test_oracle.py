import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ollga.core import NEAREST, STOCHASTIC, Policy, RoundingMode, static_policy, theory_policy
from ollga.exact import policy_runtime
from ollga.oracle import MAX_N, oracle_level_table, oracle_runtime


def test_hand_values():
    T = oracle_level_table(2, static_policy(2, 1.0))
    np.testing.assert_allclose(T, [3.0, 3.0, 0.0], atol=1e-12)
    assert oracle_runtime(2, static_policy(2, 1.0)) == pytest.approx(2.25, abs=1e-12)
    assert oracle_runtime(1, static_policy(1, 1.0)) == pytest.approx(0.5, abs=1e-12)


def test_size_limit():
    with pytest.raises(ValueError):
        oracle_runtime(MAX_N + 1, static_policy(MAX_N + 1, 1.0))


@given(st.integers(1, MAX_N), st.data(), st.sampled_from(["nearest", "stochastic", "decoupled"]))
@settings(max_examples=60, deadline=None)
def test_dp_matches_oracle(n, data, mode):
    lams = data.draw(st.lists(st.floats(1.0, float(n)), min_size=n, max_size=n))
    if mode == "decoupled":
        caps = data.draw(st.lists(st.integers(1, n), min_size=n, max_size=n))
        rounding = RoundingMode.decoupled(caps)
    else:
        rounding = NEAREST if mode == "nearest" else STOCHASTIC
    pol = Policy(n, lams)
    dp = policy_runtime(n, pol, rounding)
    np.testing.assert_allclose(dp.T, oracle_level_table(n, pol, rounding), rtol=0, atol=1e-9)
    assert abs(dp.total - oracle_runtime(n, pol, rounding)) <= 1e-9


def test_half_integer_boundaries_agree():
    # probes on both sides of every half-integer exercise the rounding switch
    n = 6
    for h in (1.5, 2.5, 3.5, 4.5, 5.5):
        for lam in (h, np.nextafter(h, -np.inf)):
            pol = static_policy(n, float(lam))
            assert abs(policy_runtime(n, pol).total - oracle_runtime(n, pol)) <= 1e-9


def test_theory_n8():
    pol = theory_policy(8)
    assert abs(policy_runtime(8, pol).total - oracle_runtime(8, pol)) <= 1e-9


def test_simulator_matches_oracle_n6():
    from ollga.simulator import run_many
    pol = Policy(6, [1.0, 1.3, 2.2, 1.7, 3.5, 4.4])
    N = 10 ** 6
    ev = np.array([r.runtime for r in run_many(6, pol, seeds=range(N))], dtype=float)
    assert abs(ev.mean() - oracle_runtime(6, pol)) <= 4 * ev.std() / np.sqrt(N)
