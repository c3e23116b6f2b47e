"""Acceptance criteria, one test per criterion.

Each test prints a ``ACCEPTANCE <id>: PASS|FAIL`` line and the terminal
summary repeats them in order.  Run alone with
``pytest tests/test_acceptance.py -v`` or ``python3 tests/test_acceptance.py``.
Expect roughly two and a half hours on one core, most of it in criterion 5.
"""

import math
import os
import sys
import time

import numpy as np
import pytest

from conftest import record_acceptance
from ollga.binned import optimize_binned, optimize_binned_decoupled
from ollga.core import (
    BinnedPolicy,
    BinScheme,
    Policy,
    RoundingMode,
    bin_scheme,
    reference_binned_policy,
    theory_policy,
)
from ollga.es import EsConfig
from ollga.exact import policy_runtime, policy_runtime_explicit
from ollga.landscape import (
    SweepSpec,
    half_integer_jumps,
    sweep_1d,
    sweep_2d,
    sweep_fixed_capacity,
    within_interval_steps,
)
from ollga.oracle import oracle_runtime
from ollga.racing import TuningScenario, cascade, tune
from ollga.simulator import run_many
from ollga.solver import optimal_policy

EXTENDED = os.environ.get("OLLGA_EXTENDED") == "1"


def _close(x, target, tol):
    return abs(x - target) <= tol


def test_criterion_1_exact_totals():
    checks = [
        ("binned n=500", policy_runtime(500, reference_binned_policy(500)).total, 2925.52),
        ("theory n=500", policy_runtime(500, theory_policy(500)).total, 3224.89),
        ("theory n=1000", policy_runtime(1000, theory_policy(1000)).total, 6586.67),
    ]
    ok = all(_close(v, t, 0.01) for _, v, t in checks)
    record_acceptance("1", ok, "; ".join(f"{name} {v:.4f} (want {t} ± 0.01)"
                                         for name, v, t in checks))
    assert ok


def test_criterion_2_optimal_policy():
    got = {n: optimal_policy(n)[1].total for n in (500, 1000)}
    want = {500: 2916.94, 1000: 5975.81}
    ok = all(_close(got[n], want[n], 0.01) for n in want)
    detail = "; ".join(f"n={n} {got[n]:.4f} (want {want[n]} ± 0.01)" for n in want)
    record_acceptance("2", ok, detail)
    assert ok


@pytest.mark.skipif(not EXTENDED, reason="extended check, set OLLGA_EXTENDED=1")
def test_criterion_2_extended_n2000():
    t0 = time.time()
    total = optimal_policy(2000)[1].total
    ok = _close(total, 12157.62, 0.05)
    record_acceptance("2-ext", None, f"n=2000 {total:.4f} (want 12157.62 ± 0.05, "
                      f"{'match' if ok else 'no match'}, {time.time() - t0:.0f} s, non-gating)")


def test_criterion_3_oracle_equivalence():
    rng = np.random.default_rng(20240603)
    worst = 0.0
    cases = 0
    for n in range(2, 9):
        for _ in range(50):
            lams = rng.uniform(1.0, n, n)
            caps = rng.integers(1, n + 1, n)
            pol = Policy(n, lams)
            for rounding in (RoundingMode("nearest"), RoundingMode("stochastic"),
                             RoundingMode.decoupled(caps)):
                d = abs(policy_runtime(n, pol, rounding).total - oracle_runtime(n, pol, rounding))
                worst = max(worst, d)
                cases += 1
    ok = worst <= 1e-9
    record_acceptance("3", ok, f"{cases} cases, max |DP - oracle| = {worst:.2e} (limit 1e-9)")
    assert ok


def test_criterion_4_monte_carlo():
    n, N = 100, 10 ** 5
    recs = run_many(n, theory_policy(n), count=N, master_seed=4, accounting="full_iteration")
    ev = np.array([r.evaluations for r in recs], dtype=float)
    se = ev.std(ddof=1) / math.sqrt(N)
    dp = policy_runtime(n, theory_policy(n)).total
    z = (ev.mean() - 1 - dp) / se
    ok = abs(z) <= 4
    record_acceptance("4", ok, f"mean-1 = {ev.mean() - 1:.3f}, DP = {dp:.3f}, "
                      f"SE = {se:.3f}, |z| = {abs(z):.2f} (limit 4)")
    assert ok


TABLE3 = {"nearest": 534.3011, "stochastic": 540.7504, "decoupled": 488.9785}
CONVENTIONS = {
    "formula [0,50,75,88,94,97,99]": [0, 50, 75, 88, 94, 97, 99],
    "shifted [0,51,76,89,95,98,100]": [0, 51, 76, 89, 95, 98, 100],
}
PUBLISHED = {
    "nearest": ([1, 1, 1, 3.5, 5.5, 7.5, 10.5], None),
    "stochastic": ([1, 1, 1, 4.0, 6.0, 8.0688, 11.2628], None),
    "decoupled": ([83.9611, 1, 1, 1.4670, 3.0433, 4.8120, 6.9308], [3, 1, 1, 5, 8, 12, 19]),
}


def _published_total(scheme, variant):
    lams, caps = PUBLISHED[variant]
    if caps is None:
        return policy_runtime(100, BinnedPolicy(scheme, lams), variant).total
    pol = BinnedPolicy(scheme, lams).to_policy()
    return policy_runtime_explicit(100, pol, BinnedPolicy(scheme, caps).to_policy().lambdas
                                   .astype(int)).total


def _matching_convention():
    report = []
    best = None
    for name, bounds in CONVENTIONS.items():
        scheme = BinScheme.from_boundaries(100, bounds)
        err = 0.0
        parts = []
        for variant in ("nearest", "stochastic", "decoupled"):
            t = _published_total(scheme, variant)
            err = max(err, abs(t - TABLE3[variant]))
            parts.append(f"{variant} {t:.4f}")
        report.append(f"{name}: " + ", ".join(parts))
        if best is None or err < best[0]:
            best = (err, name, scheme)
    return best[1], best[2], report


@pytest.fixture(scope="module")
def table3_convention():
    name, scheme, report = _matching_convention()
    record_acceptance("5-conv", None, f"published policies under each convention: "
                      f"{' | '.join(report)}; using {name}")
    return scheme


@pytest.mark.parametrize("variant", ["nearest", "stochastic", "decoupled"])
def test_criterion_5_table3_variants(variant, table3_convention):
    scheme = table3_convention
    cfg = EsConfig(popsize=100, iterations=200, seed=5)
    t0 = time.time()
    if variant == "decoupled":
        res = optimize_binned_decoupled(100, scheme, cfg, restarts=10)
    else:
        res = optimize_binned(100, scheme, variant, cfg, restarts=10)
    target = TABLE3[variant]
    rel = (res.total - target) / target
    ok = abs(rel) <= 0.005
    lams = ", ".join(f"{x:.4g}" for x in res.policy.lambdas)
    caps = "" if res.policy.capacities is None else f", Λ [{', '.join(map(str, res.policy.capacities))}]"
    record_acceptance(f"5-{variant}", ok, f"{res.total:.4f} vs {target} ({rel:+.2%}, limit ±0.5%); "
                      f"λ [{lams}]{caps}; {time.time() - t0:.0f} s")
    assert ok


def test_criterion_6_saw_tooth():
    n = 500
    base = BinnedPolicy(bin_scheme(n, 9), [1, 1, 1, 1, 6.5, 8.5, 11.5, 16.5, 1.0])
    spec = SweepSpec(base, (-1,), 1.0, 40.0, 0.1, True)
    rows = sweep_1d(n, spec)
    threshold = 10 * float(np.median(within_interval_steps(rows)))
    jumps = half_integer_jumps(rows)
    small = [(h, j) for h, j in jumps if j <= threshold]
    saw_ok = len(jumps) == 39 and not small
    slice_max = 0.0
    for cap in (2, 7, 17, 25, 38):
        slice_max = max(slice_max, max(j for _, j in half_integer_jumps(
            sweep_fixed_capacity(n, spec, cap))))
    close = sweep_2d(n, SweepSpec(base, (-1,), 13.0, 18.0, 0.1, True, capacities=(13, 18)))
    close_step = 0.0
    for cap in range(13, 19):
        ys = [t for _, c, t in close if c == cap]
        close_step = max(close_step, float(np.max(np.abs(np.diff(ys)))))
    smooth_ok = slice_max < threshold and close_step < threshold
    ok = saw_ok and smooth_ok
    shown = ", ".join(f"{h}: {j:.4f}" for h, j in small[:6])
    record_acceptance("6", ok, (
        f"threshold {threshold:.4f}; {len(jumps) - len(small)}/{len(jumps)} half-integer jumps "
        f"exceed it" + (f" (below: {shown}{', ...' if len(small) > 6 else ''})" if small else "")
        + f"; fixed-Λ slices: max jump at half-integers {slice_max:.2e}, "
        f"max step in the λ∈[13,18] closeup {close_step:.4f}"))
    assert ok


_CASCADES: dict = {}


def _cascade_total(n, seed):
    key = (n, seed)
    if key not in _CASCADES:
        stages = cascade(n, defaults=TuningScenario(n, master_seed=seed))
        k, res = stages[-1]
        _CASCADES[key] = (k, policy_runtime(n, res.policy).total, res.validation_mean)
    return _CASCADES[key]


def test_criterion_7_cascade_beats_default():
    n = 1000
    default = policy_runtime(n, theory_policy(n)).total
    limit = 1.02 * default
    outcomes = []
    for seed in (1, 2, 3):
        k, total, vmean = _cascade_total(n, seed)
        outcomes.append((seed, total, total <= limit))
    t0 = time.time()
    naive = tune(TuningScenario(200, space="naive", master_seed=7, validation_runs=100))
    naive_ok = naive.runs_used <= 50000
    naive_total = policy_runtime(200, naive.policy).total
    ok = sum(p for _, _, p in outcomes) >= 2 and naive_ok
    record_acceptance("7", ok, (
        "cascade n=1000 exact totals " + ", ".join(f"seed {s}: {t:.2f}" for s, t, _ in outcomes)
        + f" (limit {limit:.2f}, majority needed); naive n=200 finished with "
        f"{naive.runs_used}/50000 runs, exact total {naive_total:.2f} "
        f"vs theory {policy_runtime(200, theory_policy(200)).total:.2f}, "
        f"{time.time() - t0:.0f} s"))
    assert ok


def test_criterion_8_ordering():
    parts = []
    ok = True
    for n in (500, 1000):
        best = optimal_policy(n)[1].total
        binned = policy_runtime(n, reference_binned_policy(n)).total
        default = policy_runtime(n, theory_policy(n)).total
        _, tuned, _ = _cascade_total(n, 1)
        holds = best <= binned <= min(default, tuned)
        ok &= holds
        parts.append(f"n={n}: best {best:.2f} <= binned {binned:.2f} <= "
                     f"min(default {default:.2f}, tuned {tuned:.2f}) {'holds' if holds else 'violated'}")
    record_acceptance("8", ok, "; ".join(parts))
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-p", "no:cacheprovider"]))
