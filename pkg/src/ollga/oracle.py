"""Brute-force Markov-chain reference for tiny problem sizes.

Every mutation flip-set and every crossover subset is enumerated explicitly;
best-of-Λ selection uses exact order statistics of the enumerated
per-offspring distributions.  The fitness-level chain is then solved as a
linear system.  Nothing here is shared with :mod:`ollga.exact`.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict

import numpy as np

from .core import NEAREST, BinnedPolicy, Policy, RoundingMode

MAX_N = 8


def _max_dist(values: dict, capacity: int) -> dict:
    """Distribution of the max of ``capacity`` draws; ``None`` ranks lowest."""
    keys = sorted(values, key=lambda v: -math.inf if v is None else v)
    out = {}
    below = 0.0
    for v in keys:
        at_most = below + values[v]
        out[v] = at_most ** capacity - below ** capacity
        below = at_most
    return out


def _transitions(n: int, f: int, lam: float, capacity: int):
    """(next-fitness distribution, expected evaluations) for one iteration."""
    x = [1] * f + [0] * (n - f)
    q = lam / n
    norm = 1.0 - (1.0 - q) ** n
    r = 1.0 / lam
    nxt = defaultdict(float)
    cost = float(capacity)
    for ell in range(1, n + 1):
        p_ell = math.comb(n, ell) * q ** ell * (1.0 - q) ** (n - ell) / norm
        if p_ell == 0.0:
            continue
        flipsets = list(itertools.combinations(range(n), ell))
        by_fit = defaultdict(list)
        for s in flipsets:
            fit = sum(1 - x[i] if i in s else x[i] for i in range(n))
            by_fit[fit].append(s)
        single = {v: len(ss) / len(flipsets) for v, ss in by_fit.items()}
        # offspring equal to a parent are not evaluated
        cost += capacity * p_ell * (1.0 - r ** ell - (1.0 - r) ** ell)
        for v_mut, p_v in _max_dist(single, capacity).items():
            if p_v == 0.0:
                continue
            for s in by_fit[v_mut]:
                w = p_ell * p_v / len(by_fit[v_mut])
                cross = defaultdict(float)
                for size in range(ell + 1):
                    for sub in itertools.combinations(s, size):
                        pr = r ** size * (1.0 - r) ** (ell - size)
                        if size == 0 or size == ell:
                            cross[None] += pr
                        else:
                            fit = sum(1 - x[i] if i in sub else x[i] for i in range(n))
                            cross[fit] += pr
                for v_cross, p_c in _max_dist(dict(cross), capacity).items():
                    y = v_cross if v_cross is not None and v_cross > v_mut else v_mut
                    nxt[y if y >= f else f] += w * p_c
    return dict(nxt), cost


def _capacities(lam: float, f: int, rounding: RoundingMode):
    if rounding.kind == "nearest":
        c = int(math.floor(lam + 0.5))
        return [(c, 1.0)]
    if rounding.kind == "decoupled":
        return [(rounding.capacities[f], 1.0)]
    lo, hi = math.floor(lam), math.ceil(lam)
    if lo == hi:
        return [(int(lo), 1.0)]
    return [(int(lo), hi - lam), (int(hi), lam - lo)]


def oracle_level_table(n: int, policy, rounding: RoundingMode = NEAREST) -> np.ndarray:
    """Remaining expected runtimes ``T[0..n]`` from the enumerated chain."""
    if n > MAX_N:
        raise ValueError(f"oracle is limited to n <= {MAX_N}")
    if isinstance(policy, BinnedPolicy):
        policy = policy.to_policy()
    if isinstance(policy, Policy):
        lams = [float(v) for v in policy.lambdas]
    else:
        lams = [float(v) for v in policy]
    A = np.eye(n)
    b = np.zeros(n)
    for f in range(n):
        for cap, wcap in _capacities(lams[f], f, rounding):
            nxt, cost = _transitions(n, f, lams[f], cap)
            b[f] += wcap * cost
            for g, p in nxt.items():
                if g < n:
                    A[f, g] -= wcap * p
    T = np.zeros(n + 1)
    T[:n] = np.linalg.solve(A, b)
    return T


def oracle_runtime(n: int, policy, rounding: RoundingMode = NEAREST) -> float:
    """Initialization-weighted expected runtime (initial evaluation excluded)."""
    T = oracle_level_table(n, policy, rounding)
    return float(sum(math.comb(n, f) * T[f] for f in range(n + 1)) / 2 ** n)
