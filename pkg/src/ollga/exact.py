"""Exact expected runtime of the (1+(λ,λ)) GA on OneMax by backward DP.

For a parent of fitness ``f`` one iteration is summarised by the cost ``τ``
(expected evaluations), the improvement probability ``p`` and the
probability-weighted sum ``S`` of remaining times after an improvement.  The
remaining time then is ``T_f = (τ + S) / p`` with ``T_n = 0``.

All binomial and hypergeometric terms are formed from log-factorials and only
exponentiated when summed.  Sums run outward from the mode and stop once a
term no longer changes the running sum in double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit, types
from numba.typed import Dict

from .core import NEAREST, BinnedPolicy, Policy, RoundingMode, round_nearest

__all__ = [
    "RuntimeTable",
    "IterationOutcome",
    "NoProgressError",
    "CrossoverCache",
    "log_factorials",
    "mutation_good_dist",
    "best_of",
    "crossover_truncated_dist",
    "iteration_cost",
    "remaining_time",
    "policy_runtime",
    "policy_runtime_explicit",
    "level_times",
    "init_weights",
]

# Crossover tail probabilities below this are dropped.
_TAIL = 1e-22
# Joint (ℓ, g) weights below this are skipped.
_NEGLIGIBLE = 1e-24


class NoProgressError(ArithmeticError):
    """The improvement probability at some fitness level is exactly zero."""

    def __init__(self, f: int, lam: float):
        super().__init__(f"no improvement possible at fitness {f} with lambda={lam!r}")
        self.f = f
        self.lam = lam


@dataclass(frozen=True)
class RuntimeTable:
    n: int
    T: np.ndarray
    total: float


@dataclass(frozen=True)
class IterationOutcome:
    p_improve: float
    t_conditional: float
    cost: float


# ---------------------------------------------------------------------------
# numba kernels

@njit(cache=True)
def log_factorials(n):
    out = np.empty(n + 1)
    for i in range(n + 1):
        out[i] = math.lgamma(i + 1.0)
    return out


@njit(cache=True)
def _log_binom(lf, a, b):
    return lf[a] - lf[b] - lf[a - b]


@njit(cache=True)
def _ell_pmf(n, ell, lq, l1q, lnorm, lf):
    return math.exp(_log_binom(lf, n, ell) + ell * lq + (n - ell) * l1q - lnorm)


@njit(cache=True)
def _ell_distribution(n, lam, lf):
    """Truncated Bin_{>0}(n, lam/n) as (first ℓ, probabilities)."""
    q = lam / n
    if q >= 1.0:
        out = np.ones(1)
        return n, out
    lq = math.log(q)
    l1q = math.log1p(-q)
    lnorm = math.log(-math.expm1(n * l1q))
    mode = int((n + 1) * q)
    if mode < 1:
        mode = 1
    if mode > n:
        mode = n
    s = _ell_pmf(n, mode, lq, l1q, lnorm, lf)
    hi = mode
    while hi < n:
        p = _ell_pmf(n, hi + 1, lq, l1q, lnorm, lf)
        if s + p == s:
            break
        s += p
        hi += 1
    lo = mode
    while lo > 1:
        p = _ell_pmf(n, lo - 1, lq, l1q, lnorm, lf)
        if s + p == s:
            break
        s += p
        lo -= 1
    out = np.empty(hi - lo + 1)
    for ell in range(lo, hi + 1):
        out[ell - lo] = _ell_pmf(n, ell, lq, l1q, lnorm, lf)
    return lo, out


@njit(cache=True)
def _cost_per_offspring(lam, lo, pl):
    """Expected evaluations per unit of population size (mutation + crossover)."""
    if lam == 1.0:
        return 1.0
    r = 1.0 / lam
    rb = (lam - 1.0) / lam
    e = 0.0
    for i in range(pl.shape[0]):
        ell = lo + i
        e += pl[i] * (1.0 - r ** ell - rb ** ell)
    return 1.0 + e


@njit(cache=True)
def _crossover_tail(ell, g, lam, lf, buf):
    """Per-offspring tail ``buf[j] = P(δ_g - δ_b > c + j)``, ``c = max(0, 2g - ℓ)``.

    Returns the number of stored entries; later entries are below ``_TAIL``.
    """
    if lam == 1.0 or g == 0:
        return 0
    c = 2 * g - ell
    if c < 0:
        c = 0
    if c >= g:
        return 0
    b = ell - g
    lr = -math.log(lam)
    lrb = math.log((lam - 1.0) / lam)
    mean = g / lam
    # δ_g pmf on [c+1, amax]
    pg = np.empty(g - c)
    amax = c
    for a in range(c + 1, g + 1):
        v = math.exp(_log_binom(lf, g, a) + a * lr + (g - a) * lrb)
        pg[a - c - 1] = v
        amax = a
        if a > mean and v < 1e-30:
            break
    # cdf of δ_b on [0, amax - c - 1]
    kmax = amax - c - 1
    fb = np.empty(kmax + 1)
    acc = 0.0
    for k in range(kmax + 1):
        if k <= b:
            acc += math.exp(_log_binom(lf, b, k) + k * lr + (b - k) * lrb)
        fb[k] = acc if acc < 1.0 else 1.0
    J = 0
    for j in range(amax - c):
        m = c + j
        s = 0.0
        for a in range(m + 1, amax + 1):
            s += pg[a - c - 1] * fb[a - m - 1]
        if s < _TAIL:
            break
        buf[j] = s
        J = j + 1
    return J


@njit(cache=True)
def _good_survival(n, f, ell, lf, sm):
    """Survival ``sm[i] = P(I > i)`` of the repaired-bit count ``I`` of one mutant.

    ``I`` is hypergeometric; terms are generated by ratios outward from the
    mode and dropped once they no longer change the sum.  Returns the kept
    range ``(i_lo, i_hi)``; below it the survival is taken as 1.
    """
    good = n - f
    imin = ell - f if ell > f else 0
    imax = ell if ell < good else good
    mode = (ell + 1) * (good + 1) // (n + 2)
    if mode < imin:
        mode = imin
    if mode > imax:
        mode = imax
    pm = math.exp(_log_binom(lf, good, mode) + _log_binom(lf, f, ell - mode)
                  - _log_binom(lf, n, ell))
    total = pm
    hi = mode
    t = pm
    while hi < imax:
        t *= (good - hi) * (ell - hi) / ((hi + 1.0) * (f - ell + hi + 1.0))
        if total + t == total:
            break
        hi += 1
        sm[hi] = t
        total += t
    lo = mode
    t = pm
    while lo > imin:
        t *= lo * (f - ell + lo) / ((good - lo + 1.0) * (ell - lo + 1.0))
        if total + t == total:
            break
        lo -= 1
        sm[lo] = t
        total += t
    sm[mode] = pm
    acc = 0.0
    for i in range(hi, lo - 1, -1):
        t = sm[i]
        sm[i] = acc
        acc += t
    return lo, hi


@njit(cache=True)
def _best_tail(tail, cap):
    """``P(max of cap offspring exceeds threshold j)`` from per-offspring tails."""
    out = np.empty(tail.shape[0])
    for j in range(tail.shape[0]):
        out[j] = -math.expm1(cap * math.log1p(-tail[j]))
    return out


@njit(cache=True)
def _level(n, f, lam, caps, wts, T, lf, lo, pl, memo, use_memo, buf, sm, gmemo):
    """Mixture-weighted (S, p) for one fitness level.

    With ``use_memo`` the best-of-Λ tails are kept in ``gmemo``, which is
    only valid for fixed ``caps``.
    """
    good = n - f
    S = 0.0
    p = 0.0
    for il in range(pl.shape[0]):
        ell = lo + il
        pell = pl[il]
        imin, imax = _good_survival(n, f, ell, lf, sm)
        for ic in range(2):
            w_cap = wts[ic]
            if w_cap == 0.0:
                continue
            cap = caps[ic]
            gt_prev = 1.0  # P(best > g - 1)
            for g in range(imin, imax + 1):
                s_g = sm[g]
                if s_g >= 1.0:
                    gt = 1.0
                elif s_g <= 0.0:
                    gt = 0.0
                elif cap == 1:
                    gt = s_g
                else:
                    gt = -math.expm1(cap * math.log1p(-s_g))
                pg = gt_prev - gt
                gt_prev = gt
                if g == 0:
                    continue
                w = w_cap * pell * pg
                if w < _NEGLIGIBLE:
                    continue
                c = 2 * g - ell
                if c < 0:
                    c = 0
                J = 0
                if lam != 1.0 and c < g:
                    key = ell * (n + 1) + g
                    if use_memo:
                        gkey = ic * (n + 1) * (n + 1) + key
                        if gkey in gmemo:
                            best = gmemo[gkey]
                        else:
                            if key in memo:
                                tail = memo[key]
                            else:
                                J0 = _crossover_tail(ell, g, lam, lf, buf)
                                tail = buf[:J0].copy()
                                memo[key] = tail
                            best = _best_tail(tail, cap)
                            gmemo[gkey] = best
                    else:
                        J0 = _crossover_tail(ell, g, lam, lf, buf)
                        best = _best_tail(buf[:J0], cap)
                    J = best.shape[0]
                base = f + c
                extra = 0.0
                g0 = 0.0
                for j in range(J):
                    gj = best[j]
                    if j == 0:
                        g0 = gj
                    if c == 0 and j == 0:
                        extra += gj * T[f + 1]
                    else:
                        extra += gj * (T[base + j + 1] - T[base + j])
                if c >= 1:
                    p += w
                    S += w * (T[base] + extra)
                else:
                    p += w * g0
                    S += w * extra
    return S, p


@njit(cache=True)
def _sweep_block(n, f_lo, f_hi, lam, caps, wts, T, lf, memo):
    """Fill ``T[f]`` for ``f = f_hi .. f_lo`` (descending) with one (λ, Λ-mixture).

    Returns -1 on success or the first fitness without progress.
    """
    lo, pl = _ell_distribution(n, lam, lf)
    unit = _cost_per_offspring(lam, lo, pl)
    tau = unit * (wts[0] * caps[0] + wts[1] * caps[1])
    buf = np.empty(n + 2)
    sm = np.empty(n + 2)
    gmemo = Dict.empty(key_type=types.int64, value_type=types.float64[:])
    for f in range(f_hi, f_lo - 1, -1):
        S, p = _level(n, f, lam, caps, wts, T, lf, lo, pl, memo, True, buf, sm, gmemo)
        if p <= 0.0:
            return f
        T[f] = (tau + S) / p
    return -1


@njit(cache=True)
def _probe_levels(n, f, lams, caps_a, caps_b, w_a, T, lf):
    """``T_f`` for a batch of (λ, Λ-mixture) probes at one fitness level."""
    out = np.empty(lams.shape[0])
    buf = np.empty(n + 2)
    sm = np.empty(n + 2)
    memo = Dict.empty(key_type=types.int64, value_type=types.float64[:])
    caps = np.empty(2, dtype=np.int64)
    wts = np.empty(2)
    for i in range(lams.shape[0]):
        lam = lams[i]
        caps[0] = caps_a[i]
        caps[1] = caps_b[i]
        wts[0] = w_a[i]
        wts[1] = 1.0 - w_a[i]
        lo, pl = _ell_distribution(n, lam, lf)
        unit = _cost_per_offspring(lam, lo, pl)
        tau = unit * (wts[0] * caps[0] + wts[1] * caps[1])
        S, p = _level(n, f, lam, caps, wts, T, lf, lo, pl, memo, False, buf, sm, memo)
        out[i] = (tau + S) / p if p > 0.0 else np.inf
    return out


@njit(cache=True)
def _memo_footprint(memo):
    nbytes = 0
    for key, val in memo.items():
        nbytes += 8 * val.shape[0] + 48
    return nbytes


# ---------------------------------------------------------------------------
# shared state

_LF_CACHE: dict[int, np.ndarray] = {}


def _lf(n: int) -> np.ndarray:
    lf = _LF_CACHE.get(n)
    if lf is None:
        lf = log_factorials(n)
        lf.setflags(write=False)
        _LF_CACHE[n] = lf
    return lf


def _new_memo():
    return Dict.empty(key_type=types.int64, value_type=types.float64[:])


class CrossoverCache:
    """Per-λ tables of crossover tail probabilities, bounded in memory.

    Entries do not depend on the parent fitness, so they are shared by every
    level (and every policy evaluation) that uses the same λ and n.  When the
    byte budget is exceeded the tables with the smallest recomputation cost
    (sum of g² over their entries) are evicted first.
    """

    def __init__(self, max_bytes: int = 2 * 1024 ** 3):
        self.max_bytes = int(max_bytes)
        self._tables: dict[tuple[int, float], object] = {}
        self._sizes: dict[tuple[int, float], int] = {}
        self._costs: dict[tuple[int, float], float] = {}
        self.nbytes = 0

    def get(self, n: int, lam: float):
        key = (n, float(lam))
        memo = self._tables.get(key)
        if memo is None:
            memo = _new_memo()
            self._tables[key] = memo
            self._sizes[key] = 0
            self._costs[key] = 0.0
        return memo

    def account(self, n: int, lam: float) -> None:
        key = (n, float(lam))
        memo = self._tables.get(key)
        if memo is None:
            return
        size = _memo_footprint(memo)
        self.nbytes += size - self._sizes[key]
        self._sizes[key] = size
        self._costs[key] = float(sum((k % (n + 1)) ** 2 for k in memo.keys()))
        if self.nbytes > self.max_bytes:
            self._evict(keep=key)

    def _evict(self, keep) -> None:
        order = sorted((c, k) for k, c in self._costs.items() if k != keep)
        for _, k in order:
            if self.nbytes <= self.max_bytes:
                break
            self.nbytes -= self._sizes.pop(k)
            self._costs.pop(k)
            del self._tables[k]

    def clear(self) -> None:
        self._tables.clear()
        self._sizes.clear()
        self._costs.clear()
        self.nbytes = 0

    def __len__(self) -> int:
        return len(self._tables)


_DEFAULT_CACHE = CrossoverCache(max_bytes=256 * 1024 ** 2)


def default_cache() -> CrossoverCache:
    return _DEFAULT_CACHE


# ---------------------------------------------------------------------------
# single-distribution helpers (readable reference forms of the kernel steps)

def mutation_good_dist(n: int, f: int, ell: int) -> np.ndarray:
    """P(one mutant flips ``i`` zero-bits), ``i = 0..ell`` (hypergeometric)."""
    lf = _lf(n)
    out = np.zeros(ell + 1)
    good = n - f
    for i in range(max(0, ell - f), min(ell, good) + 1):
        out[i] = math.exp(lf[good] - lf[i] - lf[good - i]
                          + lf[f] - lf[ell - i] - lf[f - ell + i]
                          - (lf[n] - lf[ell] - lf[n - ell]))
    return out


def best_of(dist, capacity: int) -> np.ndarray:
    """Distribution of the maximum of ``capacity`` i.i.d. draws from ``dist``."""
    dist = np.asarray(dist, dtype=np.float64)
    if abs(dist.sum() - 1.0) > 1e-12:
        raise ValueError("distribution must sum to 1")
    # survival-based form keeps the upper tail accurate
    sf = np.concatenate([1.0 - np.cumsum(dist[:-1]), [0.0]])
    sf = np.clip(sf, 0.0, 1.0)
    gt = -np.expm1(capacity * np.log1p(-np.minimum(sf, 1.0 - 1e-300)))
    gt = np.where(sf >= 1.0, 1.0, gt)
    prev = np.concatenate([[1.0], gt[:-1]])
    return prev - gt


def crossover_truncated_dist(n: int, f: int, ell: int, g: int, lam: float) -> np.ndarray:
    """Truncated fitness change of one crossover offspring, over ``δ = 0..ell``.

    ``δ = max(0, 2g - ℓ, δ_g - δ_b)``: offspring identical to a parent fold
    into the fallback to the best mutant.
    """
    out = np.zeros(ell + 1)
    c = max(0, 2 * g - ell)
    lf = _lf(max(n, ell))
    buf = np.empty(ell + 2)
    J = _crossover_tail(ell, g, float(lam), lf, buf)
    tail = np.concatenate([[1.0], buf[:J], [0.0]])
    # tail[j] = P(δ > c + j - 1)
    out[c:c + J + 1] = tail[:-1] - tail[1:]
    return out


def iteration_cost(n: int, lam: float, capacity: float) -> float:
    """Expected evaluations of one iteration: mutants plus distinct crossover offspring."""
    lo, pl = _ell_distribution(n, float(lam), _lf(n))
    return float(capacity) * _cost_per_offspring(float(lam), lo, pl)


def _mixture(lam: float, f: int, rounding: RoundingMode, capacity=None):
    if capacity is not None:
        return (int(capacity), int(capacity)), (1.0, 0.0)
    return rounding.capacity_mixture(lam, f)


def remaining_time(n: int, f: int, lam: float, capacity: int | None, T_above,
                   rounding: RoundingMode = NEAREST) -> tuple[float, IterationOutcome]:
    """``T_f`` given ``T[f+1..n]`` (``T_above`` indexed by absolute fitness).

    ``capacity=None`` derives Λ from ``rounding``.
    """
    T = np.zeros(n + 1)
    T_above = np.asarray(T_above, dtype=np.float64)
    if T_above.shape[0] == n + 1:
        T[f + 1:] = T_above[f + 1:]
    else:
        T[f + 1:] = T_above
    caps, wts = _mixture(lam, f, rounding, capacity)
    lf = _lf(n)
    lo, pl = _ell_distribution(n, float(lam), lf)
    tau = _cost_per_offspring(float(lam), lo, pl) * (wts[0] * caps[0] + wts[1] * caps[1])
    S, p = _level(n, f, float(lam), np.array(caps, dtype=np.int64), np.array(wts), T, lf,
                  lo, pl, _new_memo(), False, np.empty(n + 2), np.empty(n + 2), _new_memo())
    if p <= 0.0:
        raise NoProgressError(f, lam)
    return (tau + S) / p, IterationOutcome(p, S / p, tau)


# ---------------------------------------------------------------------------
# whole-policy evaluation

def init_weights(n: int) -> np.ndarray:
    """Probability C(n, f) / 2^n that a uniform random start has fitness f."""
    lf = _lf(n)
    f = np.arange(n + 1)
    return np.exp(lf[n] - lf[f] - lf[n - f] - n * math.log(2.0))


def _blocks(lams, caps_a, caps_b, w_a):
    """Maximal runs of fitness levels sharing (λ, Λ-mixture), highest first."""
    n = len(lams)
    f_hi = n - 1
    while f_hi >= 0:
        f_lo = f_hi
        while (f_lo > 0 and lams[f_lo - 1] == lams[f_hi] and caps_a[f_lo - 1] == caps_a[f_hi]
               and caps_b[f_lo - 1] == caps_b[f_hi] and w_a[f_lo - 1] == w_a[f_hi]):
            f_lo -= 1
        yield f_lo, f_hi
        f_hi = f_lo - 1


def _as_policy(policy) -> Policy:
    return policy.to_policy() if isinstance(policy, BinnedPolicy) else policy


def _run_dp(n, lams, caps_a, caps_b, w_a, cache: CrossoverCache | None) -> RuntimeTable:
    lf = _lf(n)
    T = np.zeros(n + 1)
    for f_lo, f_hi in _blocks(lams, caps_a, caps_b, w_a):
        lam = float(lams[f_hi])
        memo = cache.get(n, lam) if cache is not None else _new_memo()
        caps = np.array([caps_a[f_hi], caps_b[f_hi]], dtype=np.int64)
        wts = np.array([w_a[f_hi], 1.0 - w_a[f_hi]])
        bad = _sweep_block(n, f_lo, f_hi, lam, caps, wts, T, lf, memo)
        if cache is not None:
            cache.account(n, lam)
        if bad >= 0:
            raise NoProgressError(int(bad), lam)
    total = float(np.dot(init_weights(n), T))
    T.setflags(write=False)
    return RuntimeTable(n, T, total)


def _mixture_tables(policy: Policy, rounding: RoundingMode):
    n = policy.n
    lams = np.asarray(policy.lambdas, dtype=np.float64)
    caps_a = np.empty(n, dtype=np.int64)
    caps_b = np.empty(n, dtype=np.int64)
    w_a = np.empty(n)
    if rounding.kind == "decoupled" and len(rounding.capacities) != n:
        raise ValueError("capacity table length must equal n")
    for f in range(n):
        (a, b), (wa, _) = rounding.capacity_mixture(float(lams[f]), f)
        caps_a[f], caps_b[f], w_a[f] = a, b, wa
    return lams, caps_a, caps_b, w_a


def policy_runtime(n: int, policy, rounding: RoundingMode | str = NEAREST,
                   cache: CrossoverCache | None = None) -> RuntimeTable:
    """Exact remaining runtimes ``T[0..n]`` and the initialization-weighted total.

    The total excludes the evaluation of the initial search point.  A policy
    that carries its own capacity table is evaluated with those population
    sizes unless a rounding mode is explicitly requested.
    """
    policy = _as_policy(policy)
    if policy.n != n:
        raise ValueError(f"policy is for n={policy.n}, not n={n}")
    if isinstance(rounding, str):
        rounding = RoundingMode(rounding) if rounding != "decoupled" else None
    if rounding is None:
        if policy.capacities is None:
            raise ValueError("decoupled evaluation needs a capacity table")
        rounding = RoundingMode.decoupled(policy.capacities)
    if cache is None:
        cache = _DEFAULT_CACHE
    return _run_dp(n, *_mixture_tables(policy, rounding), cache)


def policy_runtime_explicit(n: int, policy, capacity_table=None,
                            cache: CrossoverCache | None = None) -> RuntimeTable:
    """Runtime with population sizes taken from ``capacity_table`` instead of λ."""
    policy = _as_policy(policy)
    if capacity_table is None:
        capacity_table = policy.capacities
    if capacity_table is None:
        raise ValueError("no capacity table given")
    return policy_runtime(n, policy, RoundingMode.decoupled(capacity_table), cache)


def level_times(n: int, f: int, lams, capacities, T, weights=None) -> np.ndarray:
    """``T_f`` for many probes at one level; ``capacities`` is (k,) or (k, 2).

    With a (k, 2) capacity array ``weights`` gives the probability of the
    first column.
    """
    lams = np.ascontiguousarray(lams, dtype=np.float64)
    caps = np.asarray(capacities, dtype=np.int64)
    if caps.ndim == 1:
        ca = cb = caps
        wa = np.ones(lams.shape[0])
    else:
        ca, cb = np.ascontiguousarray(caps[:, 0]), np.ascontiguousarray(caps[:, 1])
        wa = np.asarray(weights, dtype=np.float64)
    return _probe_levels(n, f, lams, np.ascontiguousarray(ca), np.ascontiguousarray(cb),
                         np.ascontiguousarray(wa), np.asarray(T, dtype=np.float64), _lf(n))


def nearest_level_times(n: int, f: int, lams, T) -> np.ndarray:
    """``T_f`` for probes with Λ = round_nearest(λ)."""
    caps = np.array([round_nearest(x) for x in np.atleast_1d(lams)], dtype=np.int64)
    return level_times(n, f, np.atleast_1d(lams), caps, T)
