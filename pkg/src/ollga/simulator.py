"""Monte-Carlo runs of the (1+(λ,λ)) GA on OneMax.

The hidden target is the all-ones string; the algorithm is unbiased, so this
loses no generality.  Random numbers are consumed per iteration in this
order:

1. ``ℓ`` from ``Bin(n, λ/n)``, redrawn until positive;
2. the population-size draw (stochastic rounding only);
3. each mutant in index order, ``ℓ`` partial Fisher–Yates draws;
4. one tie-break draw among equally fit mutants (only if there are several);
5. each crossover offspring in index order: a ``Bin(ℓ, 1/λ)`` count of
   positions taken from the mutant and, unless the offspring equals a parent,
   that many Fisher–Yates draws over the ``ℓ`` differing positions;
6. one tie-break draw among equally fit crossover offspring, only when there
   are several and the best of them replaces the mutant.

``engine="levels"`` tracks only the fitness.  The best mutant's number of
repaired bits is drawn by inverting the CDF of the maximum of ``Λ``
hypergeometric counts, and each crossover offspring draws its repaired bits
sequentially.  The fitness trajectory and evaluation counts have the same law
as the bit-level engine, but an iteration costs ``O(ℓ + Λ)`` draws instead of
``O(Λ ℓ)``, which matters for large ``λ``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import BinnedPolicy, Policy, RoundingMode, NEAREST
from .exact import log_factorials

__all__ = [
    "RunRecord",
    "run_ga",
    "run_many",
    "sample_ell",
    "population_size",
    "run_seed",
    "make_rng",
    "default_cap",
]

_MODES = {"nearest": 0, "stochastic": 1, "decoupled": 2}


@dataclass(frozen=True)
class RunRecord:
    """Outcome of one run; ``evaluations`` includes the initial point."""

    evaluations: int
    iterations: int
    seed: int
    capped: bool = False
    trace: np.ndarray | None = None  # columns: fitness, lambda, capacity, ell, evaluations

    @property
    def runtime(self) -> int:
        """Evaluations after initialization (the exact DP convention)."""
        return self.evaluations - 1


def default_cap(n: int) -> int:
    return 100 * n * n


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def run_seed(master_seed: int, index: int) -> int:
    """64-bit seed of run ``index`` in the stream of ``master_seed``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@njit(cache=True)
def _sample_ell(n, lam, rng):
    q = lam / n
    if q >= 1.0:
        return n
    while True:
        ell = rng.binomial(n, q)
        if ell > 0:
            return ell


@njit(cache=True)
def _capacity(lam, mode, table_value, rng):
    if mode == 0:
        lo = math.floor(lam)
        return int(lo) if lam - lo < 0.5 else int(lo) + 1
    if mode == 1:
        lo = math.floor(lam)
        hi = math.ceil(lam)
        if rng.random() < hi - lam:
            return int(lo)
        return int(hi)
    return table_value


@njit(cache=True)
def _grow(trace):
    bigger = np.empty((trace.shape[0] * 2, trace.shape[1]))
    bigger[: trace.shape[0]] = trace
    return bigger


@njit(cache=True)
def _run(n, lams, mode, caps, full_iteration, cap_evals, rng, want_trace, x, perm, mut_pos,
         cross_sel, ties, local):
    """Returns (evaluations, iterations, capped, trace rows used, trace)."""
    trace = np.empty((64 if want_trace else 1, 5))
    rows = 0
    fit = 0
    for i in range(n):
        x[i] = 1 if rng.random() < 0.5 else 0
        fit += x[i]
    for i in range(n):
        perm[i] = i
    evals = 1
    iters = 0
    while fit < n:
        if evals >= cap_evals:
            return evals, iters, True, rows, trace
        lam = lams[fit]
        ell = _sample_ell(n, lam, rng)
        cap = _capacity(lam, mode, caps[fit], rng)
        iters += 1
        it_evals = 0
        done = False
        # mutation phase
        best = -1
        nties = 0
        for k in range(cap):
            good = 0
            for j in range(ell):
                r = j + rng.integers(0, n - j)
                tmp = perm[j]
                perm[j] = perm[r]
                perm[r] = tmp
                if x[perm[j]] == 0:
                    good += 1
            mf = fit + 2 * good - ell
            it_evals += 1
            if mf > best:
                best = mf
                nties = 0
            if mf == best:
                for j in range(ell):
                    mut_pos[nties, j] = perm[j]
                nties += 1
            if mf == n and not full_iteration:
                done = True
                break
        if done:
            evals += it_evals
            fit = n
            break
        pick = 0
        if nties > 1:
            pick = rng.integers(0, nties)
        xp_fit = best
        # crossover phase
        r_take = 1.0 / lam
        cbest = -1
        cties = 0
        for k in range(cap):
            take = rng.binomial(ell, r_take) if r_take < 1.0 else ell
            if take == 0 or take == ell:
                continue
            for j in range(ell):
                local[j] = j
            good = 0
            for j in range(take):
                r = j + rng.integers(0, ell - j)
                tmp = local[j]
                local[j] = local[r]
                local[r] = tmp
                if x[mut_pos[pick, local[j]]] == 0:
                    good += 1
            yf = fit + 2 * good - take
            it_evals += 1
            if yf > cbest:
                cbest = yf
                cties = 0
            if yf == cbest:
                for j in range(take):
                    cross_sel[cties, j] = local[j]
                ties[cties] = take
                cties += 1
            if yf == n and not full_iteration:
                done = True
                break
        evals += it_evals
        if want_trace:
            if rows == trace.shape[0]:
                trace = _grow(trace)
            trace[rows, 0] = fit
            trace[rows, 1] = lam
            trace[rows, 2] = cap
            trace[rows, 3] = ell
            trace[rows, 4] = it_evals
            rows += 1
        if done:
            fit = n
            break
        if cties > 0 and cbest > xp_fit:
            cpick = 0
            if cties > 1:
                cpick = rng.integers(0, cties)
            if cbest >= fit:
                for j in range(ties[cpick]):
                    pos = mut_pos[pick, cross_sel[cpick, j]]
                    x[pos] = 1 - x[pos]
                fit = cbest
        elif xp_fit >= fit:
            for j in range(ell):
                pos = mut_pos[pick, j]
                x[pos] = 1 - x[pos]
            fit = xp_fit
    return evals, iters, False, rows, trace


@njit(cache=True)
def _best_mutant(n, fit, ell, cap, lf, cdf, rng):
    """Best repaired-bit count over ``cap`` mutants and the top-count mass."""
    z = n - fit
    g_lo = max(0, ell - fit)
    g_hi = min(ell, z)
    base = lf[n] - lf[ell] - lf[n - ell]
    acc = 0.0
    top = 0.0
    for g in range(g_lo, g_hi + 1):
        lp = (lf[z] - lf[g] - lf[z - g] + lf[fit] - lf[ell - g] - lf[fit - ell + g]) - base
        top = math.exp(lp)
        acc += top
        cdf[g - g_lo] = acc
    u = rng.random() * cdf[g_hi - g_lo] ** cap
    for g in range(g_lo, g_hi + 1):
        if cdf[g - g_lo] ** cap >= u:
            return g, top
    return g_hi, top


@njit(cache=True)
def _first_hit(p, cap, rng):
    """Index (1-based) of the first success among ``cap`` trials, given one occurs."""
    if cap == 1 or p >= 1.0:
        return 1
    u = rng.random()
    k = math.ceil(math.log1p(-u * -math.expm1(cap * math.log1p(-p))) / math.log1p(-p))
    return min(max(k, 1), cap)


@njit(cache=True)
def _run_levels(n, lams, mode, caps, full_iteration, cap_evals, rng, want_trace, lf, cdf):
    trace = np.empty((64 if want_trace else 1, 5))
    rows = 0
    fit = rng.binomial(n, 0.5)
    evals = 1
    iters = 0
    while fit < n:
        if evals >= cap_evals:
            return evals, iters, True, rows, trace
        lam = lams[fit]
        ell = _sample_ell(n, lam, rng)
        cap = _capacity(lam, mode, caps[fit], rng)
        iters += 1
        g, top = _best_mutant(n, fit, ell, cap, lf, cdf, rng)
        xp_fit = fit + 2 * g - ell
        done = False
        if xp_fit == n and not full_iteration:
            it_evals = _first_hit(top, cap, rng)
            done = True
        else:
            it_evals = cap
            r_take = 1.0 / lam
            cbest = -1
            for k in range(cap):
                take = rng.binomial(ell, r_take) if r_take < 1.0 else ell
                if take == 0 or take == ell:
                    continue
                if g == 0:
                    good = 0
                elif g == ell:
                    good = take
                else:
                    good = 0
                    left = g
                    for j in range(take):
                        if rng.random() * (ell - j) < left:
                            good += 1
                            left -= 1
                yf = fit + 2 * good - take
                it_evals += 1
                if yf > cbest:
                    cbest = yf
                if yf == n and not full_iteration:
                    done = True
                    break
        evals += it_evals
        if want_trace:
            if rows == trace.shape[0]:
                trace = _grow(trace)
            trace[rows, 0] = fit
            trace[rows, 1] = lam
            trace[rows, 2] = cap
            trace[rows, 3] = ell
            trace[rows, 4] = it_evals
            rows += 1
        if done:
            fit = n
            break
        if cbest > xp_fit:
            if cbest >= fit:
                fit = cbest
        elif xp_fit >= fit:
            fit = xp_fit
    return evals, iters, False, rows, trace


def sample_ell(n: int, lam: float, rng: np.random.Generator) -> int:
    """One draw of ``Bin(n, λ/n)`` conditioned on being positive."""
    return int(_sample_ell(n, float(lam), rng))


def population_size(lam: float, rounding: RoundingMode, rng: np.random.Generator,
                    f: int = 0) -> int:
    mode = _MODES[rounding.kind]
    table_value = rounding.capacities[f] if rounding.kind == "decoupled" else 0
    return int(_capacity(float(lam), mode, table_value, rng))


class _Workspace:
    def __init__(self, n: int, engine: str = "bits"):
        if engine not in ("bits", "levels"):
            raise ValueError(f"unknown engine {engine!r}")
        self.n = n
        self.engine = engine
        self.lf = log_factorials(n)
        self.cdf = np.empty(n + 1)
        if engine == "levels":
            return
        self.x = np.empty(n, dtype=np.int8)
        self.perm = np.empty(n, dtype=np.int64)
        self.mut_pos = np.empty((n, n), dtype=np.int64)
        self.cross_sel = np.empty((n, n), dtype=np.int64)
        self.ties = np.empty(n, dtype=np.int64)
        self.local = np.empty(n, dtype=np.int64)


def _prepare(n, policy, rounding):
    if isinstance(policy, BinnedPolicy):
        policy = policy.to_policy()
    if policy.n != n:
        raise ValueError(f"policy is for n={policy.n}, not n={n}")
    if rounding is None:
        if policy.capacities is None:
            raise ValueError("decoupled runs need a capacity table")
        rounding = RoundingMode.decoupled(policy.capacities)
    if isinstance(rounding, str):
        rounding = RoundingMode(rounding)
    caps = (np.asarray(rounding.capacities, dtype=np.int64) if rounding.kind == "decoupled"
            else np.zeros(n, dtype=np.int64))
    return np.ascontiguousarray(policy.lambdas, dtype=np.float64), _MODES[rounding.kind], caps


def _one(n, lams, mode, caps, seed, full, cap_evals, trace, ws):
    if ws.engine == "levels":
        ev, it, capped, rows, tr = _run_levels(n, lams, mode, caps, full, cap_evals,
                                               make_rng(seed), trace, ws.lf, ws.cdf)
        return RunRecord(int(ev), int(it), int(seed), bool(capped),
                         tr[:rows].copy() if trace else None)
    ev, it, capped, rows, tr = _run(n, lams, mode, caps, full, cap_evals, make_rng(seed), trace,
                                    ws.x, ws.perm, ws.mut_pos, ws.cross_sel, ws.ties, ws.local)
    return RunRecord(int(ev), int(it), int(seed), bool(capped), tr[:rows].copy() if trace else None)


def run_ga(n: int, policy, rounding: RoundingMode | str | None = NEAREST, seed: int = 0,
           accounting: str = "full_iteration", max_evaluations: int | None = None,
           trace: bool = False, engine: str = "bits") -> RunRecord:
    """One run of the GA from a uniform random start.

    ``accounting="full_iteration"`` counts every evaluation of the final
    iteration; ``"stop_at_optimum"`` stops counting at the first optimal point.
    A run that reaches ``max_evaluations`` (default ``100 n²``) stops with
    ``capped=True``.  ``engine`` selects the bit-level simulation or the
    equivalent fitness-level one (``"levels"``).
    """
    if accounting not in ("full_iteration", "stop_at_optimum"):
        raise ValueError(f"unknown accounting {accounting!r}")
    lams, mode, caps = _prepare(n, policy, rounding)
    cap = default_cap(n) if max_evaluations is None else int(max_evaluations)
    return _one(n, lams, mode, caps, seed, accounting == "full_iteration", cap, trace,
                _Workspace(n, engine))


def run_many(n: int, policy, rounding: RoundingMode | str | None = NEAREST, *,
             seeds=None, master_seed: int = 0, count: int | None = None,
             accounting: str = "full_iteration", max_evaluations=None,
             engine: str = "bits") -> list[RunRecord]:
    """Independent runs on explicit ``seeds`` or on ``count`` derived seeds.

    ``max_evaluations`` may be a scalar or one bound per run.
    """
    if seeds is None:
        if count is None:
            raise ValueError("give seeds or count")
        seeds = [run_seed(master_seed, i) for i in range(count)]
    lams, mode, caps = _prepare(n, policy, rounding)
    full = accounting == "full_iteration"
    if accounting not in ("full_iteration", "stop_at_optimum"):
        raise ValueError(f"unknown accounting {accounting!r}")
    if max_evaluations is None or np.isscalar(max_evaluations):
        bounds = [default_cap(n) if max_evaluations is None else int(max_evaluations)] * len(seeds)
    else:
        bounds = [int(b) for b in max_evaluations]
    ws = _Workspace(n, engine)
    return [_one(n, lams, mode, caps, s, full, b, False, ws) for s, b in zip(seeds, bounds)]
