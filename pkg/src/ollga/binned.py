"""Best binned policies by evolution strategy over exact expected runtimes.

Each bin value is encoded by a pair ``(u_int, u_frac)`` in ``[0, 1)``:
``λ = clip(round(u_int * n) + u_frac - 0.5, 1, n)``.  The integer part picks
the population size and the fractional part moves λ inside its rounding
interval, which makes the landscape far less jagged than searching λ
directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import BinnedPolicy, BinScheme, RoundingMode, NEAREST, round_nearest
from .es import EsConfig, EsResult, sep_cmaes
from .exact import CrossoverCache, NoProgressError, policy_runtime

__all__ = [
    "decode",
    "encode",
    "decode_decoupled",
    "BinnedResult",
    "optimize_binned",
    "optimize_binned_decoupled",
    "naive_direct_optimize",
    "convergence_csv",
]

_TOP = math.nextafter(1.0, 0.0)


def decode(vec, n: int) -> np.ndarray:
    """Bin values from interleaved ``(u_int, u_frac)`` pairs."""
    v = np.asarray(vec, dtype=float).reshape(-1, 2)
    out = np.empty(v.shape[0])
    for i, (ui, uf) in enumerate(v):
        c = round_nearest(ui * n)
        # keep λ inside c's rounding interval despite float rounding of the sum
        lam = min(c + (uf - 0.5), math.nextafter(c + 0.5, -math.inf))
        out[i] = max(1.0, min(float(n), lam))
    return out


def encode(lambdas, n: int) -> np.ndarray:
    """One preimage of ``decode`` for values in ``[1, n]``."""
    out = []
    for lam in np.asarray(lambdas, dtype=float):
        c = round_nearest(lam)
        out += [min(c / n, _TOP), min(lam - c + 0.5, _TOP)]
    return np.array(out)


def decode_decoupled(vec, n: int) -> tuple[np.ndarray, np.ndarray]:
    """λ and population size per bin, each mapped linearly onto ``[1, n]``."""
    v = np.asarray(vec, dtype=float).reshape(-1, 2)
    lams = np.clip(1.0 + v[:, 0] * (n - 1), 1.0, n)
    caps = np.array([min(n, max(1, round_nearest(1.0 + u * (n - 1)))) for u in v[:, 1]],
                    dtype=np.int64)
    return lams, caps


@dataclass
class BinnedResult:
    policy: BinnedPolicy
    total: float
    runs: list[EsResult] = field(default_factory=list)

    @property
    def history(self) -> list[list[float]]:
        return [r.history for r in self.runs]


def _as_mode(rounding):
    return RoundingMode.parse(rounding) if isinstance(rounding, str) else rounding


def _objective(n, build, rounding, cache):
    def fun(vec):
        pol = build(vec)
        try:
            if pol.capacities is not None:
                return policy_runtime(n, pol, None, cache=cache).total
            return policy_runtime(n, pol, rounding, cache=cache).total
        except NoProgressError:
            return math.inf
    return fun


def _restart_rngs(seed, restarts):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(restarts)]


def _run(n, dim, build, rounding, es_config, restarts, x0=None, cache=None):
    cache = cache if cache is not None else CrossoverCache(256 * 1024 ** 2)
    fun = _objective(n, build, rounding, cache)
    runs = []
    for rng in _restart_rngs(es_config.seed, restarts):
        runs.append(sep_cmaes(fun, dim, es_config, 0.0, _TOP, x0=x0, rng=rng))
    best = min(runs, key=lambda r: r.value)
    return build(best.x), best.value, runs


def optimize_binned(n: int, scheme: BinScheme, rounding: RoundingMode | str = NEAREST,
                    es_config: EsConfig | None = None, restarts: int = 10, x0=None,
                    cache: CrossoverCache | None = None) -> BinnedResult:
    """Best λ per bin under ``rounding``; restarts share nothing but the cache."""
    es_config = es_config or EsConfig()
    rounding = _as_mode(rounding)
    build = lambda vec: BinnedPolicy(scheme, decode(vec, n))
    pol, total, runs = _run(n, 2 * scheme.k, build, rounding, es_config, restarts, x0, cache)
    return BinnedResult(pol, total, runs)


def optimize_binned_decoupled(n: int, scheme: BinScheme, es_config: EsConfig | None = None,
                              restarts: int = 10, tie_capacity: bool = False, x0=None,
                              cache: CrossoverCache | None = None) -> BinnedResult:
    """Best (λ, population size) per bin.

    With ``tie_capacity`` the population size is forced to ``round(λ)`` and
    the search is exactly :func:`optimize_binned` with nearest rounding.
    """
    es_config = es_config or EsConfig()
    if tie_capacity:
        return optimize_binned(n, scheme, NEAREST, es_config, restarts, x0, cache)

    def build(vec):
        lams, caps = decode_decoupled(vec, n)
        return BinnedPolicy(scheme, lams, caps)

    pol, total, runs = _run(n, 2 * scheme.k, build, None, es_config, restarts, x0, cache)
    pol, total = _polish_capacities(n, pol, total, cache)
    return BinnedResult(pol, total, runs)


def _polish_capacities(n, pol, total, cache):
    """Greedy ±1 moves on the bin population sizes until none helps."""
    caps = np.array(pol.capacities)
    improved = True
    while improved:
        improved = False
        for i in range(len(caps)):
            for step in (-1, 1):
                c = caps[i] + step
                if not 1 <= c <= n:
                    continue
                trial = caps.copy()
                trial[i] = c
                cand = BinnedPolicy(pol.scheme, pol.lambdas, trial)
                v = policy_runtime(n, cand, None, cache=cache).total
                if v < total:
                    caps, pol, total, improved = trial, cand, v, True
    return pol, total


def naive_direct_optimize(n: int, scheme: BinScheme, rounding: RoundingMode | str = NEAREST,
                          es_config: EsConfig | None = None, restarts: int = 10,
                          cache: CrossoverCache | None = None) -> BinnedResult:
    """Same search with one linear coordinate per bin: ``λ = 1 + u (n - 1)``."""
    es_config = es_config or EsConfig()
    rounding = _as_mode(rounding)
    build = lambda vec: BinnedPolicy(scheme, np.clip(1.0 + np.asarray(vec) * (n - 1), 1.0, n))
    pol, total, runs = _run(n, scheme.k, build, rounding, es_config, restarts, None, cache)
    return BinnedResult(pol, total, runs)


def convergence_csv(result: BinnedResult, reference: float | None = None) -> str:
    """Rows ``restart,generation,best_total[,gap]`` from a finished search."""
    head = "restart,generation,best_total" + (",gap" if reference is not None else "")
    lines = [head]
    for r, hist in enumerate(result.history):
        for g, v in enumerate(hist, 1):
            row = f"{r},{g},{v!r}"
            if reference is not None:
                row += f",{v - reference!r}"
            lines.append(row)
    return "\n".join(lines) + "\n"
