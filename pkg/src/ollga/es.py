"""Separable CMA-ES on a box.

Diagonal covariance with rank-one and rank-μ updates plus cumulative
step-size adaptation.  Samples that leave the box are redrawn up to ten
times and then reflected back coordinate-wise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = ["EsConfig", "EsResult", "sep_cmaes"]

_MAX_RESAMPLE = 10


@dataclass(frozen=True)
class EsConfig:
    popsize: int = 100
    iterations: int = 200
    sigma0: float = 0.3
    degenerate: float = 1e-12
    seed: int = 0

    def __post_init__(self):
        if self.popsize < 4:
            raise ValueError("popsize must be at least 4")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if not self.sigma0 > 0:
            raise ValueError("sigma0 must be positive")


@dataclass
class EsResult:
    x: np.ndarray
    value: float
    generations: int
    evaluations: int
    history: list[float] = field(default_factory=list)  # best-so-far per generation
    stop: str = "budget"


def _reflect(x, lo, hi):
    width = hi - lo
    y = np.mod(x - lo, 2 * width)
    y = np.where(y > width, 2 * width - y, y)
    return np.clip(lo + y, lo, hi)


def sep_cmaes(fun: Callable[[np.ndarray], float], dim: int, config: EsConfig,
              lower=0.0, upper=1.0, x0=None, rng: np.random.Generator | None = None,
              ) -> EsResult:
    """Minimize ``fun`` over the box ``[lower, upper]^dim``."""
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    lo = np.broadcast_to(np.asarray(lower, dtype=float), (dim,)).copy()
    hi = np.broadcast_to(np.asarray(upper, dtype=float), (dim,)).copy()
    span = hi - lo
    lam = config.popsize
    mu = lam // 2
    w = math.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    w /= w.sum()
    mueff = 1.0 / np.sum(w ** 2)
    cs = (mueff + 2) / (dim + mueff + 5)
    ds = 1 + 2 * max(0.0, math.sqrt((mueff - 1) / (dim + 1)) - 1) + cs
    cc = 4.0 / (dim + 4)
    c1 = 2.0 / ((dim + 1.3) ** 2 + mueff)
    cmu = min(1 - c1, 2 * (mueff - 2 + 1 / mueff) / ((dim + 2) ** 2 + mueff))
    scale = (dim + 2) / 3.0
    c1, cmu = min(1.0, c1 * scale), min(1.0 - min(1.0, c1 * scale), cmu * scale)
    chi = math.sqrt(dim) * (1 - 1 / (4 * dim) + 1 / (21 * dim ** 2))

    m = lo + span * rng.random(dim) if x0 is None else np.clip(np.asarray(x0, float), lo, hi)
    sigma = config.sigma0
    C = span ** 2  # diagonal covariance, scaled to the box
    ps = np.zeros(dim)
    pc = np.zeros(dim)
    best_x, best_v = m.copy(), math.inf
    history = []
    evals = 0
    stop = "budget"
    gen = 0
    for gen in range(1, config.iterations + 1):
        sd = np.sqrt(C)
        X = np.empty((lam, dim))
        for i in range(lam):
            for _ in range(_MAX_RESAMPLE):
                x = m + sigma * sd * rng.standard_normal(dim)
                if np.all((x >= lo) & (x <= hi)):
                    break
            else:
                x = _reflect(x, lo, hi)
            X[i] = x
        vals = np.array([fun(x) for x in X])
        evals += lam
        order = np.argsort(vals, kind="stable")
        if vals[order[0]] < best_v:
            best_v, best_x = float(vals[order[0]]), X[order[0]].copy()
        history.append(best_v)
        Y = (X[order[:mu]] - m) / sigma
        yw = w @ Y
        m = np.clip(m + sigma * yw, lo, hi)
        ps = (1 - cs) * ps + math.sqrt(cs * (2 - cs) * mueff) * yw / sd
        hs = np.linalg.norm(ps) / math.sqrt(1 - (1 - cs) ** (2 * gen)) < (1.4 + 2 / (dim + 1)) * chi
        pc = (1 - cc) * pc + hs * math.sqrt(cc * (2 - cc) * mueff) * yw
        C = ((1 - c1 - cmu) * C + c1 * (pc ** 2 + (1 - hs) * cc * (2 - cc) * C)
             + cmu * (w @ Y ** 2))
        sigma *= math.exp(min(1.0, cs / ds * (np.linalg.norm(ps) / chi - 1)))
        if np.all(sigma * np.sqrt(C) < config.degenerate):
            stop = "degenerate"
            break
    return EsResult(best_x, best_v, gen, evals, history, stop)
