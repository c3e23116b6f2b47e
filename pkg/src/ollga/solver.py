"""Fitness-wise optimal λ by backward induction.

With ``T`` known above fitness ``f``, the remaining time ``T_f(λ)`` depends on
λ alone.  It jumps wherever the rounded population size changes, so the λ
axis is cut into one interval per population size ``c``:
``[c - 0.5, c + 0.5)`` clipped to ``[1, n]``, with the open upper end replaced
by the preceding double.  Each interval is probed at both ends and just
inside them; when the slopes point inwards the interior is searched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Policy
from .exact import RuntimeTable, nearest_level_times, policy_runtime, init_weights

__all__ = [
    "IntervalSearchConfig",
    "LevelDecision",
    "interval_bounds",
    "optimal_lambda_at",
    "optimal_policy",
]


@dataclass(frozen=True)
class IntervalSearchConfig:
    epsilon: float = 1e-8
    tol: float = 1e-9
    batch: int = 16
    exhaustive: bool = False

    def __post_init__(self):
        if not 0.0 < self.epsilon < 0.25:
            raise ValueError("epsilon must lie in (0, 0.25)")
        if not 0.0 < self.tol < self.epsilon:
            raise ValueError("tol must be positive and below epsilon")
        if self.batch < 4:
            raise ValueError("batch must be at least 4")


@dataclass
class LevelDecision:
    """Audit record of the search at one fitness level."""

    f: int
    lam: float
    time: float
    capacity: int
    interior: bool
    candidates: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"f": self.f, "lambda": self.lam, "time": self.time, "capacity": self.capacity,
                "interior": self.interior, "candidates": list(self.candidates)}


def interval_bounds(n: int, c: int) -> tuple[float, float]:
    """Closed λ range whose nearest rounding is ``c``."""
    lo = max(1.0, c - 0.5)
    hi = float(n) if c == n else min(float(n), math.nextafter(c + 0.5, -math.inf))
    return lo, hi


class _Level:
    """Probe bookkeeping for one fitness level."""

    def __init__(self, n, f, T, config):
        self.n, self.f, self.T, self.cfg = n, f, T, config
        self.edges = {}

    def eval(self, lams):
        return nearest_level_times(self.n, self.f, np.asarray(lams, dtype=np.float64), self.T)

    def probe(self, cs):
        """Four-point probes for every capacity in ``cs`` not seen yet."""
        todo = [c for c in dict.fromkeys(cs) if c not in self.edges and 1 <= c <= self.n]
        if not todo:
            return
        eps = self.cfg.epsilon
        pts = []
        for c in todo:
            lo, hi = interval_bounds(self.n, c)
            if hi - lo <= 2 * eps:
                pts.extend([lo, lo, hi, hi])
            else:
                pts.extend([lo, lo + eps, hi - eps, hi])
        vals = self.eval(pts)
        for i, c in enumerate(todo):
            self.edges[c] = (pts[4 * i: 4 * i + 4], vals[4 * i: 4 * i + 4])

    def value(self, c):
        self.probe([c])
        return float(np.min(self.edges[c][1]))

    def refine(self, c):
        """Best (λ, T_f, interior) inside interval ``c``."""
        (l1, l1e, l2e, l2), (v1, v2, v3, v4) = self.edges[c]
        best_lam, best_v = (l1, v1) if v1 <= v4 else (l2, v4)
        if not (v2 < v1 and v3 < v4):
            return best_lam, float(best_v), False
        # uniform scan picks the starting bracket, then k-section
        xs = np.linspace(l1, l2, 16)
        vs = self.eval(xs)
        i = int(np.argmin(vs))
        a, b = xs[max(i - 1, 0)], xs[min(i + 1, 15)]
        x_best, v_best = xs[i], vs[i]
        k = self.cfg.batch
        while b - a > self.cfg.tol:
            grid = np.linspace(a, b, k + 2)[1:-1]
            gv = self.eval(grid)
            j = int(np.argmin(gv))
            if gv[j] < v_best or (gv[j] == v_best and grid[j] < x_best):
                x_best, v_best = grid[j], gv[j]
            pts = np.concatenate(([a], grid, [b]))
            jj = int(np.searchsorted(pts, x_best))
            a_new, b_new = pts[max(jj - 1, 0)], pts[min(jj + 1, k + 1)]
            if b_new - a_new >= b - a:
                break
            a, b = a_new, b_new
        if v_best < best_v or (v_best == best_v and x_best < best_lam):
            return float(x_best), float(v_best), True
        return best_lam, float(best_v), False


def _candidates(lv: _Level) -> list[int]:
    n = lv.n
    cands = [1, 2] if n >= 2 else [1]
    lv.probe(cands + [3])
    if n >= 3 and lv.value(3) < lv.value(2):
        c = 3
        while c < n:
            lv.probe(range(c + 1, min(n, c + lv.cfg.batch // 4) + 1))
            if lv.value(c + 1) >= lv.value(c):
                break
            c += 1
        cands += _around(c, n)
    if n >= 4:
        marks = [n, n - n // 8, n - n // 4, n - n // 2]
        lv.probe(marks)
        vals = [lv.value(c) for c in marks]
        if not all(vals[i + 1] < vals[i] for i in range(3)):
            c = n
            while c > 1:
                lv.probe(range(max(1, c - lv.cfg.batch // 4), c))
                if lv.value(c - 1) >= lv.value(c):
                    break
                c -= 1
            cands += _around(c, n)
    return sorted(set(cands))


def _around(c: int, n: int) -> list[int]:
    # an interior minimum can sit next to the interval where a scan stops
    return [x for x in (c - 1, c, c + 1) if 1 <= x <= n]


def optimal_lambda_at(n: int, f: int, T_above, config: IntervalSearchConfig | None = None,
                      ) -> tuple[float, float, LevelDecision]:
    """Best λ at fitness ``f`` given remaining times above it; returns (λ*, T_f*, record)."""
    config = config or IntervalSearchConfig()
    T = np.asarray(T_above, dtype=np.float64)
    lv = _Level(n, f, T, config)
    if config.exhaustive:
        cands = list(range(1, n + 1))
        lv.probe(cands)
    else:
        cands = _candidates(lv)
    best = None
    for c in cands:
        lam, v, interior = lv.refine(c)
        if best is None or v < best[1] or (v == best[1] and lam < best[0]):
            best = (lam, v, interior, c)
    lam, v, interior, c = best
    return lam, v, LevelDecision(f, lam, v, c, interior, cands)


def optimal_policy(n: int, config: IntervalSearchConfig | None = None,
                   log: list | None = None) -> tuple[Policy, RuntimeTable]:
    """Sweep ``f = n-1, ..., 0`` choosing λ*(f); decisions go to ``log`` if given."""
    config = config or IntervalSearchConfig()
    T = np.zeros(n + 1)
    lams = np.empty(n)
    for f in range(n - 1, -1, -1):
        lam, v, rec = optimal_lambda_at(n, f, T, config)
        lams[f] = lam
        T[f] = v
        if log is not None:
            log.append(rec)
    policy = Policy(n, lams)
    table = RuntimeTable(n, T, float(np.dot(init_weights(n), T)))
    return policy, table
