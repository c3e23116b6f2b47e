"""Exact-runtime sweeps over one or two bin values.

Sweeps step through λ on a decimal grid and, optionally, also probe the
double just below every half-integer, where nearest rounding switches the
population size.  Comparing the two sides of each half-integer exposes the
jumps; slices at a fixed population size show the smooth part alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import BinnedPolicy, RoundingMode, NEAREST, round_nearest
from .exact import CrossoverCache, policy_runtime

__all__ = [
    "SweepSpec",
    "sweep_grid",
    "sweep_1d",
    "sweep_fixed_capacity",
    "sweep_2d",
    "rows_to_csv",
    "within_interval_steps",
    "half_integer_jumps",
    "detect_jumps",
]


@dataclass(frozen=True)
class SweepSpec:
    """What to sweep: bin ``bins[0]`` (and ``bins[1]`` for two-bin grids) of ``base``.

    ``capacities`` switches :func:`sweep_2d` to a λ × population-size grid.
    """

    base: BinnedPolicy
    bins: tuple[int, ...] = (-1,)
    lo: float = 1.0
    hi: float = 40.0
    step: float = 0.1
    predecessors: bool = True
    lo2: float | None = None
    hi2: float | None = None
    step2: float | None = None
    capacities: tuple[int, int] | None = None
    rounding: RoundingMode = NEAREST

    def __post_init__(self):
        n = self.base.n
        if not (1 <= self.lo <= self.hi <= n) or self.step <= 0:
            raise ValueError(f"need 1 <= lo <= hi <= {n} and step > 0")
        if self.lo2 is not None and not (1 <= self.lo2 <= (self.hi2 or n) <= n):
            raise ValueError("second range must lie in [1, n]")

    def index(self, j: int = 0) -> int:
        return self.bins[j] % self.base.k


def sweep_grid(lo: float, hi: float, step: float, predecessors: bool = True) -> np.ndarray:
    """Sorted probe values; grid points are ``lo + i * step`` rounded to 12 decimals."""
    count = int(math.floor((hi - lo) / step + 1e-9))
    pts = {round(lo + i * step, 12) for i in range(count + 1)}
    if predecessors:
        h = math.ceil(lo - 0.5) + 0.5
        while h <= hi:
            pred = math.nextafter(h, -math.inf)
            if pred >= lo:
                pts.add(pred)
            if h >= lo:
                pts.add(h)
            h += 1.0
    return np.array(sorted(pts))


def _with(base: BinnedPolicy, values: dict) -> BinnedPolicy:
    lams = np.array(base.lambdas)
    for i, v in values.items():
        lams[i] = v
    return BinnedPolicy(base.scheme, lams, base.capacities)


def sweep_1d(n: int, spec: SweepSpec, cache: CrossoverCache | None = None) -> list[tuple]:
    """Rows ``(λ, total)`` for the swept bin."""
    if spec.base.n != n:
        raise ValueError("base policy is for a different n")
    b = spec.index()
    rows = []
    for lam in sweep_grid(spec.lo, spec.hi, spec.step, spec.predecessors):
        pol = _with(spec.base, {b: lam})
        rows.append((float(lam), policy_runtime(n, pol, spec.rounding, cache=cache).total))
    return rows


def _capacity_table(pol: BinnedPolicy, b: int, cap: int) -> np.ndarray:
    caps = np.array([round_nearest(x) for x in pol.lambdas], dtype=np.int64)
    caps[b] = cap
    return caps


def sweep_fixed_capacity(n: int, spec: SweepSpec, capacity: int,
                         cache: CrossoverCache | None = None) -> list[tuple]:
    """Rows ``(λ, total)`` with the swept bin's population size held at ``capacity``.

    All other bins use the nearest rounding of their λ.
    """
    b = spec.index()
    rows = []
    for lam in sweep_grid(spec.lo, spec.hi, spec.step, spec.predecessors):
        pol = _with(spec.base, {b: lam})
        pol = BinnedPolicy(pol.scheme, pol.lambdas, _capacity_table(pol, b, capacity))
        rows.append((float(lam), policy_runtime(n, pol, None, cache=cache).total))
    return rows


def sweep_2d(n: int, spec: SweepSpec, cache: CrossoverCache | None = None) -> list[tuple]:
    """Rows ``(λ, Λ, total)`` or ``(λ_a, λ_b, total)`` over a grid.

    With ``spec.capacities = (c_lo, c_hi)`` the second axis is the swept bin's
    population size; otherwise it is the value of bin ``spec.bins[1]``.
    """
    if spec.base.n != n:
        raise ValueError("base policy is for a different n")
    xs = sweep_grid(spec.lo, spec.hi, spec.step, spec.predecessors)
    b = spec.index()
    rows = []
    if spec.capacities is not None:
        c_lo, c_hi = spec.capacities
        for lam in xs:
            pol = _with(spec.base, {b: lam})
            for cap in range(c_lo, c_hi + 1):
                caps = _capacity_table(pol, b, cap)
                total = policy_runtime(n, BinnedPolicy(pol.scheme, pol.lambdas, caps), None,
                                       cache=cache).total
                rows.append((float(lam), cap, total))
        return rows
    if len(spec.bins) < 2:
        raise ValueError("a two-bin grid needs two bin indices")
    b2 = spec.index(1)
    ys = sweep_grid(spec.lo2 if spec.lo2 is not None else spec.lo,
                    spec.hi2 if spec.hi2 is not None else spec.hi,
                    spec.step2 or spec.step, spec.predecessors)
    for x in xs:
        for y in ys:
            pol = _with(spec.base, {b: x, b2: y})
            rows.append((float(x), float(y), policy_runtime(n, pol, spec.rounding,
                                                             cache=cache).total))
    return rows


def rows_to_csv(rows, header) -> str:
    """CSV with ``repr`` floats, which parse back to the same doubles."""
    out = [",".join(header)]
    for r in rows:
        out.append(",".join(repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)
                            for v in r))
    return "\n".join(out) + "\n"


def _same_interval(a: float, b: float) -> bool:
    return round_nearest(a) == round_nearest(b)


def within_interval_steps(rows) -> np.ndarray:
    """Absolute changes between neighbouring probes that share a population size."""
    xs = np.array([r[0] for r in rows])
    ys = np.array([r[-1] for r in rows])
    keep = [i for i in range(len(xs) - 1) if _same_interval(xs[i], xs[i + 1])]
    return np.abs(np.diff(ys))[keep]


def half_integer_jumps(rows) -> list[tuple[float, float]]:
    """``(h, |T(h) - T(pred h)|)`` for every half-integer probed on both sides."""
    by_x = {r[0]: r[-1] for r in rows}
    out = []
    for x, y in sorted(by_x.items()):
        if x % 1.0 == 0.5:
            pred = math.nextafter(x, -math.inf)
            if pred in by_x:
                out.append((x, abs(y - by_x[pred])))
    return out


def detect_jumps(rows, factor: float = 10.0, threshold: float | None = None) -> list[float]:
    """Midpoints of neighbouring probes whose change exceeds the jump threshold.

    The default threshold is ``factor`` times the median within-interval step.
    """
    if threshold is None:
        threshold = factor * float(np.median(within_interval_steps(rows)))
    xs = [r[0] for r in rows]
    ys = [r[-1] for r in rows]
    return [(xs[i] + xs[i + 1]) / 2 for i in range(len(xs) - 1)
            if abs(ys[i + 1] - ys[i]) > threshold]
