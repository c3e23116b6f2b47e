"""Policies, fitness bins and population-size rounding for the (1+(λ,λ)) GA.

A policy is a dense table: entry ``f`` holds the parameter λ used while the
parent has OneMax fitness ``f``.  Fitness ``n`` needs no entry because the run
is over once it is reached.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "Policy",
    "BinScheme",
    "BinnedPolicy",
    "RoundingMode",
    "NEAREST",
    "STOCHASTIC",
    "theory_policy",
    "round_nearest",
    "bin_scheme",
    "max_bins",
    "binned_theory_policy",
    "static_policy",
    "reference_binned_policy",
    "REFERENCE_BIN_VALUES",
]


def round_nearest(lam: float) -> int:
    """Round half-integers up: ``floor(lam)`` if the fractional part is below 0.5."""
    lo = math.floor(lam)
    return int(lo) if lam - lo < 0.5 else int(lo) + 1


def _readonly(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Policy:
    """Fitness-indexed parameter table for a OneMax instance of size ``n``.

    ``capacities`` optionally carries an explicit integer population size per
    fitness (decoupled control); when absent the population size follows from
    the rounding mode.
    """

    n: int
    lambdas: np.ndarray
    capacities: np.ndarray | None = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"problem size must be a positive integer, got {self.n!r}")
        lam = _readonly(self.lambdas, np.float64)
        if lam.shape != (self.n,):
            raise ValueError(f"policy needs exactly {self.n} entries, got shape {lam.shape}")
        if not np.all(np.isfinite(lam)) or lam.min() < 1.0 or lam.max() > self.n:
            raise ValueError(f"every lambda must lie in [1, {self.n}]")
        object.__setattr__(self, "lambdas", lam)
        if self.capacities is not None:
            cap = _readonly(self.capacities, np.int64)
            if cap.shape != (self.n,):
                raise ValueError("capacity table must have one entry per fitness level")
            if cap.min() < 1 or cap.max() > self.n:
                raise ValueError(f"every population size must lie in [1, {self.n}]")
            object.__setattr__(self, "capacities", cap)

    def __getitem__(self, f: int) -> float:
        return float(self.lambdas[f])

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other):
        if not isinstance(other, Policy):
            return NotImplemented
        same_cap = (self.capacities is None and other.capacities is None) or (
            self.capacities is not None
            and other.capacities is not None
            and np.array_equal(self.capacities, other.capacities)
        )
        return self.n == other.n and np.array_equal(self.lambdas, other.lambdas) and same_cap

    __hash__ = None

    # -- serialization -------------------------------------------------
    def to_dict(self) -> dict:
        out = {"n": self.n, "kind": "policy", "lambdas": [float(x) for x in self.lambdas]}
        if self.capacities is not None:
            out["capacities"] = [int(x) for x in self.capacities]
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["fitness", "lambda"] + (["capacity"] if self.capacities is not None else [])
        w.writerow(header)
        for f in range(self.n):
            row = [f, repr(float(self.lambdas[f]))]
            if self.capacities is not None:
                row.append(int(self.capacities[f]))
            w.writerow(row)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Policy":
        rows = list(csv.reader(io.StringIO(text)))
        if rows and rows[0] and rows[0][0].strip().lower() == "fitness":
            rows = rows[1:]
        rows = [r for r in rows if r]
        rows.sort(key=lambda r: int(r[0]))
        fits = [int(r[0]) for r in rows]
        if fits != list(range(len(rows))):
            raise ValueError("CSV policy must list every fitness 0..n-1 exactly once")
        lams = [float(r[1]) for r in rows]
        caps = [int(r[2]) for r in rows] if rows and len(rows[0]) > 2 else None
        return cls(len(rows), lams, caps)


@dataclass(frozen=True)
class BinScheme:
    """Partition of ``[0..n]`` into consecutive bins starting at ``boundaries``."""

    n: int
    boundaries: tuple[int, ...]

    def __post_init__(self):
        b = tuple(int(x) for x in self.boundaries)
        object.__setattr__(self, "boundaries", b)
        if not b or b[0] != 0:
            raise ValueError("first bin must start at fitness 0")
        if any(b2 <= b1 for b1, b2 in zip(b, b[1:])):
            raise ValueError("bin boundaries must be strictly increasing")
        if b[-1] > self.n:
            raise ValueError("bin boundaries must not exceed n")

    @property
    def k(self) -> int:
        return len(self.boundaries)

    def bins(self) -> list[tuple[int, int]]:
        """Inclusive ``(lo, hi)`` fitness ranges; the last bin ends at ``n``."""
        ends = [b - 1 for b in self.boundaries[1:]] + [self.n]
        return list(zip(self.boundaries, ends))

    def bin_index(self, f: int) -> int:
        return int(np.searchsorted(self.boundaries, f, side="right")) - 1

    def index_table(self) -> np.ndarray:
        """Bin index of each fitness ``0..n-1``."""
        return np.searchsorted(self.boundaries, np.arange(self.n), side="right") - 1

    @classmethod
    def from_boundaries(cls, n: int, boundaries: Sequence[int]) -> "BinScheme":
        return cls(n, tuple(boundaries))


def max_bins(n: int) -> int:
    return max(1, math.ceil(math.log2(n))) if n > 1 else 1


def bin_scheme(n: int, k: int) -> BinScheme:
    """Geometric bins: bin ``i`` starts at ``n - floor(n / 2**(i-1))``."""
    if not 1 <= k <= max_bins(n):
        raise ValueError(f"bin count must lie in [1, {max_bins(n)}] for n={n}, got {k}")
    return BinScheme(n, tuple(n - n // 2 ** (i - 1) for i in range(1, k + 1)))


@dataclass(frozen=True, eq=False)
class BinnedPolicy:
    """One λ (and optionally one population size) per bin of ``scheme``."""

    scheme: BinScheme
    lambdas: np.ndarray
    capacities: np.ndarray | None = None

    def __post_init__(self):
        lam = _readonly(self.lambdas, np.float64)
        if lam.shape != (self.scheme.k,):
            raise ValueError(f"need {self.scheme.k} bin values, got {lam.shape}")
        if lam.min() < 1.0 or lam.max() > self.n:
            raise ValueError(f"every lambda must lie in [1, {self.n}]")
        object.__setattr__(self, "lambdas", lam)
        if self.capacities is not None:
            cap = _readonly(self.capacities, np.int64)
            if cap.shape != (self.scheme.k,) or cap.min() < 1 or cap.max() > self.n:
                raise ValueError("bin population sizes must be one per bin, in [1, n]")
            object.__setattr__(self, "capacities", cap)

    @property
    def n(self) -> int:
        return self.scheme.n

    @property
    def k(self) -> int:
        return self.scheme.k

    def to_policy(self) -> Policy:
        idx = self.scheme.index_table()
        caps = None if self.capacities is None else self.capacities[idx]
        return Policy(self.n, self.lambdas[idx], caps)

    def to_dict(self) -> dict:
        out = {
            "n": self.n,
            "kind": "binned",
            "boundaries": list(self.scheme.boundaries),
            "lambdas": [float(x) for x in self.lambdas],
        }
        if self.capacities is not None:
            out["capacities"] = [int(x) for x in self.capacities]
        return out

    def to_csv(self) -> str:
        return self.to_policy().to_csv()

    def __eq__(self, other):
        if not isinstance(other, BinnedPolicy):
            return NotImplemented
        return self.scheme == other.scheme and self.to_policy() == other.to_policy()

    __hash__ = None


def policy_from_dict(data: dict) -> Policy | BinnedPolicy:
    kind = data.get("kind", "policy")
    if kind == "binned":
        scheme = BinScheme(int(data["n"]), tuple(data["boundaries"]))
        return BinnedPolicy(scheme, data["lambdas"], data.get("capacities"))
    if kind == "policy":
        return Policy(int(data["n"]), data["lambdas"], data.get("capacities"))
    raise ValueError(f"unknown policy kind {kind!r}")


def dumps_policy(policy: Policy | BinnedPolicy) -> str:
    # json writes floats with repr(), which round-trips every double
    return json.dumps(policy.to_dict(), indent=1)


def loads_policy(text: str) -> Policy | BinnedPolicy:
    return policy_from_dict(json.loads(text))


@dataclass(frozen=True)
class RoundingMode:
    """How λ becomes the integer population size Λ.

    ``nearest`` and ``stochastic`` derive Λ from λ; ``decoupled`` reads Λ from
    ``capacities`` (one entry per fitness level).
    """

    kind: str
    capacities: tuple[int, ...] | None = field(default=None, compare=True)

    def __post_init__(self):
        if self.kind not in ("nearest", "stochastic", "decoupled"):
            raise ValueError(f"unknown rounding mode {self.kind!r}")
        if self.kind == "decoupled":
            if self.capacities is None:
                raise ValueError("decoupled rounding needs a capacity table")
            caps = tuple(int(c) for c in self.capacities)
            n = len(caps)
            if n == 0 or min(caps) < 1 or max(caps) > n:
                raise ValueError(f"capacities must lie in [1, {n}]")
            object.__setattr__(self, "capacities", caps)

    @classmethod
    def decoupled(cls, capacities: Sequence[int]) -> "RoundingMode":
        return cls("decoupled", tuple(int(c) for c in capacities))

    @classmethod
    def parse(cls, name: str) -> "RoundingMode":
        if name not in ("nearest", "stochastic"):
            raise ValueError(f"rounding must be 'nearest' or 'stochastic', got {name!r}")
        return cls(name)

    def capacity_mixture(self, lam: float, f: int) -> tuple[tuple[int, int], tuple[float, float]]:
        """Population sizes and their probabilities at fitness ``f``."""
        if self.kind == "nearest":
            c = round_nearest(lam)
            return (c, c), (1.0, 0.0)
        if self.kind == "decoupled":
            c = self.capacities[f]
            return (c, c), (1.0, 0.0)
        lo, hi = math.floor(lam), math.ceil(lam)
        w_lo = hi - lam
        if w_lo == 0.0:
            return (int(hi), int(hi)), (1.0, 0.0)
        return (int(lo), int(hi)), (w_lo, 1.0 - w_lo)


NEAREST = RoundingMode("nearest")
STOCHASTIC = RoundingMode("stochastic")


def theory_policy(n: int) -> Policy:
    """λ(f) = sqrt(n / (n - f))."""
    f = np.arange(n, dtype=np.float64)
    return Policy(n, np.sqrt(n / (n - f)))


def static_policy(n: int, lam: float) -> Policy:
    return Policy(n, np.full(n, float(lam)))


def binned_theory_policy(n: int, k: int | None = None, anchor: str = "start",
                         scheme: BinScheme | None = None) -> BinnedPolicy:
    """Theory value taken at the start, middle or end of each bin.

    The middle of an even-sized bin is its smaller central point.  The last
    bin contains ``n`` itself, where the theory formula is undefined, so its
    end anchor is ``n - 1``.
    """
    if scheme is None:
        scheme = bin_scheme(n, max_bins(n) if k is None else k)
    lams = []
    for lo, hi in scheme.bins():
        hi = min(hi, n - 1)
        if anchor == "start":
            a = lo
        elif anchor == "end":
            a = hi
        elif anchor == "middle":
            a = lo + (hi - lo) // 2
        else:
            raise ValueError(f"anchor must be start, middle or end, got {anchor!r}")
        lams.append(math.sqrt(n / (n - a)))
    return BinnedPolicy(scheme, lams)


# Best binned policies found by exact-runtime minimisation with
# k = ceil(log2 n) geometric bins.
REFERENCE_BIN_VALUES: dict[int, tuple[float, ...]] = {
    500: (1, 1, 1, 1, 6.5, 8.5, 11.5, 16.5, 24.5),
    1000: (1, 1, 1, 1, 6.5, 8.5, 11.5, 16.5, 23.5, 35.5),
    2000: (1, 1, 1, 1, 6.5, 8.5, 11.5, 16.5, 22.5, 32.5, 49.5),
}


def reference_binned_policy(n: int) -> BinnedPolicy:
    if n not in REFERENCE_BIN_VALUES:
        raise KeyError(f"no reference binned policy for n={n}")
    vals = REFERENCE_BIN_VALUES[n]
    return BinnedPolicy(bin_scheme(n, len(vals)), vals)
