"""Sweep the last bin value of a binned policy for n = 500 and locate the jumps.

Writes demos_out/sweep.csv (λ, total) and prints the change across each
half-integer next to the typical change between neighbouring grid points.
"""

from pathlib import Path

import numpy as np

from ollga import BinnedPolicy, bin_scheme
from ollga.landscape import SweepSpec, half_integer_jumps, rows_to_csv, sweep_1d, within_interval_steps

n = 500
base = BinnedPolicy(bin_scheme(n, 9), [1, 1, 1, 1, 6.5, 8.5, 11.5, 16.5, 1.0])
rows = sweep_1d(n, SweepSpec(base, (-1,), 1.0, 40.0, 0.1))
out = Path("demos_out")
out.mkdir(exist_ok=True)
(out / "sweep.csv").write_text(rows_to_csv(rows, ["lambda", "total"]))
med = float(np.median(within_interval_steps(rows)))
print(f"median change between neighbouring grid points: {med:.4f}")
for h, j in half_integer_jumps(rows):
    print(f"  jump at {h:5.1f}: {j:9.4f}  ({j / med:7.1f}x)")
best = min(rows, key=lambda r: r[1])
print(f"best last-bin value {best[0]!r} with total {best[1]:.4f}")
