"""Best 7-bin policies for n = 100 under nearest, stochastic and decoupled rounding.

A short evolution-strategy budget keeps this to a few minutes; pass
``full`` for 10 restarts of 200 generations (well over an hour).
"""

import sys

from ollga import bin_scheme
from ollga.binned import optimize_binned, optimize_binned_decoupled
from ollga.es import EsConfig

full = sys.argv[1:] == ["full"]
cfg = EsConfig(popsize=100, iterations=200) if full else EsConfig(popsize=20, iterations=40)
restarts = 10 if full else 1
scheme = bin_scheme(100, 7)
for name in ("nearest", "stochastic", "decoupled"):
    if name == "decoupled":
        res = optimize_binned_decoupled(100, scheme, cfg, restarts)
    else:
        res = optimize_binned(100, scheme, name, cfg, restarts)
    lams = ", ".join(f"{x:.4g}" for x in res.policy.lambdas)
    caps = "" if res.policy.capacities is None else f"  Λ=[{', '.join(map(str, res.policy.capacities))}]"
    print(f"{name:>10}: {res.total:9.4f}  λ=[{lams}]{caps}")
