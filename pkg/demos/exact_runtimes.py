"""Exact expected runtimes of the theory, reference binned and optimal policies.

Usage: python3 demos/exact_runtimes.py [n ...]      (default: 100 500)
"""

import sys
import time

from ollga import policy_runtime, reference_binned_policy, theory_policy
from ollga.core import REFERENCE_BIN_VALUES
from ollga.solver import optimal_policy


def main(sizes):
    print(f"{'n':>6} {'policy':>14} {'total':>12} {'seconds':>8}")
    for n in sizes:
        named = {"theory": lambda: policy_runtime(n, theory_policy(n)).total,
                 "optimal": lambda: optimal_policy(n)[1].total}
        if n in REFERENCE_BIN_VALUES:
            named["binned"] = lambda: policy_runtime(n, reference_binned_policy(n)).total
        for name, fn in named.items():
            t0 = time.time()
            total = fn()
            print(f"{n:>6} {name:>14} {total:>12.4f} {time.time() - t0:>8.1f}")


if __name__ == "__main__":
    main([int(a) for a in sys.argv[1:]] or [100, 500])
