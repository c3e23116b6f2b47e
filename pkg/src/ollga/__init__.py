"""Exact runtimes, simulation and parameter-control policy search for the
(1+(λ,λ)) GA on OneMax."""

__version__ = "0.1.0"

from .core import (
    BinnedPolicy,
    BinScheme,
    NEAREST,
    STOCHASTIC,
    Policy,
    RoundingMode,
    bin_scheme,
    binned_theory_policy,
    max_bins,
    reference_binned_policy,
    round_nearest,
    static_policy,
    theory_policy,
)
from .exact import policy_runtime, policy_runtime_explicit, RuntimeTable
from .simulator import run_ga, run_many

__all__ = [
    "BinnedPolicy",
    "BinScheme",
    "NEAREST",
    "STOCHASTIC",
    "Policy",
    "RoundingMode",
    "RuntimeTable",
    "bin_scheme",
    "binned_theory_policy",
    "max_bins",
    "policy_runtime",
    "policy_runtime_explicit",
    "reference_binned_policy",
    "round_nearest",
    "run_ga",
    "run_many",
    "static_policy",
    "theory_policy",
]
