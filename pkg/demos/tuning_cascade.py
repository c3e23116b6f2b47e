"""Cascaded racing for n = 500 with 1..9 bins, scored by the exact runtime.

Each stage starts from the previous stage's best policy with its last bin
split in two.  Takes a few minutes on one core.
"""

from ollga import policy_runtime, reference_binned_policy, theory_policy
from ollga.racing import TuningScenario, cascade

n = 500
for k, res in cascade(n, defaults=TuningScenario(n, master_seed=1)):
    vals = ", ".join(f"{x:.2f}" for x in res.values)
    print(f"k={k}: exact {policy_runtime(n, res.policy).total:8.2f}  "
          f"validation mean {res.validation_mean:8.2f}  [{vals}]")
print(f"theory {policy_runtime(n, theory_policy(n)).total:.2f}, "
      f"reference binned {policy_runtime(n, reference_binned_policy(n)).total:.2f}")
