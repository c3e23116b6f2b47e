"""Iterated racing over policy parameters, evaluated by simulated runs.

Each iteration samples candidates (uniformly at first, later from truncated
normals around the elites), races them on a common stream of run seeds, and
drops candidates that a paired one-sided t-test shows to be slower than the
current best.  Runs are cut off once they exceed a multiple of the best
candidate's mean on the seeds seen so far.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .core import BinnedPolicy, Policy, bin_scheme, max_bins, NEAREST
from .simulator import run_many

__all__ = [
    "TuningScenario",
    "RaceState",
    "TuneResult",
    "BudgetError",
    "tune",
    "cascade",
    "expand_bins",
    "instance_seed",
    "validation_seed",
    "default_budget",
]

_BINNED_BUDGETS = {500: 5000, 1000: 10000, 2000: 20000, 3000: 21000}


def default_budget(n: int, space: str = "binned") -> int:
    """Run budget per tuning: 50000 for per-fitness tuning, size-based otherwise."""
    if space == "naive":
        return 50000
    return _BINNED_BUDGETS.get(n, 5000 if n < 500 else 10 * n)


class BudgetError(ValueError):
    pass


@dataclass(frozen=True)
class TuningScenario:
    n: int
    space: str = "binned"  # "binned", "naive" or "static"
    k: int = 1
    budget: int | None = None
    first_test: int = 10
    alpha: float = 0.05
    capping: bool = True
    cap_multiplier: float = 1.2
    bound_max: int | None = None  # hard evaluation cap per run, default 50 n
    elites: int = 3
    sd_decay: float | None = None  # None: shrink by (1 / new candidates) ** (1 / dim)
    master_seed: int = 0
    validation_runs: int = 500
    engine: str = "levels"
    log_scale: bool = True  # sample λ on a log axis

    def __post_init__(self):
        if self.space not in ("binned", "naive", "static"):
            raise ValueError(f"unknown parameter space {self.space!r}")
        if self.space == "binned" and not 1 <= self.k <= max_bins(self.n):
            raise ValueError(f"k must lie in [1, {max_bins(self.n)}]")
        if self.first_test < 2 or not 0 < self.alpha < 1 or self.elites < 1:
            raise ValueError("invalid racing settings")
        if self.run_budget < 2 * self.first_test:
            raise BudgetError(f"budget {self.run_budget} cannot fit one first test "
                              f"of two candidates ({2 * self.first_test} runs)")

    @property
    def dim(self) -> int:
        return {"binned": self.k, "naive": self.n, "static": 1}[self.space]

    @property
    def run_budget(self) -> int:
        return default_budget(self.n, self.space) if self.budget is None else int(self.budget)

    @property
    def max_evaluations(self) -> int:
        return 50 * self.n if self.bound_max is None else int(self.bound_max)

    def policy(self, values) -> Policy:
        v = np.asarray(values, dtype=float)
        if self.space == "naive":
            return Policy(self.n, v)
        if self.space == "static":
            return Policy(self.n, np.full(self.n, v[0]))
        return BinnedPolicy(bin_scheme(self.n, self.k), v).to_policy()


def instance_seed(master: int, i: int) -> int:
    ss = np.random.SeedSequence(int(master), spawn_key=(0, int(i)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def validation_seed(master: int, i: int) -> int:
    ss = np.random.SeedSequence(int(master), spawn_key=(1, int(i)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(eq=False)
class _Candidate:
    cid: int
    values: np.ndarray
    parent: int | None
    results: dict = field(default_factory=dict)  # instance -> (evaluations, capped)


@dataclass
class RaceState:
    """Mutable bookkeeping of one tuning session."""

    scenario: TuningScenario
    runs_used: int = 0
    evaluations_used: int = 0
    elites: list = field(default_factory=list)
    sd: float = 0.0
    seen: int = 0  # racing seeds 0..seen-1 have been used
    log: list = field(default_factory=list)  # (iteration, cid, instance, evaluations, capped)
    next_id: int = 0

    @property
    def runs_left(self) -> int:
        return self.scenario.run_budget - self.runs_used


@dataclass
class TuneResult:
    values: np.ndarray
    policy: Policy
    validation_mean: float
    elites: list
    runs_used: int
    evaluations_used: int
    iterations: int
    log: list

    def log_csv(self) -> str:
        rows = ["iteration,candidate,instance,evaluations,capped"]
        rows += [f"{a},{b},{c},{d},{int(e)}" for a, b, c, d, e in self.log]
        return "\n".join(rows) + "\n"


def _evaluate(state: RaceState, cand: _Candidate, inst: int, bound: int, iteration: int):
    sc = state.scenario
    rec = run_many(sc.n, sc.policy(cand.values), NEAREST, seeds=[instance_seed(sc.master_seed, inst)],
                   accounting="stop_at_optimum", max_evaluations=[bound], engine=sc.engine)[0]
    # a capped run counts as exactly its bound: at least that bad, never better
    value = bound if rec.capped else rec.evaluations
    cand.results[inst] = (value, rec.capped)
    state.runs_used += 1
    state.evaluations_used += rec.evaluations
    state.log.append((iteration, cand.cid, inst, value, rec.capped))


def _worse(a, b, alpha) -> bool:
    """Paired one-sided test that ``a`` has the larger mean."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    m = d.mean()
    sd = d.std(ddof=1)
    if sd == 0.0:
        return m > 0.0
    t = m / (sd / math.sqrt(len(d)))
    return stats.t.sf(t, len(d) - 1) < alpha


def _mean(c: _Candidate, insts) -> float:
    return float(np.mean([c.results[i][0] for i in insts]))


def _race(state: RaceState, elites: list, fresh: list, budget: int, iteration: int,
          min_survivors: int):
    """Race on one new seed, then on every seed seen before, then on new ones.

    Elites cannot be dropped before the newcomers have caught up with their
    history.  Returns the survivors and the seeds all of them completed.
    """
    sc = state.scenario
    seen = state.seen
    spent = 0
    alive = elites + fresh
    elite_ids = {c.cid for c in elites}
    done = []
    pos = 0
    while True:
        inst = seen if pos == 0 else (pos - 1 if pos <= seen else pos)
        # candidates holding a result go first, so the bound comes from proven ones
        alive.sort(key=lambda c: (inst not in c.results, c.cid))
        best_mean = None
        for c in alive:
            if inst not in c.results:
                if spent >= budget or state.runs_left <= 0:
                    return alive, done
                bound = sc.max_evaluations
                if sc.capping and best_mean is not None:
                    bound = min(bound, max(1, math.ceil(sc.cap_multiplier * best_mean)))
                _evaluate(state, c, inst, bound, iteration)
                spent += 1
            m = _mean(c, done + [inst])
            if best_mean is None or m < best_mean:
                best_mean = m
        done.append(inst)
        pos += 1
        state.seen = max(state.seen, inst + 1)
        protected = len(done) <= seen
        if len(done) >= sc.first_test:
            best = min(alive, key=lambda c: (_mean(c, done), c.cid))
            bvals = [best.results[i][0] for i in done]
            alive = [c for c in alive if c is best or (protected and c.cid in elite_ids) or
                     not _worse([c.results[i][0] for i in done], bvals, sc.alpha)]
        if len(alive) <= min_survivors and not protected:
            return alive, done


def _span(sc: TuningScenario) -> float:
    return math.log(sc.n) if sc.log_scale else sc.n - 1.0


def _sample(state: RaceState, rng, count: int) -> list:
    sc = state.scenario
    to_axis, from_axis = (np.log, np.exp) if sc.log_scale else (np.asarray, np.asarray)
    lo, hi = float(to_axis(1.0)), float(to_axis(float(sc.n)))
    out = []
    for _ in range(count):
        if not state.elites:
            x = rng.uniform(lo, hi, sc.dim)
            parent = None
        else:
            ne = len(state.elites)
            w = np.arange(ne, 0, -1, dtype=float)
            e = state.elites[rng.choice(ne, p=w / w.sum())]
            centre = to_axis(e.values)
            sd = state.sd
            a, b = (lo - centre) / sd, (hi - centre) / sd
            x = stats.truncnorm.rvs(a, b, loc=centre, scale=sd, random_state=rng)
            parent = e.cid
        vals = np.clip(from_axis(np.atleast_1d(x)), 1.0, float(sc.n))
        out.append(_Candidate(state.next_id, np.asarray(vals, dtype=float), parent))
        state.next_id += 1
    return out


def tune(scenario: TuningScenario, initial=()) -> TuneResult:
    """Iterated racing within the scenario's run budget.

    ``initial`` holds parameter vectors added to the first iteration's
    candidates.  The elites are finally compared on validation seeds that
    never appear in the races.
    """
    sc = scenario
    state = RaceState(sc, sd=_span(sc) / 2)
    rng = np.random.default_rng(np.random.SeedSequence(sc.master_seed, spawn_key=(2,)))
    n_iter = 2 + int(math.log2(sc.dim)) if sc.dim > 1 else 2
    min_surv = 2 + int(math.log2(sc.dim))
    iteration = 0
    while state.runs_left >= sc.first_test:
        iteration += 1
        remaining_iters = max(1, n_iter - iteration + 1)
        budget = state.runs_left // remaining_iters if iteration <= n_iter else state.runs_left
        if budget < 2 * sc.first_test and iteration > 1:
            break
        n_new = max(2, budget // (sc.first_test + min(5, iteration)) - len(state.elites))
        fresh = []
        if iteration == 1:
            for v in initial:
                fresh.append(_Candidate(state.next_id, np.asarray(v, dtype=float), None))
                state.next_id += 1
        if state.elites:
            state.sd *= (sc.sd_decay if sc.sd_decay is not None
                         else (1.0 / max(n_new, 1)) ** (1.0 / sc.dim))
        fresh += _sample(state, rng, max(0, n_new - len(fresh)))
        alive, done = _race(state, state.elites, fresh, budget, iteration, min_surv)
        if done:
            state.elites = sorted(alive, key=lambda c: (_mean(c, done), c.cid))[:sc.elites]
    if not state.elites:
        raise BudgetError("budget exhausted before any race finished")
    best, best_mean = None, math.inf
    vseeds = [validation_seed(sc.master_seed, i) for i in range(sc.validation_runs)]
    for e in state.elites:
        recs = run_many(sc.n, sc.policy(e.values), NEAREST, seeds=vseeds,
                        accounting="stop_at_optimum", engine=sc.engine)
        m = float(np.mean([r.evaluations for r in recs]))
        if m < best_mean:
            best, best_mean = e, m
    return TuneResult(best.values.copy(), sc.policy(best.values), best_mean,
                      [e.values.copy() for e in state.elites], state.runs_used,
                      state.evaluations_used, iteration, state.log)


def expand_bins(values) -> np.ndarray:
    """Bin values for one more bin: the split last bin keeps its value twice."""
    v = np.asarray(values, dtype=float)
    return np.append(v, v[-1])


def cascade(n: int, k_max: int | None = None, per_stage_budget: int | None = None,
            defaults: TuningScenario | None = None) -> list[tuple[int, TuneResult]]:
    """Tune ``k = 1..k_max`` bins, seeding each stage with the previous elite."""
    k_max = max_bins(n) if k_max is None else k_max
    if not 1 <= k_max <= max_bins(n):
        raise ValueError(f"k_max must lie in [1, {max_bins(n)}]")
    base = defaults or TuningScenario(n)
    out = []
    initial = ()
    for k in range(1, k_max + 1):
        stage_seed = int(np.random.SeedSequence(base.master_seed, spawn_key=(3, k))
                         .generate_state(1)[0])
        sc = replace(base, n=n, space="binned", k=k, budget=per_stage_budget or base.budget,
                     master_seed=stage_seed)
        res = tune(sc, initial)
        out.append((k, res))
        initial = (expand_bins(res.values),)
    return out
