"""Command-line entry point: ``ollga <subcommand> [options]``.

Every subcommand prints a JSON summary on standard output.  With ``--out DIR``
the artifacts are also written to ``DIR`` together with ``manifest.json``,
which records the resolved configuration and the sha256 of each file.

Exit status: 0 success, 2 usage error, 3 configuration error, 4 runtime
error, 5 capped runs or a degenerate result.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import math
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from .core import (NEAREST, BinnedPolicy, Policy, RoundingMode, bin_scheme, binned_theory_policy,
                   dumps_policy, loads_policy, max_bins, reference_binned_policy, static_policy,
                   theory_policy)
from .exact import NoProgressError, policy_runtime

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME, EXIT_DEGENERATE = 0, 2, 3, 4, 5


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# policy arguments

def resolve_policy(spec: str, n: int):
    """Policy from a name, a static value or a JSON/CSV file.

    Names: ``theory``, ``best`` (solved), ``best_binned`` (reference bin
    values, available for n = 500, 1000, 2000) and ``binned_theory[:anchor]``.
    """
    spec = spec.strip()
    if spec == "theory":
        return theory_policy(n)
    if spec == "best":
        from .solver import optimal_policy
        return optimal_policy(n)[0]
    if spec == "best_binned":
        try:
            return reference_binned_policy(n)
        except KeyError as exc:
            raise ConfigError(str(exc)) from None
    if spec.startswith("binned_theory"):
        anchor = spec.partition(":")[2] or "start"
        return binned_theory_policy(n, anchor=anchor)
    try:
        lam = float(spec)
    except ValueError:
        pass
    else:
        return static_policy(n, lam)
    path = Path(spec)
    if not path.is_file():
        raise ConfigError(f"unknown policy {spec!r}")
    text = path.read_text()
    pol = Policy.from_csv(text) if path.suffix.lower() == ".csv" else loads_policy(text)
    if pol.n != n:
        raise ConfigError(f"policy in {spec} is for n={pol.n}, not n={n}")
    return pol


def _rounding(name: str, policy=None):
    if name == "decoupled":
        caps = getattr(policy, "capacities", None)
        if caps is None:
            raise ConfigError("decoupled rounding needs a policy with a capacity table")
        return None
    return RoundingMode.parse(name)


# ---------------------------------------------------------------------------
# output plumbing

class Output:
    def __init__(self, directory: str | None):
        self.dir = Path(directory) if directory else None
        self.files: dict[str, str] = {}
        if self.dir:
            self.dir.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, text: str) -> None:
        data = text.encode()
        self.files[name] = hashlib.sha256(data).hexdigest()
        if self.dir:
            (self.dir / name).write_bytes(data)

    def manifest(self, command: str, config: dict) -> None:
        if not self.dir:
            return
        doc = {
            "subcommand": command,
            "config": config,
            "version": __version__,
            "seed": config.get("seed"),
            "outputs": self.files,
            "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        }
        (self.dir / "manifest.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _json(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def _merge(args: argparse.Namespace, parser: argparse.ArgumentParser) -> dict:
    """Flags override the config file, which overrides built-in defaults."""
    file_cfg = _load_config(getattr(args, "config", None))
    out = {}
    for key, value in vars(args).items():
        if key in ("func", "config"):
            continue
        default = parser.get_default(key)
        if key in file_cfg and value == default:
            value = file_cfg[key]
        out[key] = value
    unknown = set(file_cfg) - set(out)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return out


# ---------------------------------------------------------------------------
# subcommands

_ACCOUNTING_NOTE = {
    "full_iteration": "counts every evaluation of the final iteration and the initial point; "
                      "mean_after_init is comparable with exact totals",
    "stop_at_optimum": "stops counting at the first optimal point, so runs are shorter than "
                       "exact totals by at most one iteration's evaluations",
}


def _run_chunk(job):
    from .simulator import run_many
    n, pol, rounding, seeds, kwargs = job
    return run_many(n, pol, rounding, seeds=seeds, **kwargs)


def cmd_simulate(cfg, out: Output) -> int:
    from .simulator import run_many
    n = cfg["n"]
    pol = resolve_policy(cfg["policy"] if cfg["lambda_"] is None else str(cfg["lambda_"]), n)
    from .simulator import run_seed
    seeds = [run_seed(cfg["seed"], i) for i in range(cfg["seeds"])]
    kwargs = dict(accounting=cfg["accounting"], max_evaluations=cfg["max_evaluations"],
                  engine=cfg["engine"])
    rounding = _rounding(cfg["rounding"], pol)
    jobs = max(1, min(cfg["jobs"], len(seeds) // 1000))
    if jobs == 1:
        recs = run_many(n, pol, rounding, seeds=seeds, **kwargs)
    else:
        from concurrent.futures import ProcessPoolExecutor
        chunks = [seeds[i::jobs] for i in range(jobs)]
        with ProcessPoolExecutor(jobs) as pool:
            parts = list(pool.map(_run_chunk, [(n, pol, rounding, c, kwargs) for c in chunks]))
        # reassemble in seed order so output does not depend on the worker count
        recs = [parts[i % jobs][i // jobs] for i in range(len(seeds))]
    ev = np.array([r.evaluations for r in recs], dtype=float)
    capped = sum(r.capped for r in recs)
    sd = float(ev.std(ddof=1)) if len(ev) > 1 else 0.0
    summary = {"n": n, "count": len(recs), "mean": float(ev.mean()), "sd": sd,
               "stderr": sd / math.sqrt(len(ev)), "mean_after_init": float(ev.mean()) - 1.0,
               "min": int(ev.min()), "max": int(ev.max()), "capped": int(capped),
               "accounting": cfg["accounting"], "note": _ACCOUNTING_NOTE[cfg["accounting"]]}
    out.write("runs.csv", "run,seed,evaluations,iterations,capped\n" + "".join(
        f"{i},{r.seed},{r.evaluations},{r.iterations},{int(r.capped)}\n"
        for i, r in enumerate(recs)))
    out.write("summary.json", _json(summary))
    print(_json(summary), end="")
    return EXIT_DEGENERATE if capped else EXIT_OK


def _sig10(x: float) -> float:
    return float(f"{x:.10g}")


def cmd_exact(cfg, out: Output) -> int:
    n = cfg["n"]
    pol = resolve_policy(cfg["policy"], n)
    table = policy_runtime(n, pol, _rounding(cfg["rounding"], pol))
    doc = {"n": n, "policy": cfg["policy"], "rounding": cfg["rounding"],
           "total": _sig10(table.total), "T": [_sig10(x) for x in table.T]}
    out.write("runtime.json", _json(doc))
    if cfg["csv"]:
        out.write("runtime.csv", "fitness,remaining\n" + "".join(
            f"{f},{x:.10g}\n" for f, x in enumerate(table.T)))
    print(_json(doc), end="")
    return EXIT_OK


def cmd_solve_optimal(cfg, out: Output) -> int:
    from .solver import IntervalSearchConfig, optimal_policy
    n = cfg["n"]
    sc = IntervalSearchConfig(cfg["epsilon"], cfg["tol"], cfg["batch"], cfg["exhaustive"])
    log = []
    pol, table = optimal_policy(n, sc, log)
    out.write("policy.csv", pol.to_csv())
    out.write("runtime.json", _json({"n": n, "total": table.total,
                                     "T": [float(x) for x in table.T]}))
    out.write("decisions.csv", "f,lambda,time,capacity,interior,candidates\n" + "".join(
        f"{d.f},{d.lam!r},{d.time!r},{d.capacity},{int(d.interior)},"
        f"{' '.join(map(str, d.candidates))}\n" for d in sorted(log, key=lambda d: d.f)))
    doc = {"n": n, "total": table.total}
    print(_json(doc), end="")
    return EXIT_OK


def cmd_solve_binned(cfg, out: Output) -> int:
    from .binned import (convergence_csv, naive_direct_optimize, optimize_binned,
                         optimize_binned_decoupled)
    from .es import EsConfig
    n = cfg["n"]
    k = cfg["k"] or max_bins(n)
    scheme = bin_scheme(n, k)
    es = EsConfig(cfg["popsize"], cfg["iterations"], cfg["sigma0"], cfg["degenerate"], cfg["seed"])
    if cfg["decoupled"]:
        res = optimize_binned_decoupled(n, scheme, es, cfg["restarts"])
    elif cfg["naive"]:
        res = naive_direct_optimize(n, scheme, cfg["rounding"], es, cfg["restarts"])
    else:
        res = optimize_binned(n, scheme, cfg["rounding"], es, cfg["restarts"])
    out.write("policy.json", dumps_policy(res.policy) + "\n")
    out.write("convergence.csv", convergence_csv(res, cfg["reference"]))
    doc = {"n": n, "k": k, "total": res.total, "lambdas": [float(x) for x in res.policy.lambdas]}
    if res.policy.capacities is not None:
        doc["capacities"] = [int(x) for x in res.policy.capacities]
    print(_json(doc), end="")
    return EXIT_OK if math.isfinite(res.total) else EXIT_DEGENERATE


def _scenario(cfg):
    from .racing import TuningScenario
    return TuningScenario(
        n=cfg["n"], space=cfg["space"], k=cfg["k"], budget=cfg["budget"],
        first_test=cfg["first_test"], alpha=cfg["alpha"], capping=not cfg["no_capping"],
        cap_multiplier=cfg["cap_multiplier"], bound_max=cfg["bound_max"], elites=cfg["elites"],
        sd_decay=cfg["sd_decay"], master_seed=cfg["seed"],
        validation_runs=cfg["validation_runs"])


def _tune_outputs(out: Output, prefix: str, res, n: int) -> dict:
    exact = policy_runtime(n, res.policy).total
    out.write(f"{prefix}policy.csv", res.policy.to_csv())
    out.write(f"{prefix}race.csv", res.log_csv())
    summary = {"values": [float(x) for x in res.values], "validation_mean": res.validation_mean,
               "exact_total": exact, "runs_used": res.runs_used,
               "evaluations_used": res.evaluations_used, "iterations": res.iterations}
    out.write(f"{prefix}validation.json", _json(summary))
    return summary


def cmd_tune(cfg, out: Output) -> int:
    from .racing import tune
    res = tune(_scenario(cfg))
    doc = _tune_outputs(out, "", res, cfg["n"])
    print(_json(doc), end="")
    return EXIT_OK


def cmd_cascade(cfg, out: Output) -> int:
    from .racing import cascade
    base = replace(_scenario(cfg), space="binned", k=1)
    stages = cascade(cfg["n"], cfg["k_max"], cfg["budget"], base)
    doc = {"n": cfg["n"], "stages": []}
    for k, res in stages:
        s = _tune_outputs(out, f"stage{k:02d}_", res, cfg["n"])
        doc["stages"].append({"k": k, **s})
    print(_json(doc), end="")
    return EXIT_OK


def cmd_sweep(cfg, out: Output) -> int:
    from .landscape import SweepSpec, rows_to_csv, sweep_1d, sweep_2d, sweep_fixed_capacity
    n = cfg["n"]
    base = resolve_policy(cfg["base"], n)
    if not isinstance(base, BinnedPolicy):
        raise ConfigError("sweeps need a binned base policy")
    bins = (cfg["bin"],) if cfg["bin2"] is None else (cfg["bin"], cfg["bin2"])
    caps = None
    if cfg["capacities"]:
        lo, _, hi = cfg["capacities"].partition(":")
        caps = (int(lo), int(hi or lo))
    spec = SweepSpec(base, bins, cfg["lo"], cfg["hi"], cfg["step"], not cfg["no_predecessors"],
                     cfg["lo2"], cfg["hi2"], cfg["step2"], caps,
                     RoundingMode.parse(cfg["rounding"]))
    if caps is not None:
        text = rows_to_csv(sweep_2d(n, spec), ["lambda", "capacity", "total"])
    elif len(bins) == 2:
        text = rows_to_csv(sweep_2d(n, spec), ["lambda_a", "lambda_b", "total"])
    elif cfg["capacity"] is not None:
        text = rows_to_csv(sweep_fixed_capacity(n, spec, cfg["capacity"]), ["lambda", "total"])
    else:
        text = rows_to_csv(sweep_1d(n, spec), ["lambda", "total"])
    out.write("sweep.csv", text)
    if cfg["gnuplot"]:
        text = "# " + text
    print(text, end="")
    return EXIT_OK


def compare_report(n: int, named: dict) -> tuple[list[dict], str]:
    """Exact totals per policy and the λ overlay for ``f >= n/2``."""
    rows = []
    dense = {}
    for name, pol in named.items():
        p = pol.to_policy() if isinstance(pol, BinnedPolicy) else pol
        if p.n != n:
            raise ConfigError(f"policy {name} is for n={p.n}, not n={n}")
        total = policy_runtime(n, pol, None if p.capacities is not None else NEAREST).total
        rows.append({"policy": name, "total": total})
        dense[name] = p.lambdas
    best = min(r["total"] for r in rows)
    for r in rows:
        r["gap"] = r["total"] - best
    names = list(named)
    lines = [",".join(["fitness", "log_distance"] + names)]
    for f in range((n + 1) // 2, n):
        vals = [repr(float(dense[nm][f])) for nm in names]
        lines.append(",".join([str(f), repr(math.log(n - f))] + vals))
    return rows, "\n".join(lines) + "\n"


def cmd_compare(cfg, out: Output) -> int:
    n = cfg["n"]
    specs = [s for s in cfg["policies"].split(",") if s]
    named = {(Path(s).stem if Path(s).is_file() else s): resolve_policy(s, n) for s in specs}
    rows, overlay = compare_report(n, named)
    out.write("compare.json", _json({"n": n, "policies": rows}))
    out.write("overlay.csv", overlay)
    print(_json({"n": n, "policies": rows}), end="")
    return EXIT_OK


def cmd_oracle(cfg, out: Output) -> int:
    from .oracle import oracle_runtime
    n = cfg["n"]
    pol = resolve_policy(cfg["policy"], n)
    r = _rounding(cfg["rounding"], pol)
    if r is None:
        r = RoundingMode.decoupled(pol.capacities)
    doc = {"n": n, "oracle_total": oracle_runtime(n, pol, r), "dp_total": policy_runtime(n, pol, r).total}
    print(_json(doc), end="")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ollga", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", metavar="{simulate,exact,solve-optimal,solve-binned,"
                           "tune,cascade,sweep,compare}")
    sub.required = True

    def common(sp, seed=True):
        sp.add_argument("--n", type=int, required=True, help="problem size")
        sp.add_argument("--out", help="directory for artifacts and manifest")
        sp.add_argument("--config", help="JSON file with option values")
        sp.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                        help="worker count (results do not depend on it)")
        if seed:
            sp.add_argument("--seed", type=int, default=0, help="master seed")

    sp = sub.add_parser("simulate", help="Monte-Carlo runs of the GA")
    common(sp)
    sp.add_argument("--policy", default="theory")
    sp.add_argument("--lambda", dest="lambda_", type=float, help="static λ (overrides --policy)")
    sp.add_argument("--rounding", default="nearest",
                    choices=["nearest", "stochastic", "decoupled"])
    sp.add_argument("--seeds", type=int, default=100, help="number of runs")
    sp.add_argument("--accounting", default="full_iteration",
                    choices=["full_iteration", "stop_at_optimum"])
    sp.add_argument("--max-evaluations", type=int)
    sp.add_argument("--engine", default="bits", choices=["bits", "levels"])
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("exact", help="exact expected runtime of a policy")
    common(sp)
    sp.add_argument("--policy", default="theory")
    sp.add_argument("--rounding", default="nearest",
                    choices=["nearest", "stochastic", "decoupled"])
    sp.add_argument("--csv", action="store_true", help="also write runtime.csv (needs --out)")
    sp.set_defaults(func=cmd_exact)

    sp = sub.add_parser("solve-optimal", help="best unrestricted policy")
    common(sp)
    sp.add_argument("--epsilon", type=float, default=1e-8)
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.add_argument("--batch", type=int, default=16)
    sp.add_argument("--exhaustive", action="store_true", help="search every rounding interval")
    sp.set_defaults(func=cmd_solve_optimal)

    sp = sub.add_parser("solve-binned", help="best binned policy by evolution strategy")
    common(sp)
    sp.add_argument("--k", type=int, help="number of bins (default ceil(log2 n))")
    sp.add_argument("--rounding", default="nearest", choices=["nearest", "stochastic"])
    sp.add_argument("--decoupled", action="store_true", help="tune population sizes separately")
    sp.add_argument("--naive", action="store_true", help="search λ directly per bin")
    sp.add_argument("--popsize", type=int, default=100)
    sp.add_argument("--iterations", type=int, default=200)
    sp.add_argument("--sigma0", type=float, default=0.3)
    sp.add_argument("--degenerate", type=float, default=1e-12)
    sp.add_argument("--restarts", type=int, default=10)
    sp.add_argument("--reference", type=float, help="known optimum for the gap column")
    sp.set_defaults(func=cmd_solve_binned)

    for name, func in (("tune", cmd_tune), ("cascade", cmd_cascade)):
        sp = sub.add_parser(name, help="iterated racing" if name == "tune"
                            else "racing over 1..k bins, each stage seeded by the last")
        common(sp)
        sp.add_argument("--space", default="binned", choices=["binned", "naive", "static"])
        sp.add_argument("--k", type=int, default=1)
        sp.add_argument("--k-max", type=int)
        sp.add_argument("--budget", type=int, help="run budget (per stage for cascade)")
        sp.add_argument("--first-test", type=int, default=10)
        sp.add_argument("--alpha", type=float, default=0.05)
        sp.add_argument("--no-capping", action="store_true")
        sp.add_argument("--cap-multiplier", type=float, default=1.2)
        sp.add_argument("--bound-max", type=int)
        sp.add_argument("--elites", type=int, default=3)
        sp.add_argument("--sd-decay", type=float)
        sp.add_argument("--validation-runs", type=int, default=500)
        sp.set_defaults(func=func)

    sp = sub.add_parser("sweep", help="exact runtimes along one or two bin values")
    common(sp, seed=False)
    sp.add_argument("--base", default="best_binned", help="binned base policy")
    sp.add_argument("--bin", type=int, default=-1)
    sp.add_argument("--lo", type=float, default=1.0)
    sp.add_argument("--hi", type=float, default=40.0)
    sp.add_argument("--step", type=float, default=0.1)
    sp.add_argument("--no-predecessors", action="store_true",
                    help="skip the doubles just below half-integers")
    sp.add_argument("--capacity", type=int, help="hold the swept bin's population size")
    sp.add_argument("--capacities", help="LO:HI population sizes for a λ × Λ grid")
    sp.add_argument("--bin2", type=int)
    sp.add_argument("--lo2", type=float)
    sp.add_argument("--hi2", type=float)
    sp.add_argument("--step2", type=float)
    sp.add_argument("--rounding", default="nearest", choices=["nearest", "stochastic"])
    sp.add_argument("--gnuplot", action="store_true", help="comment out the header line")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("compare", help="exact totals and λ overlay for several policies")
    common(sp, seed=False)
    sp.add_argument("--policies", default="best,best_binned,theory")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("oracle")  # debugging aid, not listed in the help
    common(sp, seed=False)
    sp.add_argument("--policy", default="theory")
    sp.add_argument("--rounding", default="nearest",
                    choices=["nearest", "stochastic", "decoupled"])
    sp.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    sub = parser._subparsers._group_actions[0].choices[args.command]
    try:
        cfg = _merge(args, sub)
        cfg.pop("command", None)
        out = Output(cfg.pop("out", None))
        status = args.func(cfg, out)
        cfg.pop("jobs", None)  # does not affect results, so it stays out of the manifest
        out.manifest(args.command, cfg)
        return status
    except NoProgressError as exc:
        print(f"ollga: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (ConfigError, ValueError, KeyError) as exc:
        print(f"ollga: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"ollga: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
