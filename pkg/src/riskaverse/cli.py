"""Command-line entry point.

Subcommands: solve, robust, chance, fl, exact, round, gen, coin-demo, lb-demo.
Solver runs write ``report.json`` (which records the flags and seed) and,
where a multiplier search ran, ``trace.csv`` into ``--out``.  Exit status is
0 on success, 2 when the instance is declared infeasible, 1 on any error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import experiments, generators
from .exact_oracle import InfeasibleProblem, SizeGuard, exact_integer_enum, exact_lp
from .facility import FacilityInfeasible, MultiBudgetRoundingRefused, fl_risk_solve, round_fl
from .model import InstanceError, RiskParams, load_problem
from .risk_search import MultiplicativeRefused, RiskSearchError, ZeroOptimal, risk_alg, risk_alg_multiplicative
from .robust import NoBudgetSucceeded, chance_constrained_cover, mixed_objective_solve, robust_solve
from .rounding import UncoverableError, round_integer_cover, scale_first_stage

log = logging.getLogger("riskaverse")

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2
INFEASIBLE = (InfeasibleProblem, FacilityInfeasible, RiskSearchError, NoBudgetSucceeded)


class FlagError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; 2 is reserved for infeasibility here
    def error(self, message):
        raise FlagError(message)


def _samples(v):
    if v == "theory":
        return v
    try:
        n = int(v)
    except ValueError:
        raise argparse.ArgumentTypeError("--samples takes 'theory' or a positive integer") from None
    if n < 1:
        raise argparse.ArgumentTypeError("--samples must be positive")
    return n


def _budget(v):
    return math.inf if v in ("inf", "Infinity") else float(v)


def _solver_flags(p, budget=True):
    p.add_argument("--instance", required=True, help="instance JSON file")
    p.add_argument("--rho", type=float, default=0.1)
    p.add_argument("--kappa", type=float, default=0.5)
    p.add_argument("--eps", type=float, default=0.3)
    p.add_argument("--gamma", type=float, default=0.05)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=_samples, default=5000, help="'theory' or a sample cap")
    p.add_argument("--full-support", action="store_true", help="use the explicit distribution as the sample")
    p.add_argument("--out", default=".", help="output directory")
    if budget:
        p.add_argument("--budget", type=_budget, default=None, help="override the instance budget")


def build_parser():
    p = _Parser(prog="riskaverse", description="Risk-averse two-stage covering and facility location.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="budgeted, robust, chance or facility solve")
    _solver_flags(s)
    s.add_argument("--mode", choices=("budget", "robust", "chance", "facility"), default="budget")
    s.add_argument("--multiplicative", action="store_true", help="bootstrap a lower bound first")

    s = sub.add_parser("robust", help="first-stage cost plus recourse quantile")
    _solver_flags(s, budget=False)
    s.add_argument("--multiplicative", action="store_true")
    s.add_argument("--weight-q", type=float, default=None, help="mix expected cost with weight_q * budget")

    s = sub.add_parser("chance", help="cover all but rho(1+kappa) mass, no recourse")
    _solver_flags(s, budget=False)

    s = sub.add_parser("fl", help="facility location with a probabilistic budget")
    _solver_flags(s)

    s = sub.add_parser("exact", help="exact coupled LP (and integer optimum) on an explicit distribution")
    s.add_argument("--instance", required=True)
    s.add_argument("--rho", type=float, default=0.1)
    s.add_argument("--budget", type=_budget, default=None)
    s.add_argument("--mode", choices=("budget", "robust"), default="budget")
    s.add_argument("--integer", action="store_true", help="also enumerate the integer optimum")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default=".")

    s = sub.add_parser("round", help="budgeted solve followed by integer rounding")
    _solver_flags(s)
    s.add_argument("--eps-r", type=float, default=1.0, help="scaling parameter of the rounding")

    s = sub.add_parser("gen", help="write a generated instance")
    s.add_argument("--family", required=True, choices=sorted(generators.FAMILIES))
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
    s.add_argument("--out", default=".", help="output directory or .json path")

    s = sub.add_parser("coin-demo", help="coin-distinguishing error rates")
    s.add_argument("--varrho", type=float, default=0.05)
    s.add_argument("--delta", type=float, default=0.25)
    s.add_argument("--trials", type=int, default=10_000)
    s.add_argument("--counts", type=int, nargs="*", default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default=".")

    s = sub.add_parser("lb-demo", help="the two-arm sampling lower-bound instance")
    s.add_argument("--rho", type=float, default=0.1)
    s.add_argument("--kappa", type=float, default=0.02)
    s.add_argument("--gamma", type=float, default=0.05)
    s.add_argument("--B", type=float, default=12.0)
    s.add_argument("--samples", type=int, default=1, help="sample budget per sampled run")
    s.add_argument("--trials", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default=".")
    return p


# -- helpers ------------------------------------------------------------------

def _params(args, budget=None):
    return RiskParams(rho=args.rho, eps=args.eps, gamma=args.gamma, kappa=args.kappa, delta=args.delta,
                      budget=budget, sample_mode=args.samples, full_support=args.full_support, seed=args.seed)


def _load(args):
    return load_problem(Path(args.instance).read_text())


def _flags(args):
    return {k: (v if not (isinstance(v, float) and math.isinf(v)) else "inf")
            for k, v in sorted(vars(args).items()) if k not in ("out", "verbose")}


def _default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (set, frozenset)):
        return sorted(map(str, o))
    raise TypeError(type(o).__name__)


def _finite(o):
    if isinstance(o, float) and not math.isfinite(o):
        return "inf" if o > 0 else "-inf"
    if isinstance(o, dict):
        return {k: _finite(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_finite(v) for v in o]
    return o


def _write(args, result, trace=None, status="ok"):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    doc = {"command": args.command, "flags": _flags(args), "seed": getattr(args, "seed", None),
           "status": status, "result": result}
    text = json.dumps(_finite(doc), indent=2, sort_keys=True, default=_default) + "\n"
    (out / "report.json").write_text(text)
    if trace is not None:
        (out / "trace.csv").write_text(trace)
    return text


def _report_payload(rep, inst):
    return rep.to_dict(inst), rep.trace_csv()


# -- subcommands --------------------------------------------------------------

def _budgeted(args, inst, oracle):
    params = _params(args, args.budget)
    if getattr(args, "multiplicative", False):
        res = risk_alg_multiplicative(inst, oracle, params)
        if isinstance(res, ZeroOptimal):
            return {"x": inst.first_stage_map(res.x), "zero_optimal": True, "bootstrap_samples": res.samples}, None
        return _report_payload(res, inst)
    return _report_payload(risk_alg(inst, oracle, params), inst)


def cmd_solve(args):
    if args.mode == "chance" and args.budget is not None:
        raise FlagError("--budget cannot be combined with --mode chance (the budget is 0)")
    if args.mode in ("robust", "chance") and args.budget is not None:
        raise FlagError("--budget is chosen by the grid in robust mode")
    if args.mode == "robust":
        return cmd_robust(args)
    if args.mode == "chance":
        return cmd_chance(args)
    if args.mode == "facility":
        return cmd_fl(args)
    inst, oracle = _load(args)
    if inst.kind == "facility_location":
        return cmd_fl(args)
    result, trace = _budgeted(args, inst, oracle)
    return _write(args, result, trace)


def _robust_payload(res, inst):
    trace = res.report.trace_csv() if res.report is not None else None
    return res.to_dict(inst), trace


def cmd_robust(args):
    inst, oracle = _load(args)
    params = _params(args)
    if getattr(args, "weight_q", None) is not None:
        res = mixed_objective_solve(inst, oracle, params, args.weight_q)
    else:
        res = robust_solve(inst, oracle, params, multiplicative=getattr(args, "multiplicative", False))
    return _write(args, *_robust_payload(res, inst))


def cmd_chance(args):
    inst, oracle = _load(args)
    return _write(args, *_robust_payload(chance_constrained_cover(inst, oracle, _params(args)), inst))


def cmd_fl(args):
    inst, oracle = _load(args)
    if inst.kind != "facility_location":
        raise InstanceError("the fl subcommand needs a facility-location instance")
    rep = fl_risk_solve(inst, oracle, _params(args, args.budget), budget=args.budget)
    return _write(args, *_report_payload(rep, inst))


def cmd_exact(args):
    inst, oracle = _load(args)
    if oracle.support is None:
        raise InstanceError("exact solves need an explicit distribution")
    sol = exact_lp(inst, oracle.support, args.rho, budget=args.budget, mode=args.mode)
    result = {"value": sol.value, "x": inst.first_stage_map(sol.x), "delta_star": sol.delta_star,
              "exceedance": float(sum(p * min(r, 1.0) for (_, p), r in zip(oracle.support, sol.r)))}
    if args.integer:
        val, x = exact_integer_enum(inst, oracle.support, args.rho, budget=args.budget)
        result["integer"] = {"value": val, "x": inst.first_stage_map(x)}
    return _write(args, result)


def cmd_round(args):
    inst, oracle = _load(args)
    params = _params(args, args.budget)
    if inst.kind == "facility_location":
        if inst.multi_budget:
            raise MultiBudgetRoundingRefused("integer rounding with facility or assignment budgets is not supported")
        rep = fl_risk_solve(inst, oracle, params, budget=args.budget)
        if oracle.support is None:
            raise InstanceError("rounding reports need an explicit distribution")
        sol = round_fl(inst, rep.x, oracle.support, args.eps_r)
        result = {"fractional": rep.to_dict(inst), "stage1": [inst.facilities[i] for i in sol.stage1],
                  "stage1_cost": sol.stage1_cost, "expected_cost": sol.expected_cost(oracle.support)}
        return _write(args, result, rep.trace_csv())
    rep = risk_alg(inst, oracle, params)
    x_hat = scale_first_stage(rep.x, args.eps_r)
    cover = round_integer_cover(inst, x_hat)
    result = {"fractional": rep.to_dict(inst), "x_hat": inst.first_stage_map(x_hat),
              "stage1": list(cover.stage1), "stage1_cost": cover.stage1_cost}
    if oracle.support is not None:
        rec = []
        for s, p in oracle.support:
            ids, cost = cover.recourse(s)
            rec.append({"active": sorted(map(str, s.active)), "p": p, "recourse": ids, "cost": cost})
        result["scenarios"] = rec
        result["expected_cost"] = cover.stage1_cost + sum(r["p"] * r["cost"] for r in rec)
    return _write(args, result, rep.trace_csv())


def _coerce(v):
    for f in (int, float):
        try:
            return f(v)
        except ValueError:
            pass
    return v


def cmd_gen(args):
    params = {}
    for kv in args.param:
        if "=" not in kv:
            raise FlagError(f"--param expects KEY=VALUE, got {kv!r}")
        k, v = kv.split("=", 1)
        params[k] = _coerce(v)
    if args.seed is not None and args.family != "lb1":
        params["seed"] = args.seed
    try:
        doc = generators.generate_document(args.family, **params)
    except TypeError as exc:
        raise FlagError(str(exc)) from None
    out = Path(args.out)
    if out.suffix != ".json":
        out.mkdir(parents=True, exist_ok=True)
        out = out / "instance.json"
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    out.write_text(text)
    return text


def cmd_coin(args):
    table = experiments.coin_experiment(args.varrho, args.delta, args.trials, args.counts, seed=args.seed)
    return _write(args, table.to_dict())


def cmd_lb(args):
    rep = experiments.lower_bound_demo(B=args.B, rho=args.rho, kappa=args.kappa, gamma=args.gamma,
                                       sample_budget=args.samples, trials=args.trials, seed=args.seed)
    return _write(args, rep.to_dict())


COMMANDS = {
    "solve": cmd_solve, "robust": cmd_robust, "chance": cmd_chance, "fl": cmd_fl, "exact": cmd_exact,
    "round": cmd_round, "gen": cmd_gen, "coin-demo": cmd_coin, "lb-demo": cmd_lb,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except FlagError as exc:
        print(f"riskaverse: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except FlagError as exc:
        print(f"riskaverse: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except INFEASIBLE as exc:
        print(f"riskaverse: infeasible: {exc}", file=sys.stderr)
        if hasattr(args, "out"):
            _write(args, {"message": str(exc)}, status="infeasible")
        return EXIT_INFEASIBLE
    except (InstanceError, SizeGuard, MultiplicativeRefused, MultiBudgetRoundingRefused, UncoverableError,
            ValueError, OSError) as exc:
        print(f"riskaverse: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
