"""Search over the Lagrange multiplier of the probability row.

:func:`risk_alg` walks a geometric grid of multipliers, solves the sampled
Lagrangian problem at each one, estimates how much probability mass each
solution sends over budget, and mixes the two adjacent solutions whose
estimates straddle the target threshold ``rho' = rho (1 + 3 kappa / 4)``.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .model import stream
from .saa import AggregateLp, SaaConfig, build_empirical, draw_samples, theory_sample_size
from .scenario_lp import SolveStore, solve_scenario_lagrangian

log = logging.getLogger(__name__)

MAX_ESTIMATION_SAMPLES = 1_000_000


class RiskSearchError(RuntimeError):
    """No usable crossing on the grid; ``report`` carries the partial trace."""

    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


class MultiplicativeRefused(ValueError):
    """Multiplicative guarantees need the declared unit cost floor on the instance."""


# -- grid ---------------------------------------------------------------------

@dataclass(frozen=True)
class RiskConstants:
    eps_bar: float
    zeta: float
    eta: float
    sigma: float
    gamma_p: float
    beta: float
    rho_p: float
    rho: float
    kappa: float

    @classmethod
    def of(cls, eps, gamma, rho, kappa):
        return cls(
            eps_bar=eps / 6,
            zeta=gamma / 4,
            eta=rho * kappa / 16,
            sigma=eps / 6,
            gamma_p=gamma / 4,
            beta=kappa / 8,
            rho_p=rho * (1 + 3 * kappa / 4),
            rho=rho,
            kappa=kappa,
        )


@dataclass(frozen=True)
class DeltaGrid:
    deltas: tuple
    constants: RiskConstants
    ub: float

    @property
    def k(self):
        return len(self.deltas) - 1

    def __len__(self):
        return len(self.deltas)


def grid_points(start, ratio, stop):
    """``start, start*ratio, ...`` up to and including the first value ``>= stop``."""
    if stop <= start:
        return (float(start),)
    steps = math.ceil(math.log(stop / start) / math.log(ratio) - 1e-12)
    pts = [start * ratio ** i for i in range(steps + 1)]
    while pts[-1] < stop:  # guard against rounding in the step count
        pts.append(pts[-1] * ratio)
    return tuple(float(p) for p in pts)


def delta_grid(params, ub, rho=None, kappa=None):
    rho = params.rho if rho is None else rho
    kappa = params.kappa if kappa is None else kappa
    c = RiskConstants.of(params.eps, params.gamma, rho, kappa)
    return DeltaGrid(grid_points(c.gamma_p, 1 + c.sigma, ub), c, float(ub))


@dataclass(frozen=True)
class UpperBound:
    ub: float
    rho: float
    kappa: float


def compute_ub(inst, params, budget=None):
    """Largest multiplier the search needs, with the (rho, kappa) pair to run at."""
    if inst.kind == "facility_location":
        from .facility import fl_upper_bound

        return fl_upper_bound(inst, params, budget)
    return UpperBound(16 * float(np.sum(inst.w1)) / params.rho, params.rho, params.kappa)


def estimation_sample_size(k, delta, beta, rho):
    k = max(k, 1)
    return math.ceil(math.log(4 * k / delta) / (2 * beta ** 2 * rho ** 2))


# -- evaluation ---------------------------------------------------------------

def _evaluate(inst, mode, lagrange_delta, x, dist, budget, store=None):
    """(exceedance, cost) of the per-scenario optimal recourse at ``x``."""
    p_prime = 0.0
    cost = float(np.asarray(inst.w1) @ x)
    for scen, q in dist:
        s = solve_scenario_lagrangian(inst, mode, lagrange_delta, x, scen, budget, store)
        p_prime += q * min(s.r, 1.0)
        if mode != "robust":
            cost += q * s.recourse_cost
    return p_prime, cost


def estimate_exceedance(inst, oracle, x, lagrange_delta, n=None, rng=None, mode="budget", budget=None, dist=None):
    """Average optimal ``r_A`` over ``n`` sampled scenarios (or over ``dist`` if given)."""
    if dist is None:
        if rng is None or n is None:
            raise ValueError("need (n, rng) or an explicit distribution")
        dist = build_empirical(draw_samples(oracle, rng, n, inst))
    return _evaluate(inst, mode, lagrange_delta, np.asarray(x, float), dist, budget)[0]


# -- report -------------------------------------------------------------------

@dataclass
class TracePoint:
    delta: float
    cost: float
    p_prime: float
    h: float
    wallclock_ms: float


@dataclass
class RiskReport:
    x: np.ndarray
    mixing: tuple | None
    cost_estimate: float
    exceedance_estimate: float
    trace: list
    mode: str
    ub: float
    rho_prime: float
    deltas: tuple
    xs: list
    index: int
    budget: float | None
    lb: float | None = None
    saa_samples: int = 0
    saa_theory: float = 0.0
    estimation_samples: int = 0
    full_support: bool = False
    extras: dict = field(default_factory=dict)
    store: SolveStore | None = field(default=None, repr=False)

    def to_dict(self, inst):
        doc = {
            "x": inst.first_stage_map(self.x),
            "cost_estimate": self.cost_estimate,
            "exceedance_estimate": self.exceedance_estimate,
            "trace": [{"delta": t.delta, "cost": t.cost, "p_prime": t.p_prime} for t in self.trace],
            "ub": self.ub,
            "mode": self.mode,
        }
        if self.mixing is not None:
            doc["mixing"] = {"i": self.mixing[0], "a": self.mixing[1]}
        if self.lb is not None:
            doc["lb"] = self.lb
        doc["samples"] = {"saa": self.saa_samples, "saa_theory": self.saa_theory,
                          "estimation": self.estimation_samples, "full_support": self.full_support}
        doc.update(self.extras)
        return doc

    def to_json(self, inst):
        return json.dumps(self.to_dict(inst), indent=2, sort_keys=True, default=_json_default)

    def trace_csv(self):
        lines = ["delta,cost,p_prime,wallclock_ms"]
        lines += [f"{t.delta!r},{t.cost!r},{t.p_prime!r},{t.wallclock_ms:.3f}" for t in self.trace]
        return "\n".join(lines) + "\n"


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


# -- the search ---------------------------------------------------------------

def _distributions(inst, oracle, params, grid, robust, mode):
    """Empirical distributions for the SAA solves and for estimation."""
    c = grid.constants
    if params.full_support:
        if oracle.support is None:
            raise ValueError("full-support mode needs an oracle with an explicit support")
        n_sup = len(oracle.support)
        return oracle.support, oracle.support, n_sup, float(n_sup), n_sup
    cfg = SaaConfig.for_delta(inst, params, grid.deltas[-1], robust=robust,
                              eps_bar=c.eps_bar, eta=c.eta, zeta=c.zeta)
    size = theory_sample_size(cfg)
    saa = build_empirical(draw_samples(oracle, stream(params.seed, "saa"), size.count, inst))
    n_est = min(estimation_sample_size(grid.k, params.delta, c.beta, c.rho), MAX_ESTIMATION_SAMPLES)
    est = build_empirical(draw_samples(oracle, stream(params.seed, "estimate"), n_est, inst))
    return saa, est, size.count, size.theory, n_est


def risk_alg(inst, oracle, params, mode="budget", budget=None, ub=None, rho=None, kappa=None, lb=None):
    """Run the multiplier search; returns a :class:`RiskReport`.

    ``rho``/``kappa`` override the parameters' values (the facility-location
    wrapper runs at adjusted values); ``ub`` defaults to :func:`compute_ub`.
    Raises :class:`RiskSearchError` when the estimate at the largest
    multiplier is still at or above ``rho'``.
    """
    if mode == "facility" and inst.kind != "facility_location":
        raise ValueError("facility mode needs a facility-location instance")
    if budget is None:
        budget = params.budget
    if ub is None:
        bound = compute_ub(inst, params, budget)
        ub = bound.ub
        rho = bound.rho if rho is None else rho
        kappa = bound.kappa if kappa is None else kappa
    rho = params.rho if rho is None else rho
    grid = delta_grid(params, ub, rho, kappa)
    c = grid.constants
    robust = mode == "robust"
    saa, est, n_saa, n_theory, n_est = _distributions(inst, oracle, params, grid, robust, mode)

    agg = AggregateLp(inst, saa, mode, budget)
    store = SolveStore()
    trace, xs = [], []
    t0 = time.perf_counter()
    for d in grid.deltas:
        sol = agg.solve(d)
        x = np.clip(sol.x[: inst.m], 0.0, 1.0)
        p_prime, cost = _evaluate(inst, mode, d, x, est, budget, store)
        trace.append(TracePoint(d, cost, p_prime, float(sol.objective), (time.perf_counter() - t0) * 1e3))
        xs.append(x)

    pk = trace[-1].p_prime
    extras = {}
    if params.full_support:
        # with exact evaluation the largest multiplier must push the exceedance
        # below rho/2 (covering) or rho' (facility location)
        cut = c.rho_p if mode == "facility" else rho / 2
        extras["end_exceedance"] = {"value": pk, "cut": cut, "ok": pk < cut}
        if not pk < cut:
            log.warning("exceedance %.4g at the largest multiplier is not below %.4g", pk, cut)

    def report(x, mixing, idx, cost, exceed):
        return RiskReport(
            x=x, mixing=mixing, cost_estimate=cost, exceedance_estimate=exceed, trace=trace, mode=mode,
            ub=float(ub), rho_prime=c.rho_p, deltas=grid.deltas, xs=xs, index=idx, budget=budget, lb=lb,
            saa_samples=n_saa, saa_theory=n_theory, estimation_samples=n_est, full_support=params.full_support,
            extras=dict(extras), store=store,
        )

    if pk >= c.rho_p:
        raise RiskSearchError(
            f"estimated exceedance {pk:.4g} at the largest multiplier {grid.deltas[-1]:.4g} is not below "
            f"rho' = {c.rho_p:.4g}; sampling failed or the instance admits no solution within the threshold",
            report(xs[-1], None, grid.k, trace[-1].cost, pk),
        )
    if trace[0].p_prime <= c.rho_p:
        return report(xs[0], None, 0, trace[0].cost, trace[0].p_prime)
    for i in range(grid.k):
        hi, lo = trace[i].p_prime, trace[i + 1].p_prime
        if hi >= c.rho_p >= lo:
            a = 1.0 if hi == lo else (c.rho_p - lo) / (hi - lo)
            x = a * xs[i] + (1 - a) * xs[i + 1]
            cost = a * trace[i].cost + (1 - a) * trace[i + 1].cost
            exceed = a * hi + (1 - a) * lo
            return report(x, (i, a), i, cost, exceed)
    raise RiskSearchError("no adjacent pair of estimates straddles rho'", report(xs[-1], None, grid.k, pk, pk))


def recourse_solutions(report, inst, scen):
    """The one or two scenario solutions the report's recourse is mixed from, with weights."""
    i, st = report.index, report.store
    first = solve_scenario_lagrangian(inst, report.mode, report.deltas[i], report.xs[i], scen, report.budget, st)
    if report.mixing is None:
        return [(1.0, first)]
    a = report.mixing[1]
    second = solve_scenario_lagrangian(inst, report.mode, report.deltas[i + 1], report.xs[i + 1], scen, report.budget, st)
    return [(a, first), (1 - a, second)]


def recourse_policy(report, inst, scen):
    """Second-stage decision ``(y, z, r)`` for scenario ``scen``."""
    parts = recourse_solutions(report, inst, scen)
    y = sum(w * s.y for w, s in parts)
    z = sum(w * s.z for w, s in parts)
    r = sum(w * min(s.r, 1.0) for w, s in parts)
    return y, z, float(r)


def evaluate_report(report, inst, dist):
    """Exact expected cost and exceedance mass of the report's policy under ``dist``."""
    cost = float(np.asarray(inst.w1) @ report.x)
    mass = 0.0
    for scen, p in dist:
        parts = recourse_solutions(report, inst, scen)
        mass += p * sum(w * min(s.r, 1.0) for w, s in parts)
        if report.mode != "robust":
            cost += p * sum(w * s.recourse_cost for w, s in parts)
    return cost, mass


# -- multiplicative guarantee -------------------------------------------------

@dataclass
class ZeroOptimal:
    """Doing nothing in stage I is optimal; every nonempty scenario is handled by full recourse."""

    x: np.ndarray
    samples: int

    def policy(self, inst, scen):
        from .scenario_lp import solve_second_stage

        if not scen.active:
            return np.zeros(inst.m), np.zeros(inst.m), 0.0
        _, zhat = solve_second_stage(inst, np.zeros(inst.m), scen)
        return np.zeros(inst.m), zhat, 1.0


@dataclass
class LowerBound:
    lb: float
    samples: int
    nonempty: int


def bootstrap_lower_bound(inst, oracle, params):
    """Decide between "stage I can stay empty" and a positive lower bound on OPT.

    Draws ``ceil(ln(1/delta)/alpha)`` scenarios, ``alpha = min(rho, 1/lambda)``.
    No nonempty draw means ``ZeroOptimal``; otherwise OPT is at least
    ``delta/ln(1/delta) * alpha`` with high probability.  Requires the instance
    to declare that any nonempty scenario costs at least 1 in total.
    """
    if not inst.assume_cost_floor:
        raise MultiplicativeRefused("instance does not declare a unit cost floor for nonempty scenarios")
    alpha = min(params.rho, 1 / inst.lam)
    M = math.ceil(math.log(1 / params.delta) / alpha)
    if params.full_support:
        if oracle.support is None:
            raise ValueError("full-support mode needs an oracle with an explicit support")
        X = sum(1 for s, p in oracle.support if s.active and p > 0)
    else:
        X = sum(1 for s in draw_samples(oracle, stream(params.seed, "bootstrap"), M, inst) if s.active)
    if X == 0:
        return ZeroOptimal(np.zeros(inst.m), M)
    return LowerBound(params.delta / math.log(1 / params.delta) * alpha, M, X)


def risk_alg_multiplicative(inst, oracle, params, mode="budget", budget=None):
    """Run :func:`risk_alg` with additive error ``eps * LB`` after the bootstrap."""
    boot = bootstrap_lower_bound(inst, oracle, params)
    if isinstance(boot, ZeroOptimal):
        return boot
    return risk_alg(inst, oracle, params.replace(gamma=params.eps * boot.lb), mode=mode, budget=budget, lb=boot.lb)
