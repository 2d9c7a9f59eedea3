"""Risk-averse facility location with a probabilistic budget.

The solver runs the multiplier search of :mod:`risk_search` on the facility
scenario LPs after a sampling pre-check that the instance is not trivially
infeasible: if even the cheapest possible assignment of a scenario's clients
exceeds the budget with probability above ``rho``, no solution exists.  The
search then runs at a slightly raised threshold ``rho_hat`` with ``kappa_hat``
chosen so that ``rho_hat (1 + kappa_hat) = rho (1 + kappa)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import stream
from .risk_search import UpperBound, recourse_solutions, risk_alg
from .rounding import sta_round_fl
from .saa import draw_samples
from .scenario_lp import solve_second_stage  # noqa: F401  (re-exported for symmetry)
from .simplex import GE, LpBuilder, solve_lp


class FacilityInfeasible(RuntimeError):
    """Too much mass on scenarios whose cheapest assignment already exceeds the budget."""

    def __init__(self, msg, estimate):
        super().__init__(msg)
        self.estimate = estimate


class MultiBudgetRoundingRefused(ValueError):
    """Integer rounding is not provided when facility or assignment budgets are finite."""


@dataclass(frozen=True)
class Proceed:
    rho_hat: float
    kappa_hat: float
    ub: float
    estimate: float
    samples: int


@dataclass(frozen=True)
class Infeasible:
    estimate: float
    samples: int


def adjusted_threshold(rho, kappa):
    """``(rho_hat, kappa_hat)`` with ``rho_hat = rho(1 + 5 kappa/28)`` and the product preserved."""
    rho_hat = rho * (1 + 5 * kappa / 28)
    kappa_hat = rho * (1 + kappa) / rho_hat - 1
    return rho_hat, kappa_hat


def effective_budget(inst, budget=None):
    """Finite stand-in for the total budget in the multiplier bound.

    With an infinite total budget the scenario's budgeted spend is bounded by
    the facility and assignment budgets, and in any case by the cost of
    opening everything at the inflated price and assigning every client to
    its farthest facility.
    """
    B = inst.budget if budget is None else budget
    cap = inst.lam * float(np.sum(inst.f1)) + float(inst.metric.max(axis=0).sum())
    return min(B, inst.budget_facility + inst.budget_assignment, cap)


def fl_upper_bound(inst, params, budget=None):
    rho_hat, kappa_hat = adjusted_threshold(params.rho, params.kappa)
    eps_bar = params.eps / 6
    B = effective_budget(inst, budget)
    ub = 32 * (1 + eps_bar) * (float(np.sum(inst.f1)) + B) / (3 * params.rho * params.kappa)
    return UpperBound(ub, rho_hat, kappa_hat)


def precheck_sample_size(rho, kappa, delta):
    return math.ceil(56 / (5 * rho * kappa) * math.log(1 / delta))


def _over_budget(inst, scen, budget):
    B = inst.budget if budget is None else budget
    if scen.budget_override is not None:
        B = scen.budget_override
    B = min(B, inst.budget_assignment)
    return inst.min_assignment_cost(scen) > B + 1e-12


def fl_feasibility_check(inst, oracle, params, budget=None):
    """Two-sided test of ``Pr[C_A > B] > rho`` versus ``<= rho (1 + 5 kappa / 28)``.

    ``C_A`` is the cheapest conceivable assignment cost of scenario ``A``.
    Full-support runs compute the probability exactly and compare with ``rho``.
    """
    bound = fl_upper_bound(inst, params, budget)
    if params.full_support:
        q = sum(p for s, p in oracle.support if _over_budget(inst, s, budget))
        n = len(oracle.support)
        cut = params.rho
    else:
        n = precheck_sample_size(params.rho, params.kappa, params.delta)
        draws = draw_samples(oracle, stream(params.seed, "fl_precheck"), n, inst)
        q = sum(1 for s in draws if _over_budget(inst, s, budget)) / n
        cut = params.rho * (1 + 5 * params.kappa / 56)
    if q > cut:
        return Infeasible(q, n)
    return Proceed(bound.rho, bound.kappa, bound.ub, q, n)


def fl_risk_solve(inst, oracle, params, budget=None):
    """Pre-check, then the multiplier search with facility scenario LPs."""
    if inst.kind != "facility_location":
        raise ValueError("facility-location instance required")
    check = fl_feasibility_check(inst, oracle, params, budget)
    if isinstance(check, Infeasible):
        raise FacilityInfeasible(
            f"estimated Pr[cheapest assignment > budget] = {check.estimate:.4g} exceeds rho = {params.rho}",
            check.estimate,
        )
    rep = risk_alg(inst, oracle, params, mode="facility", budget=budget, ub=check.ub,
                   rho=check.rho_hat, kappa=check.kappa_hat)
    rep.extras["rho_hat"] = check.rho_hat
    rep.extras["kappa_hat"] = check.kappa_hat
    if inst.multi_budget and oracle.support is not None:
        rep.extras["recourse"] = [
            {"active": sorted(s.active, key=repr), **_recourse_doc(inst, fl_recourse(rep, inst, s))}
            for s, _ in oracle.support
        ]
    return rep


@dataclass
class FlRecourse:
    open_y: np.ndarray      # stage-II openings within budget
    open_v: np.ndarray      # extra openings beyond budget
    assign_x: np.ndarray    # (facilities, clients)
    assign_u: np.ndarray
    r: float
    cost: float
    budget_cost: float


def _recourse_doc(inst, rec):
    return {
        "open": {f: float(v) for f, v in zip(inst.facilities, rec.open_y)},
        "open_extra": {f: float(v) for f, v in zip(inst.facilities, rec.open_v)},
        "r": rec.r,
        "cost": rec.cost,
    }


def fl_recourse(report, inst, scen):
    """Scenario decisions from the report's one or two stored multipliers, mixed."""
    parts = recourse_solutions(report, inst, scen)
    nf, nc = inst.m, len(inst.clients)
    out = FlRecourse(np.zeros(nf), np.zeros(nf), np.zeros((nf, nc)), np.zeros((nf, nc)), 0.0, 0.0, 0.0)
    for w, s in parts:
        out.open_y += w * s.y
        out.open_v += w * s.z
        out.assign_x += w * s.assign_x
        out.assign_u += w * s.assign_u
        out.r += w * min(s.r, 1.0)
        out.cost += w * s.recourse_cost
        out.budget_cost += w * s.budget_cost
    return out


# -- integer rounding ---------------------------------------------------------

def _nearest_fill(metric_col, caps):
    """Cheapest fractional unit assignment of one client under opening capacities."""
    out = np.zeros_like(caps)
    need = 1.0
    for i in sorted(range(len(caps)), key=lambda i: (metric_col[i], i)):
        take = min(caps[i], need)
        out[i] = take
        need -= take
        if need <= 1e-12:
            return out
    return None


def _fractional_recourse(inst, y_hat, scen):
    """Cheapest fractional stage-II service of ``scen`` given first-stage openings ``y_hat``."""
    clients = sorted(inst.client_index[c] for c in scen.active)
    F = range(inst.m)
    f2 = inst.stage2_weights(scen)
    lp = LpBuilder()
    ax = {(i, j): lp.add_var(inst.metric[i, j]) for i in F for j in clients}
    ya = [lp.add_var(f2[i]) for i in F]
    for j in clients:
        lp.add_row({ax[i, j]: 1.0 for i in F}, GE, 1.0)
        for i in F:
            lp.add_row({ya[i]: 1.0, ax[i, j]: -1.0}, GE, -y_hat[i])
    sol = solve_lp(lp.build())
    x = np.zeros((inst.m, len(inst.clients)))
    for (i, j), v in ax.items():
        x[i, j] = sol.x[v]
    return x, sol.x[ya], float(sol.objective)


@dataclass
class FlIntegerSolution:
    stage1: list                 # opened facility indices
    stage1_cost: float
    scenario_cost: dict          # scenario -> integer recourse cost
    fractional_cost: dict        # scenario -> fractional recourse cost at the scaled first stage

    def expected_cost(self, dist):
        return self.stage1_cost + sum(p * self.scenario_cost[s] for s, p in dist)


def round_fl(inst, y, dist, eps_r, gamma=0.25):
    """Integer facility-location solution from fractional first-stage openings ``y``.

    The openings are scaled to ``y_hat = min(1, (1 + 1/eps_r) y)``.  Stage I
    rounds, for every client that can be fully served within capacities
    ``min(1, 2 y_hat)``, its cheapest such fractional assignment.  In each
    scenario the fractional recourse is split between stage-I and stage-II
    openings; clients with at least half their mass on stage I use the
    stage-I facilities, the rest are rounded on the doubled stage-II part.
    Both rounding steps lose the clustering factor, so costs grow by at most
    ``2 * 4`` over the scaled fractional solution.
    """
    if inst.multi_budget:
        raise MultiBudgetRoundingRefused("integer rounding with facility or assignment budgets is not supported")
    y_hat = np.minimum(1.0, (1 + 1 / eps_r) * np.asarray(y, dtype=float))
    caps = np.minimum(1.0, 2 * y_hat)
    nc = len(inst.clients)
    fill = np.zeros((inst.m, nc))
    fillable = []
    for j in range(nc):
        col = _nearest_fill(inst.metric[:, j], caps)
        if col is not None:
            fill[:, j] = col
            fillable.append(j)
    stage1 = []
    if fillable:
        res = sta_round_fl(fill, caps, inst.metric, inst.f1, fillable, gamma)
        stage1 = res.opened
    stage1_cost = float(inst.f1[stage1].sum()) if stage1 else 0.0
    scen_cost, frac_cost = {}, {}
    for scen, _ in dist:
        if not scen.active:
            scen_cost[scen] = frac_cost[scen] = 0.0
            continue
        x, ya, val = _fractional_recourse(inst, y_hat, scen)
        frac_cost[scen] = val
        denom = y_hat[:, None] + ya[:, None]
        share = np.divide(y_hat[:, None], denom, out=np.zeros_like(denom), where=denom > 0)
        x1 = x * share
        x2 = x - x1
        clients = [inst.client_index[c] for c in scen.active]
        late = [j for j in clients if x1[:, j].sum() < 0.5]
        opened = list(stage1)
        f2 = inst.stage2_weights(scen)
        extra_cost = 0.0
        if late:
            res2 = sta_round_fl(2 * x2, 2 * ya, inst.metric, f2, late, gamma)
            new = [i for i in res2.opened if i not in opened]
            extra_cost = float(f2[new].sum()) if new else 0.0
            opened += new
        if not opened:
            raise RuntimeError("rounding opened no facility for a nonempty scenario")
        assign_cost = float(inst.metric[np.ix_(opened, clients)].min(axis=0).sum())
        scen_cost[scen] = extra_cost + assign_cost
    return FlIntegerSolution(sorted(stage1), stage1_cost, scen_cost, frac_cost)
