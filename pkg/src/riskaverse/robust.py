"""Risk-averse robust covering: minimise ``w1.x`` plus the ``(1 - rho)``-quantile of recourse cost.

The quantile is guessed on a geometric grid of budgets.  For each guess ``B``
the robust-mode search finds a cheap ``x`` whose recourse fits within ``B``
outside a set of scenarios of small mass; the best ``w1.x + B`` wins.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .model import stream
from .risk_search import MultiplicativeRefused, RiskSearchError, grid_points, risk_alg
from .saa import build_empirical, draw_samples
from .scenario_lp import ScenarioInfeasible, solve_second_stage

log = logging.getLogger(__name__)


class NoBudgetSucceeded(RuntimeError):
    """The search failed at every budget on the grid."""


def budget_grid(gamma, eps, W):
    """``gamma, gamma (1 + eps), ...`` up to the first value ``>= W``."""
    if not (gamma > 0 and eps > 0):
        raise ValueError("gamma and eps must be positive")
    return grid_points(gamma, 1 + eps, W)


def exact_quantile(costs, probs, rho):
    """Smallest ``B`` among the costs with ``Pr[cost > B] <= rho``."""
    costs = np.asarray(costs, dtype=float)
    probs = np.asarray(probs, dtype=float)
    if costs.size == 0:
        return 0.0
    for v in np.unique(costs):
        if probs[costs > v].sum() <= rho + 1e-12:
            return float(v)
    return float(costs.max())


def _recourse_cost(inst, x, scen):
    try:
        return solve_second_stage(inst, x, scen)[0]
    except ScenarioInfeasible:
        return math.inf


def scenario_costs(inst, x, dist):
    """``f_A(x)`` for every scenario of ``dist`` (``inf`` if uncoverable) and its probability."""
    return [_recourse_cost(inst, x, s) for s, _ in dist], [p for _, p in dist]


def quantile_of(inst, oracle, x, params, n=None):
    """Quantile of ``f_A(x)`` at level ``rho``: exact under full support, else empirical."""
    if params.full_support:
        dist = oracle.support
    else:
        dist = build_empirical(draw_samples(oracle, stream(params.seed, "quantile"), n or 1000, inst))
    return exact_quantile(*scenario_costs(inst, x, dist), params.rho)


@dataclass
class RobustResult:
    x: np.ndarray
    budget: float
    objective: float           # w1.x + chosen budget
    quantile: float            # measured rho-quantile of f_A(x)
    report: object | None      # RiskReport of the winning budget (None for the all-empty answer)
    grid: tuple = ()
    candidates: list = field(default_factory=list)   # (B, objective or None on failure)

    def to_dict(self, inst):
        doc = self.report.to_dict(inst) if self.report is not None else {"x": inst.first_stage_map(self.x)}
        doc.update({
            "budget": self.budget,
            "objective": self.objective,
            "quantile": self.quantile,
            "budget_grid": list(self.grid),
            "candidates": [{"budget": b, "objective": o} for b, o in self.candidates],
        })
        return doc


def _check(inst):
    if inst.kind != "set_cover":
        raise ValueError("robust mode is implemented for covering instances")


def _best_over_grid(inst, oracle, params, grid, mode, score):
    best, cands = None, []
    for B in grid:
        try:
            rep = risk_alg(inst, oracle, params, mode=mode, budget=B)
        except RiskSearchError as exc:
            log.info("budget %.4g: %s", B, exc)
            cands.append((B, None))
            continue
        val = score(rep, B)
        cands.append((B, val))
        if best is None or val < best[0] - 1e-12:
            best = (val, B, rep)
    if best is None:
        raise NoBudgetSucceeded("the search failed at every budget on the grid")
    return best, cands


def robust_solve(inst, oracle, params, multiplicative=False):
    """Best ``w1.x + B`` over the budget grid, with the robust-mode search at each ``B``.

    With ``multiplicative=True`` the instance must declare a unit cost floor:
    if the mass of nonempty scenarios is at most ``rho`` the empty first stage
    with budget 0 is returned, otherwise ``OPT >= 1`` and ``gamma`` is set to ``eps``.
    """
    _check(inst)
    if multiplicative:
        if not inst.assume_cost_floor:
            raise MultiplicativeRefused("instance does not declare a unit cost floor for nonempty scenarios")
        q = _nonempty_mass(inst, oracle, params)
        if q <= params.rho:
            x = np.zeros(inst.m)
            return RobustResult(x, 0.0, 0.0, 0.0, None)
        params = params.replace(gamma=params.eps)
    W = float(np.sum(inst.w1))
    grid = budget_grid(params.gamma, params.eps, W)
    w1 = np.asarray(inst.w1, dtype=float)
    (val, B, rep), cands = _best_over_grid(inst, oracle, params, grid, "robust",
                                           lambda rep, B: float(w1 @ rep.x) + B)
    q = quantile_of(inst, oracle, rep.x, params, rep.estimation_samples)
    return RobustResult(rep.x, B, val, q, rep, grid, cands)


def _nonempty_mass(inst, oracle, params):
    if params.full_support:
        return sum(p for s, p in oracle.support if s.active)
    rho_p = params.rho * (1 + 3 * params.kappa / 4)
    n = math.ceil(math.log(1 / params.delta) / rho_p)
    draws = draw_samples(oracle, stream(params.seed, "bootstrap"), n, inst)
    return sum(1 for s in draws if s.active) / n


def chance_constrained_cover(inst, oracle, params):
    """Cheapest ``x`` leaving at most ``rho (1 + kappa)`` mass uncovered, no recourse allowed."""
    _check(inst)
    rep = risk_alg(inst, oracle, params, mode="robust", budget=0.0)
    w1 = np.asarray(inst.w1, dtype=float)
    return RobustResult(rep.x, 0.0, float(w1 @ rep.x), quantile_of(inst, oracle, rep.x, params, rep.estimation_samples),
                        rep, (0.0,), [(0.0, float(w1 @ rep.x))])


def mixed_objective_solve(inst, oracle, params, weight_q):
    """Minimise expected cost plus ``weight_q`` times the budget, budget-mode search per grid point.

    ``weight_q = 0`` takes the largest grid budget.  The reported objective is
    the estimated expected cost plus ``weight_q`` times the measured quantile.
    """
    _check(inst)
    if weight_q < 0:
        raise ValueError("weight_q must be >= 0")
    grid = budget_grid(params.gamma, params.eps, float(np.sum(inst.w1)))
    if weight_q == 0:
        grid_run = grid[-1:]
    else:
        grid_run = grid
    (_, B, rep), cands = _best_over_grid(inst, oracle, params, grid_run, "budget",
                                         lambda rep, B: rep.cost_estimate + weight_q * B)
    q = quantile_of(inst, oracle, rep.x, params, rep.estimation_samples)
    return RobustResult(rep.x, B, rep.cost_estimate + weight_q * q, q, rep, grid, cands)
