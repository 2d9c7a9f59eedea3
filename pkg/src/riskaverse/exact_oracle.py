"""Ground truth on explicit distributions.

These routines write out the full coupled LP (every scenario at once) and its
Lagrangian counterpart directly from the formulation, without the scenario
templates used by the solvers, so they can serve as an independent check on
them.  :func:`exact_integer_enum` brute-forces the integer problem.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .simplex import GE, LE, LpBuilder, solve_lp

MAX_LP_VARS = 5000
MAX_ENUM_SETS = 12
MAX_ENUM_SUPPORT = 12
MAX_ENUM_ACTIVE = 16


class SizeGuard(ValueError):
    """Instance too large for an exhaustive oracle."""


class InfeasibleProblem(RuntimeError):
    """No first-stage decision satisfies the probability constraint."""


@dataclass
class ExactSolution:
    value: float
    x: np.ndarray
    delta_star: float = 0.0
    r: np.ndarray = field(default_factory=lambda: np.zeros(0))
    recourse: list = field(default_factory=list)   # per scenario: dict of recourse arrays
    scenarios: list = field(default_factory=list)


def _scenario_budget(inst, scen, budget):
    if scen.budget_override is not None:
        return scen.budget_override
    return inst.budget if budget is None else budget


def _check_size(n_vars):
    if n_vars > MAX_LP_VARS:
        raise SizeGuard(f"{n_vars} LP variables exceed the oracle limit {MAX_LP_VARS}")


def _add_sc_block(lp, inst, xv, scen, weight, mode, budget, delta):
    """Scenario variables and rows for set cover; returns the variable map."""
    w2 = inst.stage2_weights(scen)
    sets = sorted({i for e in scen.active for i in inst.covering_sets[e]})
    cost = 0.0 if mode == "robust" else weight
    yv = {s: lp.add_var(cost * w2[s]) for s in sets}
    zv = {s: lp.add_var(cost * w2[s]) for s in sets} if mode == "budget" else {}
    rv = lp.add_var(weight * delta if delta is not None else 0.0)
    for e in scen.active:
        cov = inst.covering_sets[e]
        row = {xv[s]: 1.0 for s in cov}
        row.update({yv[s]: 1.0 for s in cov})
        row[rv] = 1.0
        lp.add_row(row, GE, 1.0)
        if mode == "budget":
            row = {xv[s]: 1.0 for s in cov}
            for s in cov:
                row[yv[s]] = 1.0
                row[zv[s]] = 1.0
            lp.add_row(row, GE, 1.0)
    B = _scenario_budget(inst, scen, budget)
    if math.isfinite(B) and sets:
        lp.add_row({yv[s]: w2[s] for s in sets}, LE, B)
    return {"y": yv, "z": zv, "r": rv}


def _add_fl_block(lp, inst, xv, scen, weight, budget, delta):
    f2 = inst.stage2_weights(scen)
    clients = sorted(inst.client_index[c] for c in scen.active)
    F = range(inst.m)
    ax = {(i, j): lp.add_var(weight * inst.metric[i, j]) for i in F for j in clients}
    au = {(i, j): lp.add_var(weight * inst.metric[i, j]) for i in F for j in clients}
    ya = {i: lp.add_var(weight * f2[i]) for i in F}
    va = {i: lp.add_var(weight * f2[i]) for i in F}
    rv = lp.add_var(weight * delta if delta is not None else 0.0)
    for j in clients:
        row = {ax[i, j]: 1.0 for i in F}
        row[rv] = 1.0
        lp.add_row(row, GE, 1.0)
        row = {ax[i, j]: 1.0 for i in F}
        row.update({au[i, j]: 1.0 for i in F})
        lp.add_row(row, GE, 1.0)
    for i in F:
        for j in clients:
            lp.add_row({xv[i]: 1.0, ya[i]: 1.0, ax[i, j]: -1.0}, GE, 0.0)
            lp.add_row({xv[i]: 1.0, ya[i]: 1.0, va[i]: 1.0, ax[i, j]: -1.0, au[i, j]: -1.0}, GE, 0.0)
    if clients:
        B = _scenario_budget(inst, scen, budget)
        opening = {ya[i]: f2[i] for i in F}
        assigning = {ax[i, j]: inst.metric[i, j] for i in F for j in clients}
        if math.isfinite(B):
            lp.add_row({**opening, **assigning}, LE, B)
        if math.isfinite(inst.budget_facility):
            lp.add_row(opening, LE, inst.budget_facility)
        if math.isfinite(inst.budget_assignment):
            lp.add_row(assigning, LE, inst.budget_assignment)
    return {"x": ax, "u": au, "y": ya, "v": va, "r": rv, "clients": clients}


def _mode_for(inst, mode):
    if inst.kind == "facility_location":
        return "facility"
    return mode


def _build(inst, dist, mode, budget, delta, rho):
    mode = _mode_for(inst, mode)
    lp = LpBuilder()
    xv = [lp.add_var(float(w), 0.0, 1.0) for w in inst.w1]
    blocks = []
    for scen, p in dist:
        if mode == "facility":
            blocks.append(_add_fl_block(lp, inst, xv, scen, p, budget, delta))
        else:
            blocks.append(_add_sc_block(lp, inst, xv, scen, p, mode, budget, delta))
    _check_size(lp.n_vars)
    coupling = None
    if rho is not None:
        coupling = lp.add_row({b["r"]: p for b, (_, p) in zip(blocks, dist)}, LE, rho)
    return lp.build(), xv, blocks, coupling


def _unpack(inst, sol, xv, blocks, dist):
    x = sol.x[xv]
    r = np.array([sol.x[b["r"]] for b in blocks])
    rec = []
    for b in blocks:
        if "clients" in b:
            rec.append({k: {key: sol.x[v] for key, v in b[k].items()} for k in ("x", "u", "y", "v")})
        else:
            y = np.zeros(inst.m)
            z = np.zeros(inst.m)
            for s, v in b["y"].items():
                y[s] = sol.x[v]
            for s, v in b["z"].items():
                z[s] = sol.x[v]
            rec.append({"y": y, "z": z})
    return x, r, rec


def exact_lp(inst, dist, rho, budget=None, mode="budget"):
    """Optimum of the full coupled LP and the multiplier of its probability row.

    ``mode="robust"`` drops the over-budget recourse and the expected-cost
    term, leaving ``min w1.x`` under the probability row.  Raises
    :class:`InfeasibleProblem` when the LP has no feasible point.
    """
    p, xv, blocks, coupling = _build(inst, dist, mode, budget, None, rho)
    sol = solve_lp(p)
    if sol.status == "infeasible":
        raise InfeasibleProblem("coupled LP is infeasible")
    if not sol.optimal:
        raise RuntimeError(f"coupled LP ended {sol.status}")
    x, r, rec = _unpack(inst, sol, xv, blocks, dist)
    return ExactSolution(float(sol.objective), x, max(0.0, float(-sol.dual[coupling])), r, rec, [s for s, _ in dist])


def exact_lagrangian_value(inst, dist, delta, budget=None, mode="budget", return_solution=False):
    """``OPT(delta) = min_x h(delta; x)`` over the unit box, one aggregate LP."""
    p, xv, blocks, _ = _build(inst, dist, mode, budget, float(delta), None)
    sol = solve_lp(p)
    if not sol.optimal:
        raise InfeasibleProblem(f"Lagrangian LP ended {sol.status}")
    if return_solution:
        x, r, rec = _unpack(inst, sol, xv, blocks, dist)
        return float(sol.objective), ExactSolution(float(sol.objective), x, float(delta), r, rec, [s for s, _ in dist])
    return float(sol.objective)


# -- integer enumeration ------------------------------------------------------

def _cover_table(inst, scen):
    """Cheapest integer cover, with stage-II weights, of every subset of the active elements."""
    active = sorted(scen.active, key=lambda e: inst.element_index[e])
    k = len(active)
    if k > MAX_ENUM_ACTIVE:
        raise SizeGuard(f"scenario with {k} active elements is too large to enumerate")
    pos = {e: t for t, e in enumerate(active)}
    w2 = inst.stage2_weights(scen)
    masks = []
    for s, members in enumerate(inst.member_sets):
        mk = 0
        for e in members:
            if e in pos:
                mk |= 1 << pos[e]
        if mk:
            masks.append((mk, float(w2[s])))
    best = np.full(1 << k, np.inf)
    best[0] = 0.0
    for mask in range(1, 1 << k):
        low = mask & -mask
        b = np.inf
        for mk, w in masks:
            if mk & low:
                c = w + best[mask & ~mk]
                if c < b:
                    b = c
        best[mask] = b
    return pos, best


def _fl_recourse_int(inst, scen, open1):
    """Cheapest integer stage-II opening plus assignment given stage-I openings."""
    clients = [inst.client_index[c] for c in scen.active]
    if not clients:
        return 0.0
    f2 = inst.stage2_weights(scen)
    best = np.inf
    nf = inst.m
    for extra in itertools.product((0, 1), repeat=nf):
        opened = [i for i in range(nf) if open1[i] or extra[i]]
        if not opened:
            continue
        cost = sum(f2[i] for i in range(nf) if extra[i] and not open1[i])
        cost += float(inst.metric[np.ix_(opened, clients)].min(axis=0).sum())
        best = min(best, cost)
    return best


def exact_integer_enum(inst, dist, rho, budget=None):
    """Integer optimum by exhaustive search over first-stage 0/1 vectors.

    For fixed integer ``x`` each scenario either fits its cheapest integer
    recourse within its budget or counts as exceeding; ``x`` is admissible when
    the exceeding mass is at most ``rho``.  Returns ``(value, x)``.
    """
    m = inst.m
    if m > MAX_ENUM_SETS or len(dist) > MAX_ENUM_SUPPORT:
        raise SizeGuard(f"enumeration limited to {MAX_ENUM_SETS} actions and {MAX_ENUM_SUPPORT} scenarios")
    w1 = np.asarray(inst.w1, dtype=float)
    entries = list(dist)
    fl = inst.kind == "facility_location"
    tables = None if fl else [_cover_table(inst, s) for s, _ in entries]
    best, arg = np.inf, None
    for bits in itertools.product((0, 1), repeat=m):
        x = np.array(bits, dtype=float)
        cost = float(w1 @ x)
        if cost >= best:
            continue
        mass = 0.0
        for t, (scen, p) in enumerate(entries):
            if fl:
                c = _fl_recourse_int(inst, scen, bits)
            else:
                pos, table = tables[t]
                mask = 0
                for e, b in pos.items():
                    if not any(bits[s] for s in inst.covering_sets[e]):
                        mask |= 1 << b
                c = table[mask]
            if not math.isfinite(c):
                cost = np.inf
                break
            cost += p * c
            if c > _scenario_budget(inst, scen, budget) + 1e-9:
                mass += p
        if mass <= rho + 1e-12 and cost < best:
            best, arg = cost, x
    if arg is None:
        raise InfeasibleProblem("no integer first-stage vector meets the probability constraint")
    return float(best), arg
