"""Per-scenario second-stage LPs and the subgradients built from their duals.

Three Lagrangian scenario problems are supported, all with the coupling
probability row priced out at rate ``delta``:

``budget``
    min w2.(y + z) + delta r  subject to
    sum_{S∋e}(x + y) + r >= 1, sum_{S∋e}(x + y + z) >= 1 for e in A, w2.y <= B.
``robust``
    min delta r subject to the first covering family and the budget row.
``facility``
    the facility-location analogue with assignment variables ``x, u``,
    stage-II openings ``y, v`` and one exceedance variable ``r``.

Each scenario's LP is built once as a template whose right-hand side is affine
in the first-stage vector; solves only patch ``b`` and the cost of ``r``.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .simplex import GE, LE, LpProblem, SimplexError, solve_lp

MODES = ("budget", "robust", "facility")
MEMO_CAP = 200_000


class ScenarioInfeasible(RuntimeError):
    """A scenario cannot be served at any cost (an active item has no cover)."""


@dataclass
class ScenarioSolution:
    mode: str
    value: float
    r: float
    recourse_cost: float       # cost of the recourse actions, without the delta r term
    y: np.ndarray              # set cover: per set; facility: stage-II openings y_A
    z: np.ndarray              # set cover: over-budget sets; facility: extra openings v_A
    theta: float = 0.0
    alpha: np.ndarray = field(default_factory=lambda: np.zeros(0))
    beta: np.ndarray = field(default_factory=lambda: np.zeros(0))
    first_stage_dual: np.ndarray = field(default_factory=lambda: np.zeros(0))
    items: tuple = ()          # active element / client indices, aligned with alpha, beta
    # facility mode only
    assign_x: np.ndarray | None = None   # (facilities, clients) dense
    assign_u: np.ndarray | None = None
    psi: np.ndarray | None = None
    gamma: np.ndarray | None = None      # Gamma_{ij}, (facilities, |A|)
    budget_cost: float = 0.0             # the part of the recourse charged against the budget

    @property
    def over_budget(self):
        return self.r > 0.0


@dataclass
class _Template:
    lp: LpProblem
    R: np.ndarray          # b = b0 - R @ x
    r_var: int | None
    items: tuple           # active item indices
    cols: np.ndarray       # set/facility indices of the y block
    n_items: int
    tiebreak: np.ndarray | None = None
    extra: tuple = ()


def _budget_of(inst, scen, budget):
    if scen.budget_override is not None:
        return scen.budget_override
    return inst.budget if budget is None else budget


def _sc_template(inst, scen, mode, B):
    items = tuple(sorted(inst.element_index[e] for e in scen.active))
    cols = sorted({i for e in scen.active for i in inst.covering_sets[e]})
    w2 = inst.stage2_weights(scen)[cols]
    k, nc = len(items), len(cols)
    pos = {s: t for t, s in enumerate(cols)}
    member = np.zeros((k, inst.m))
    local = np.zeros((k, nc))
    for a, ei in enumerate(items):
        for s in inst.covering_sets[inst.elements[ei]]:
            member[a, s] = 1.0
            local[a, pos[s]] = 1.0
    if mode == "second_stage":
        A = local
        c = w2.copy()
        rel = (GE,) * k
        b0 = np.ones(k)
        R = member
        r_var = None
    elif mode == "budget":
        # vars: y (nc), z (nc), r
        n = 2 * nc + 1
        rows = [np.hstack([local, np.zeros((k, nc)), np.ones((k, 1))]),
                np.hstack([local, local, np.zeros((k, 1))])]
        rel = [GE] * (2 * k)
        b0 = [np.ones(2 * k)]
        R = [member, member]
        if math.isfinite(B):
            rows.append(np.concatenate([w2, np.zeros(nc + 1)])[None, :])
            rel.append(LE)
            b0.append([B])
            R.append(np.zeros((1, inst.m)))
        A = np.vstack(rows)
        c = np.concatenate([w2, w2, [0.0]])
        rel, b0, R = tuple(rel), np.concatenate(b0), np.vstack(R)
        r_var = n - 1
    elif mode == "robust":
        # vars: y (nc), r
        n = nc + 1
        rows = [np.hstack([local, np.ones((k, 1))])]
        rel = [GE] * k
        b0 = [np.ones(k)]
        R = [member]
        if math.isfinite(B):
            rows.append(np.concatenate([w2, [0.0]])[None, :])
            rel.append(LE)
            b0.append([B])
            R.append(np.zeros((1, inst.m)))
        A = np.vstack(rows)
        c = np.zeros(n)
        rel, b0, R = tuple(rel), np.concatenate(b0), np.vstack(R)
        r_var = n - 1
    else:
        raise ValueError(f"unknown set-cover mode {mode!r}")
    n = A.shape[1]
    lp = LpProblem(c=np.asarray(c, float), A=A, rel=rel, b=b0, lo=np.zeros(n), hi=np.full(n, np.inf))
    return _Template(lp, R, r_var, items, np.array(cols, dtype=int), k)


def _fl_template(inst, scen, B):
    items = tuple(sorted(inst.client_index[c] for c in scen.active))
    nf, k = inst.m, len(items)
    f2 = inst.stage2_weights(scen)
    dist = inst.metric[:, list(items)]  # (nf, k)
    nx_ = nf * k
    ix = lambda i, a: i * k + a  # noqa: E731
    ux = lambda i, a: nx_ + i * k + a  # noqa: E731
    yA = 2 * nx_
    vA = yA + nf
    r = vA + nf
    n = r + 1
    c = np.zeros(n)
    c[:nx_] = dist.ravel()
    c[nx_:2 * nx_] = dist.ravel()
    c[yA:yA + nf] = f2
    c[vA:vA + nf] = f2
    rows, rel, b0, Rrows = [], [], [], []

    def row():
        return np.zeros(n)

    for a in range(k):  # asgnx
        v = row()
        v[[ix(i, a) for i in range(nf)]] = 1.0
        v[r] = 1.0
        rows.append(v); rel.append(GE); b0.append(1.0); Rrows.append(np.zeros(nf))
    for a in range(k):  # asgnu
        v = row()
        v[[ix(i, a) for i in range(nf)]] = 1.0
        v[[ux(i, a) for i in range(nf)]] = 1.0
        rows.append(v); rel.append(GE); b0.append(1.0); Rrows.append(np.zeros(nf))
    for i in range(nf):  # fac1: yA_i - x_ij >= -y_i
        for a in range(k):
            v = row()
            v[yA + i] = 1.0
            v[ix(i, a)] = -1.0
            e = np.zeros(nf); e[i] = 1.0
            rows.append(v); rel.append(GE); b0.append(0.0); Rrows.append(e)
    for i in range(nf):  # fac2: yA_i + vA_i - x_ij - u_ij >= -y_i
        for a in range(k):
            v = row()
            v[yA + i] = 1.0
            v[vA + i] = 1.0
            v[ix(i, a)] = -1.0
            v[ux(i, a)] = -1.0
            e = np.zeros(nf); e[i] = 1.0
            rows.append(v); rel.append(GE); b0.append(0.0); Rrows.append(e)
    extra = []
    if math.isfinite(B):
        v = row(); v[yA:yA + nf] = f2; v[:nx_] = dist.ravel()
        rows.append(v); rel.append(LE); b0.append(B); Rrows.append(np.zeros(nf)); extra.append("total")
    if math.isfinite(inst.budget_facility):
        v = row(); v[yA:yA + nf] = f2
        rows.append(v); rel.append(LE); b0.append(inst.budget_facility); Rrows.append(np.zeros(nf)); extra.append("facility")
    if math.isfinite(inst.budget_assignment):
        v = row(); v[:nx_] = dist.ravel()
        rows.append(v); rel.append(LE); b0.append(inst.budget_assignment); Rrows.append(np.zeros(nf)); extra.append("assignment")
    A = np.array(rows).reshape(len(rows), n)
    lp = LpProblem(c=c, A=A, rel=tuple(rel), b=np.array(b0, float), lo=np.zeros(n), hi=np.full(n, np.inf))
    tb = np.zeros(len(rows))
    tb[2 * k:2 * k + nx_] = 1.0  # minimise the sum of fac1 duals among optimal duals
    return _Template(lp, np.array(Rrows).reshape(len(rows), nf), r, items, np.arange(nf), k, tiebreak=tb, extra=tuple(extra))


def _template(inst, scen, mode, B):
    key = ("tpl", mode, scen, B)
    cache = inst.cache
    t = cache.get(key)
    if t is None:
        if mode == "facility":
            t = _fl_template(inst, scen, B)
        else:
            t = _sc_template(inst, scen, mode, B)
        cache[key] = t
    return t


def _memo(inst):
    m = inst.cache.get("memo")
    if m is None:
        m = inst.cache["memo"] = OrderedDict()
    return m


class SolveStore:
    """Run-local memo and warm-start bases.

    Warm starts can change which optimal vertex is returned when the optimum
    is not unique, so they are confined to one run: every solution a run used
    stays in ``solutions`` and later lookups (recourse, evaluation) see the
    same vertex.  Solves without a store are cold and memoised globally.
    """

    def __init__(self):
        self.solutions = {}
        self.bases = {}


def _solve_template(t, x, delta, warm=None):
    c = t.lp.c
    if t.r_var is not None:
        c = c.copy()
        c[t.r_var] = delta
    b = t.lp.b - t.R @ np.asarray(x, float)
    p = LpProblem(c=c, A=t.lp.A, rel=t.lp.rel, b=b, lo=t.lp.lo, hi=t.lp.hi)
    sol = solve_lp(p, dual_tiebreak=t.tiebreak, warm=warm)
    if sol.status == "infeasible":
        raise ScenarioInfeasible("scenario has an active item that no action can serve")
    if not sol.optimal:
        raise SimplexError(f"scenario LP ended {sol.status}")
    return sol


def _check_x(inst, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (inst.m,):
        raise ValueError(f"first-stage vector has shape {x.shape}, expected {(inst.m,)}")
    if np.any(x < -1e-12):
        raise ValueError("first-stage vector must be nonnegative")
    return np.maximum(x, 0.0)


def solve_second_stage(inst, x, scen):
    """Cheapest fractional recourse ``f_A(x)``; returns ``(value, y)`` with ``y`` per set."""
    x = _check_x(inst, x)
    y = np.zeros(inst.m)
    if not scen.active:
        return 0.0, y
    t = _template(inst, scen, "second_stage", math.inf)
    sol = _solve_template(t, x, 0.0)
    y[t.cols] = sol.x
    return float(sol.objective), y


def solve_scenario_lagrangian(inst, mode, delta, x, scen, budget=None, store=None):
    """Optimal primal/dual pair of the scenario problem priced at ``delta``.

    ``budget`` is the default scenario budget; a scenario's own override wins.
    Results are memoised per ``(mode, delta, x, scenario, budget)``, in
    ``store`` when one is given and process-wide otherwise.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if (mode == "facility") != (inst.kind == "facility_location"):
        raise ValueError(f"mode {mode!r} does not match a {inst.kind} instance")
    if not (delta >= 0):
        raise ValueError(f"delta {delta} must be >= 0")
    x = _check_x(inst, x)
    B = float(_budget_of(inst, scen, budget))
    key = (mode, float(delta), x.tobytes(), scen, B)
    if store is not None:
        hit = store.solutions.get(key)
        if hit is None:
            hit = store.solutions[key] = _solve(inst, mode, float(delta), x, scen, B, store.bases)
        return hit
    memo = _memo(inst)
    hit = memo.get(key)
    if hit is not None:
        memo.move_to_end(key)
        return hit
    out = _solve(inst, mode, float(delta), x, scen, B)
    memo[key] = out
    if len(memo) > MEMO_CAP:
        memo.popitem(last=False)
    return out


def _solve(inst, mode, delta, x, scen, B, bases=None):
    m = inst.m
    if not scen.active:
        sol = ScenarioSolution(mode, 0.0, 0.0, 0.0, np.zeros(m), np.zeros(m), first_stage_dual=np.zeros(m))
        if mode == "facility":
            shape = (m, len(inst.clients))
            sol.assign_x, sol.assign_u = np.zeros(shape), np.zeros(shape)
            sol.psi, sol.gamma = np.zeros(0), np.zeros((m, 0))
        return sol
    t = _template(inst, scen, mode, B)
    bkey = (mode, scen, B)
    lp = _solve_template(t, x, delta, None if bases is None else bases.get(bkey))
    if bases is not None:
        bases[bkey] = lp.warm
    k, cols, v, d = t.n_items, t.cols, lp.x, lp.dual
    y, z = np.zeros(m), np.zeros(m)
    if mode == "budget":
        nc = len(cols)
        y[cols], z[cols] = v[:nc], v[nc:2 * nc]
        r = float(v[-1])
        alpha, beta = d[:k].copy(), d[k:2 * k].copy()
        theta = float(-d[2 * k]) if len(d) > 2 * k else 0.0
        w2 = inst.stage2_weights(scen)
        recourse = float(w2 @ (y + z))
        fsd = t.R[:k].T @ (alpha + beta)
        return ScenarioSolution(mode, float(lp.objective), r, recourse, y, z, theta, alpha, beta, fsd, t.items,
                                budget_cost=float(w2 @ y))
    if mode == "robust":
        nc = len(cols)
        y[cols] = v[:nc]
        r = float(v[-1])
        alpha = d[:k].copy()
        theta = float(-d[k]) if len(d) > k else 0.0
        w2 = inst.stage2_weights(scen)
        recourse = float(w2 @ y)
        fsd = t.R[:k].T @ alpha
        return ScenarioSolution(mode, float(lp.objective), r, recourse, y, z, theta, alpha, np.zeros(k), fsd, t.items,
                                budget_cost=recourse)
    # facility
    nf, nx_ = m, m * k
    ax = v[:nx_].reshape(nf, k)
    au = v[nx_:2 * nx_].reshape(nf, k)
    y = v[2 * nx_:2 * nx_ + nf].copy()
    z = v[2 * nx_ + nf:2 * nx_ + 2 * nf].copy()
    r = float(v[-1])
    alpha, psi = d[:k].copy(), d[k:2 * k].copy()
    beta = d[2 * k:2 * k + nx_].reshape(nf, k).copy()
    gamma = d[2 * k + nx_:2 * k + 2 * nx_].reshape(nf, k).copy()
    tail = d[2 * k + 2 * nx_:]
    theta = float(-tail[t.extra.index("total")]) if "total" in t.extra else 0.0
    full_x = np.zeros((nf, len(inst.clients)))
    full_u = np.zeros_like(full_x)
    full_x[:, list(t.items)] = ax
    full_u[:, list(t.items)] = au
    f2 = inst.stage2_weights(scen)
    dist = inst.metric[:, list(t.items)]
    budget_cost = float(f2 @ y + np.sum(dist * ax))
    recourse = float(f2 @ (y + z) + np.sum(dist * (ax + au)))
    fsd = beta.sum(axis=1) + gamma.sum(axis=1)
    return ScenarioSolution(mode, float(lp.objective), r, recourse, y, z, theta, alpha, beta, fsd, t.items,
                            assign_x=full_x, assign_u=full_u, psi=psi, gamma=gamma, budget_cost=budget_cost)


def assemble_subgradient(inst, mode, weighted):
    """Subgradient of ``w1.x + sum_A weight_A g_A(delta; x)`` from scenario duals.

    ``weighted`` is an iterable of ``(weight, ScenarioSolution)``.  Each
    solution carries the per-first-stage-variable dual sum it contributes:
    sum over covered elements of (alpha + beta) in budget mode, alpha alone in
    robust mode, and sum over clients of (beta + Gamma) for facility location.
    """
    d = np.array(inst.w1, dtype=float)
    total = 0.0
    for w, sol in weighted:
        if w < 0:
            raise ValueError("scenario weights must be nonnegative")
        if sol.mode != mode:
            raise ValueError(f"solution from mode {sol.mode!r} passed for mode {mode!r}")
        if sol.first_stage_dual.shape != d.shape:
            raise ValueError("dual family missing for this mode")
        total += w
        d -= w * sol.first_stage_dual
    if total > 1 + 1e-9:
        raise ValueError(f"scenario weights sum to {total}, more than 1")
    return d


def lagrangian_value(inst, mode, delta, x, dist, budget=None):
    """``h(delta; x)``: first-stage cost plus the weighted scenario values.

    Robust mode has first-stage objective ``w1.x`` too; only the scenario
    problems differ.
    """
    x = np.asarray(x, dtype=float)
    val = float(np.asarray(inst.w1) @ x)
    sols = []
    for scen, p in dist:
        s = solve_scenario_lagrangian(inst, mode, delta, x, scen, budget)
        val += p * s.value
        sols.append((p, s))
    return val, sols
