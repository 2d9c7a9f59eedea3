"""Rounding fractional first-stage solutions to integer ones.

Covering problems: scale the fractional ``x``, let stage I take responsibility
for every element with scaled coverage at least 1/2 and cover those with the
greedy algorithm, and cover what a scenario leaves over with greedy again.

Facility location: filtering and greedy clustering (parameter ``gamma``),
which opens facilities of cost at most ``F / gamma`` and assigns every client
within ``3 / (1 - gamma)`` of its fractional assignment cost.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HALF = 0.5


class UncoverableError(ValueError):
    """Some element lies in no available set."""


def scale_first_stage(x, eps_r):
    """``min(1, (1 + 1/eps_r) x)`` componentwise."""
    if not eps_r > 0:
        raise ValueError("eps_r must be positive")
    return np.minimum(1.0, (1.0 + 1.0 / eps_r) * np.asarray(x, dtype=float))


def harmonic(n):
    return float(np.sum(1.0 / np.arange(1, n + 1))) if n > 0 else 0.0


def greedy_set_cover(universe, sets, weights):
    """Weighted greedy cover: repeatedly take the set of least weight per newly covered element.

    ``sets`` is a sequence of ``(id, members)``; ties go to the earlier set.
    Returns the chosen ids in pick order.
    """
    todo = set(universe)
    avail = [(sid, frozenset(mem) & todo, float(w)) for (sid, mem), w in zip(sets, weights)]
    missing = todo - set().union(*(m for _, m, _ in avail)) if avail else todo
    if missing:
        raise UncoverableError(f"elements {sorted(map(repr, missing))} lie in no set")
    chosen = []
    while todo:
        best, best_ratio = None, np.inf
        for t, (sid, mem, w) in enumerate(avail):
            k = len(mem & todo)
            if k and w / k < best_ratio:
                best, best_ratio = t, w / k
        sid, mem, _ = avail[best]
        chosen.append(sid)
        todo -= mem
    return chosen


@dataclass
class IntegerCover:
    """Integer stage-I sets plus a greedy recourse rule for any scenario."""

    inst: object
    stage1: list          # set ids
    responsible: frozenset  # elements stage I promised to cover

    @property
    def stage1_mask(self):
        ids = set(self.stage1)
        return np.array([sid in ids for sid in self.inst.set_ids], dtype=bool)

    @property
    def stage1_cost(self):
        return float(np.asarray(self.inst.w1)[self.stage1_mask].sum())

    def covered(self):
        out = set()
        for s in self.stage1:
            out |= self.inst.member_sets[self.inst.set_index[s]]
        return out

    def recourse(self, scen):
        """Greedy stage-II sets covering what stage I leaves of ``scen``; returns ``(ids, cost)``."""
        left = set(scen.active) - self.covered()
        if not left:
            return [], 0.0
        inst = self.inst
        w2 = inst.stage2_weights(scen)
        ids = greedy_set_cover(left, [(s.id, s.members) for s in inst.sets], w2)
        return ids, float(sum(w2[inst.set_index[i]] for i in ids))


def round_integer_cover(inst, x_hat):
    """Stage I covers the elements whose scaled coverage is at least 1/2.

    ``2 x_hat`` is a fractional cover of those elements, so the greedy cover
    costs at most ``2 H_n w1.x_hat``.
    """
    x_hat = np.asarray(x_hat, dtype=float)
    coverage = {e: float(sum(x_hat[s] for s in inst.covering_sets[e])) for e in inst.elements}
    responsible = frozenset(e for e, c in coverage.items() if c >= HALF - 1e-12)
    ids = greedy_set_cover(responsible, [(s.id, s.members) for s in inst.sets], inst.w1) if responsible else []
    return IntegerCover(inst, ids, responsible)


# -- facility location --------------------------------------------------------

@dataclass
class StaResult:
    opened: list               # facility indices
    assignment: dict           # client index -> facility index
    centers: list              # cluster centres in processing order
    facility_cost: float
    assignment_cost: dict      # client index -> distance paid

    @property
    def total(self):
        return self.facility_cost + sum(self.assignment_cost.values())


def sta_round_fl(assign, open_frac, metric, costs, clients=None, gamma=0.25, tol=1e-9):
    """Filter-and-cluster rounding of a fractional facility-location solution.

    ``assign[i, j]`` is client ``j``'s fractional assignment to facility ``i``
    and ``open_frac[i]`` the fractional opening; ``clients`` restricts the
    rounding to a subset of columns.  Each client's ball holds the facilities
    within ``C_j / (1 - gamma)`` it uses, which carry mass at least ``gamma``.
    Clients are processed by increasing radius; a centre opens the cheapest
    facility of its ball and absorbs every client whose ball meets it.
    Finally every client goes to its nearest open facility.
    """
    assign = np.asarray(assign, dtype=float)
    open_frac = np.asarray(open_frac, dtype=float)
    metric = np.asarray(metric, dtype=float)
    costs = np.asarray(costs, dtype=float)
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    if clients is None:
        clients = range(assign.shape[1])
    clients = list(clients)
    for j in clients:
        if assign[:, j].sum() < 1 - 1e-7:
            raise ValueError(f"client {j} is assigned mass {assign[:, j].sum():.6g} < 1")
        if np.any(assign[:, j] > open_frac + 1e-7):
            raise ValueError(f"client {j} uses a facility beyond its opening")
    C = {j: float(metric[:, j] @ assign[:, j]) for j in clients}
    L = {j: C[j] / (1 - gamma) for j in clients}
    ball = {j: frozenset(np.flatnonzero((assign[:, j] > tol) & (metric[:, j] <= L[j] + tol)).tolist()) for j in clients}
    order = sorted(clients, key=lambda j: (L[j], j))
    clustered = set()
    opened, centers = [], []
    for j in order:
        if j in clustered:
            continue
        centers.append(j)
        cheapest = min(ball[j], key=lambda i: (costs[i], i))
        if cheapest not in opened:
            opened.append(cheapest)
        for k in order:
            if k not in clustered and ball[k] & ball[j]:
                clustered.add(k)
    assignment, paid = {}, {}
    for j in clients:
        i = min(opened, key=lambda f: (metric[f, j], f))
        assignment[j] = i
        paid[j] = float(metric[i, j])
    return StaResult(sorted(opened), assignment, centers, float(costs[opened].sum()), paid)
