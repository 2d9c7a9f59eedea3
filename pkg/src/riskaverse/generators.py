"""Deterministic instance families.

Every generator takes a seed (where randomness is involved) and returns
``(instance, distribution)``; :func:`generate_document` wraps the result as a
JSON-ready instance document.
"""

from __future__ import annotations

import math

import numpy as np

from .model import (
    ExplicitDistribution,
    FacilityLocationInstance,
    IndependentOracle,
    InstanceError,
    Scenario,
    SetCoverInstance,
    SetSpec,
    dump_problem,
    reduce_tree_multicut,
    stream,
)


def _probabilities(rng, k):
    counts = rng.integers(1, 20, size=k).astype(float)
    return counts / counts.sum()


def random_set_cover(m=6, n=5, seed=0, support=4, lam=2.0, budget_scale=0.6, null_mass=True):
    """Random set system with an explicit scenario distribution.

    Every element lies in at least one set.  Stage-II weights inflate each set's
    stage-I weight by a per-scenario factor in ``[1, lam]``.  The budget is
    ``budget_scale`` times the average full-recourse cost of the scenarios.
    """
    rng = stream(seed, "gen.random")
    elements = tuple(f"e{i}" for i in range(n))
    members = [set() for _ in range(m)]
    for s in range(m):
        for e in range(n):
            if rng.random() < 0.4:
                members[s].add(e)
    for e in range(n):
        if not any(e in mem for mem in members):
            members[int(rng.integers(m))].add(e)
    w1 = np.round(rng.uniform(0.5, 2.0, size=m), 2)
    sets = tuple(SetSpec(f"S{s}", tuple(elements[e] for e in sorted(members[s])), float(w1[s])) for s in range(m))
    scen = []
    seen = set()
    while len(scen) < support - int(null_mass):
        active = frozenset(elements[e] for e in range(n) if rng.random() < 0.5)
        if not active or active in seen:
            if len(seen) >= 2 ** n - 1:
                break
            continue
        seen.add(active)
        infl = np.round(rng.uniform(1.0, lam, size=m), 2)
        scen.append(Scenario(active, {sets[s].id: float(w1[s] * infl[s]) for s in range(m)}))
    if null_mass:
        scen.append(Scenario())
    probs = _probabilities(rng, len(scen))
    probe = SetCoverInstance(elements, sets, lam)
    full = [sum(probe.stage2_weights(a)[s] for s in range(m) if probe.member_sets[s] & a.active) for a in scen]
    budget = round(budget_scale * float(np.mean([f for f in full if f > 0] or [1.0])), 3)
    inst = SetCoverInstance(elements, sets, lam, budget)
    return inst, ExplicitDistribution(tuple(zip(scen, probs)))


def lb1(B=12.0, rho=0.1, kappa=0.02, p_a2=0.0, eps=None, gamma=None):
    """Three-element instance that separates small from moderate ``p(A2)``.

    Sets are singletons with stage-I weight ``B``; stage-II weights are
    ``(0, 2B/3, 2B/3)``.  Scenarios: the empty one, ``{e1, e2, e3}`` with
    probability ``rho - kappa`` and ``{e2, e3}`` with probability ``p_a2``.
    When ``eps``/``gamma`` are given the construction's preconditions
    ``B >= 6 gamma`` and ``rho <= 1/(8(1+eps))`` are enforced.
    """
    problems = []
    if not (0 < kappa < 0.25):
        problems.append("kappa must lie in (0, 1/4)")
    if not (kappa <= rho):
        problems.append("need kappa <= rho so that p(A1) >= 0")
    if gamma is not None and B < 6 * gamma:
        problems.append("need B >= 6 gamma")
    if eps is not None and rho > 1 / (8 * (1 + eps)):
        problems.append("need rho <= 1/(8(1+eps))")
    if p_a2 < 0 or rho - kappa + p_a2 > 1:
        problems.append("scenario probabilities out of range")
    if problems:
        raise InstanceError(problems)
    elements = ("e1", "e2", "e3")
    w2 = {"S1": 0.0, "S2": 2 * B / 3, "S3": 2 * B / 3}
    sets = tuple(SetSpec(f"S{i}", (f"e{i}",), float(B), w2[f"S{i}"]) for i in (1, 2, 3))
    inst = SetCoverInstance(elements, sets, 1.0, float(B))
    a1 = Scenario({"e1", "e2", "e3"}, w2)
    a2 = Scenario({"e2", "e3"}, w2)
    p1 = rho - kappa
    entries = [(Scenario(), 1.0 - p1 - p_a2), (a1, p1)]
    if p_a2 > 0:
        entries.append((a2, p_a2))
    return inst, ExplicitDistribution(tuple(entries))


def star_multicut(leaves=3, seed=0, weight=1.0):
    """Star with all leaf pairs as terminal pairs, each pair equally likely alone."""
    tree = [("c", f"l{i}", weight) for i in range(leaves)]
    pairs = [(f"l{i}", f"l{j}") for i in range(leaves) for j in range(i + 1, leaves)]
    dist = ExplicitDistribution(tuple((Scenario({pr}), 1.0 / len(pairs)) for pr in pairs))
    return reduce_tree_multicut(tree, dist, lam=2.0)


def path_multicut(length=4, seed=0):
    """Path ``v0 - ... - v_length`` with random edge weights and random pair scenarios."""
    rng = stream(seed, "gen.path")
    nodes = [f"v{i}" for i in range(length + 1)]
    tree = [(nodes[i], nodes[i + 1], float(np.round(rng.uniform(0.5, 2.0), 2))) for i in range(length)]
    pairs = [(nodes[i], nodes[j]) for i in range(len(nodes)) for j in range(i + 1, len(nodes))]
    k = min(4, len(pairs))
    picks = rng.choice(len(pairs), size=k, replace=False)
    scen = [Scenario({pairs[int(t)]}) for t in picks] + [Scenario()]
    dist = ExplicitDistribution(tuple(zip(scen, _probabilities(rng, len(scen)))))
    return reduce_tree_multicut(tree, dist, lam=2.0)


def grid_fl(rows=2, cols=2, seed=0, support=3, lam=2.0, budget=math.inf, n_clients=None):
    """Facility location on grid points with Manhattan distances.

    Facilities sit on the grid; clients sit on random grid points, so the
    bipartite distances come from one metric and satisfy the triangle
    inequality.
    """
    rng = stream(seed, "gen.grid_fl")
    pts = np.array([(r, c) for r in range(rows) for c in range(cols)], dtype=float)
    nf = len(pts)
    nc = nf if n_clients is None else n_clients
    cpts = pts[rng.integers(nf, size=nc)] + rng.integers(0, 2, size=(nc, 2)) * 0.5
    metric = np.abs(pts[:, None, :] - cpts[None, :, :]).sum(axis=2)
    f1 = np.round(rng.uniform(1.0, 3.0, size=nf), 2)
    facilities = tuple(f"F{i}" for i in range(nf))
    clients = tuple(f"c{j}" for j in range(nc))
    inst = FacilityLocationInstance(facilities, f1, clients, metric, lam=lam, budget=budget)
    scen, seen = [], set()
    while len(scen) < support - 1:
        active = frozenset(clients[j] for j in range(nc) if rng.random() < 0.5)
        if not active or active in seen:
            if len(seen) >= 2 ** nc - 1:
                break
            continue
        seen.add(active)
        infl = np.round(rng.uniform(1.0, lam, size=nf), 2)
        scen.append(Scenario(active, {facilities[i]: float(f1[i] * infl[i]) for i in range(nf)}))
    scen.append(Scenario())
    return inst, ExplicitDistribution(tuple(zip(scen, _probabilities(rng, len(scen)))))


def random_fl(n_fac=5, n_clients=8, seed=0, support=3, lam=2.0, budget=math.inf):
    """Random points in the unit square; Euclidean distances."""
    rng = stream(seed, "gen.random_fl")
    fp = rng.random((n_fac, 2))
    cp = rng.random((n_clients, 2))
    metric = np.linalg.norm(fp[:, None, :] - cp[None, :, :], axis=2)
    f1 = np.round(rng.uniform(0.2, 1.0, size=n_fac), 3)
    facilities = tuple(f"F{i}" for i in range(n_fac))
    clients = tuple(f"c{j}" for j in range(n_clients))
    inst = FacilityLocationInstance(facilities, f1, clients, metric, lam=lam, budget=budget)
    scen = []
    for _ in range(support - 1):
        active = frozenset(clients[j] for j in range(n_clients) if rng.random() < 0.5) or frozenset({clients[0]})
        infl = np.round(rng.uniform(1.0, lam, size=n_fac), 2)
        scen.append(Scenario(active, {facilities[i]: float(f1[i] * infl[i]) for i in range(n_fac)}))
    scen.append(Scenario())
    return inst, ExplicitDistribution(tuple(zip(scen, _probabilities(rng, len(scen)))))


FAMILIES = {
    "random": random_set_cover,
    "lb1": lb1,
    "star": star_multicut,
    "path": path_multicut,
    "grid_fl": grid_fl,
    "random_fl": random_fl,
}


def generate(family, **params):
    if family not in FAMILIES:
        raise InstanceError(f"unknown family {family!r}; known: {sorted(FAMILIES)}")
    return FAMILIES[family](**params)


def generate_document(family, **params):
    inst, dist = generate(family, **params)
    return dump_problem(inst, dist)


def oracle_from_generator(inst, name, params, seed):
    """Black-box oracle named in an instance document's distribution block."""
    if name != "independent":
        raise InstanceError(f"unknown scenario generator {name!r}")
    p = float(params.get("p", 0.5))
    infl = float(params.get("inflation", 1.0))
    if not (0 <= p <= 1):
        raise InstanceError("generator probability must lie in [0, 1]")
    if infl > inst.lam:
        raise InstanceError(f"inflation {infl} exceeds lambda {inst.lam}")
    if inst.kind == "set_cover":
        items, base = inst.elements, tuple((s.id, s.w1) for s in inst.sets)
    else:
        items, base = inst.clients, tuple(zip(inst.facilities, map(float, inst.f1)))
    return IndependentOracle(tuple(items), p, base, infl)
