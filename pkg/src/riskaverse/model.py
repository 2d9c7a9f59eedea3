"""Instances, scenarios, scenario distributions and oracles.

A scenario is a frozen value: the active elements (or clients), the stage-II
weight map and an optional budget override.  Two draws that agree on all three
compare and hash equal, which is what frequency counting relies on.
"""

from __future__ import annotations

import json
import logging
import math
import zlib
from dataclasses import dataclass
from functools import cached_property

import networkx as nx
import numpy as np

log = logging.getLogger(__name__)

PROB_SUM_TOL = 1e-12
INFLATION_TOL = 1e-12


class InstanceError(ValueError):
    """Invalid instance or distribution; ``problems`` lists every violation found."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def _sort_token(v):
    return (type(v).__name__, repr(v))


def stream(seed, name, index=0):
    """Independent generator for the named component of a run rooted at ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(zlib.crc32(name.encode()), int(index)))
    return np.random.default_rng(ss)


# -- scenarios ----------------------------------------------------------------

@dataclass(frozen=True)
class Scenario:
    active: frozenset = frozenset()
    w2: tuple = ()
    budget_override: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "active", frozenset(self.active))
        w2 = self.w2.items() if isinstance(self.w2, dict) else self.w2
        items = tuple(sorted(((k, float(v)) for k, v in w2), key=lambda kv: _sort_token(kv[0])))
        object.__setattr__(self, "w2", items)
        if self.budget_override is not None:
            if self.budget_override < 0:
                raise InstanceError(f"scenario budget {self.budget_override} is negative")
            object.__setattr__(self, "budget_override", float(self.budget_override))

    @cached_property
    def weights(self):
        return dict(self.w2)

    @cached_property
    def sort_key(self):
        return (
            len(self.active),
            tuple(sorted(_sort_token(a) for a in self.active)),
            tuple((_sort_token(k), v) for k, v in self.w2),
            -1.0 if self.budget_override is None else self.budget_override,
        )

    @property
    def is_null(self):
        return not self.active


NULL = Scenario()


# -- distributions and oracles ------------------------------------------------

class ScenarioOracle:
    """Sampling access to a scenario distribution.

    Subclasses implement :meth:`draw`.  ``support`` is an
    :class:`ExplicitDistribution` when the distribution is known explicitly,
    otherwise ``None``.
    """

    support = None

    def draw(self, rng):
        raise NotImplementedError

    def sample(self, rng, n):
        return [self.draw(rng) for _ in range(n)]


@dataclass(frozen=True)
class ExplicitDistribution(ScenarioOracle):
    """Finite distribution; duplicate scenarios are merged."""

    entries: tuple

    def __post_init__(self):
        merged = {}
        problems = []
        for scen, p in self.entries:
            p = float(p)
            if not (p >= 0) or not math.isfinite(p):
                problems.append(f"probability {p} is not a nonnegative number")
                continue
            merged[scen] = merged.get(scen, 0.0) + p
        total = math.fsum(merged.values())
        if abs(total - 1.0) > PROB_SUM_TOL:
            problems.append(f"probabilities sum to {total!r}, not 1")
        if problems:
            raise InstanceError(problems)
        ordered = tuple(sorted(merged.items(), key=lambda sp: sp[0].sort_key))
        object.__setattr__(self, "entries", ordered)

    @property
    def support(self):
        return self

    @cached_property
    def _probs(self):
        p = np.array([p for _, p in self.entries])
        return p / p.sum()

    def draw(self, rng):
        return self.entries[rng.choice(len(self.entries), p=self._probs)][0]

    def sample(self, rng, n):
        idx = rng.choice(len(self.entries), size=n, p=self._probs)
        return [self.entries[i][0] for i in idx]

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @classmethod
    def point_mass(cls, scenario=NULL):
        return cls(((scenario, 1.0),))

    def probability(self, pred):
        return math.fsum(p for s, p in self.entries if pred(s))


def enumerate_support(dist):
    """Scenarios with probabilities in canonical order."""
    return list(dist.entries)


@dataclass(frozen=True)
class IndependentOracle(ScenarioOracle):
    """Each item is active independently with probability ``p``.

    Stage-II weights are ``inflation`` times a fixed per-action base weight.
    The support is exponential, so it is not exposed.
    """

    items: tuple
    p: float
    base_weights: tuple = ()
    inflation: float = 1.0

    def draw(self, rng):
        mask = rng.random(len(self.items)) < self.p
        active = [e for e, on in zip(self.items, mask) if on]
        return Scenario(frozenset(active), tuple((k, self.inflation * w) for k, w in self.base_weights))


@dataclass(frozen=True)
class MappedOracle(ScenarioOracle):
    """Applies ``fn`` to every scenario of ``base``."""

    base: ScenarioOracle
    fn: object

    def draw(self, rng):
        return self.fn(self.base.draw(rng))

    def sample(self, rng, n):
        return [self.fn(s) for s in self.base.sample(rng, n)]

    @cached_property
    def _support(self):
        if self.base.support is None:
            return None
        return ExplicitDistribution(tuple((self.fn(s), p) for s, p in self.base.support))

    @property
    def support(self):
        return self._support


# -- parameters ---------------------------------------------------------------

@dataclass(frozen=True)
class RiskParams:
    """Accuracy and risk parameters shared by the solvers.

    ``sample_mode`` is ``"theory"`` or an integer cap on the SAA sample count.
    ``full_support`` replaces every sampling step by the exact explicit
    distribution, which makes a run deterministic.  ``budget=None`` defers to
    the instance default.
    """

    rho: float
    eps: float = 0.3
    gamma: float = 0.05
    kappa: float = 0.5
    delta: float = 0.1
    budget: float | None = None
    sample_mode: object = 5000
    full_support: bool = False
    seed: int = 0

    def __post_init__(self):
        problems = []
        if not (0 < self.rho < 1):
            problems.append(f"rho {self.rho} must lie in (0, 1)")
        if not (self.eps > 0 and self.gamma > 0 and self.kappa > 0):
            problems.append("eps, gamma and kappa must be positive")
        if not (self.eps <= self.kappa < 1):
            problems.append(f"need eps <= kappa < 1, got eps={self.eps}, kappa={self.kappa}")
        if not (self.rho * (1 + self.kappa) < 1):
            problems.append("need rho * (1 + kappa) < 1")
        if not (0 < self.delta < 0.5):
            problems.append(f"delta {self.delta} must lie in (0, 1/2)")
        if self.budget is not None and not (self.budget >= 0):
            problems.append(f"budget {self.budget} must be >= 0")
        if self.sample_mode != "theory" and not (isinstance(self.sample_mode, int) and self.sample_mode >= 1):
            problems.append(f"sample_mode must be 'theory' or a positive count, got {self.sample_mode!r}")
        if problems:
            raise InstanceError(problems)

    def replace(self, **kw):
        from dataclasses import replace

        return replace(self, **kw)


# -- instances ----------------------------------------------------------------

@dataclass(frozen=True)
class SetSpec:
    id: object
    members: tuple
    w1: float
    w2: float | None = None  # default stage-II weight when a scenario omits it


@dataclass(frozen=True, eq=False)
class SetCoverInstance:
    elements: tuple
    sets: tuple
    lam: float = 1.0
    budget: float = math.inf
    assume_cost_floor: bool = False

    kind = "set_cover"

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        object.__setattr__(self, "sets", tuple(self.sets))
        problems = []
        if len(set(self.elements)) != len(self.elements):
            problems.append("duplicate element ids")
        ids = [s.id for s in self.sets]
        if len(set(ids)) != len(ids):
            problems.append("duplicate set ids")
        known = set(self.elements)
        for s in self.sets:
            if not (s.w1 >= 0):
                problems.append(f"set {s.id!r} has negative stage-I weight {s.w1}")
            if s.w2 is not None and not (s.w2 >= 0):
                problems.append(f"set {s.id!r} has negative stage-II weight {s.w2}")
            missing = [e for e in s.members if e not in known]
            if missing:
                problems.append(f"set {s.id!r} references unknown elements {missing}")
        if not (self.lam >= 1):
            problems.append(f"lambda {self.lam} must be >= 1")
        if not (self.budget >= 0):
            problems.append(f"budget {self.budget} must be >= 0")
        if problems:
            raise InstanceError(problems)
        if self.uncoverable:
            log.warning("possibly infeasible: elements %s are in no set", self.uncoverable)

    @property
    def m(self):
        return len(self.sets)

    @property
    def n(self):
        return len(self.elements)

    @cached_property
    def set_ids(self):
        return [s.id for s in self.sets]

    @cached_property
    def set_index(self):
        return {s.id: i for i, s in enumerate(self.sets)}

    @cached_property
    def element_index(self):
        return {e: i for i, e in enumerate(self.elements)}

    @cached_property
    def w1(self):
        return np.array([s.w1 for s in self.sets], dtype=float)

    @cached_property
    def default_w2(self):
        return np.array([s.w1 if s.w2 is None else s.w2 for s in self.sets], dtype=float)

    @cached_property
    def covering_sets(self):
        """element id -> indices of sets containing it."""
        cov = {e: [] for e in self.elements}
        for i, s in enumerate(self.sets):
            for e in s.members:
                cov[e].append(i)
        return cov

    @cached_property
    def uncoverable(self):
        return [e for e, c in self.covering_sets.items() if not c]

    @cached_property
    def member_sets(self):
        return [frozenset(s.members) for s in self.sets]

    def stage2_weights(self, scen):
        w = self.default_w2.copy()
        for k, v in scen.w2:
            w[self.set_index[k]] = v
        return w

    def scenario_budget(self, scen, default=None):
        if scen.budget_override is not None:
            return scen.budget_override
        return self.budget if default is None else default

    def check_scenario(self, scen):
        problems = [f"unknown element {e!r}" for e in scen.active if e not in self.element_index]
        for k, v in scen.w2:
            if k not in self.set_index:
                problems.append(f"unknown set {k!r} in stage-II weights")
                continue
            w1 = self.sets[self.set_index[k]].w1
            if v < 0 or v > self.lam * w1 + INFLATION_TOL * (1 + self.lam * w1):
                problems.append(f"stage-II weight {v} of set {k!r} exceeds lambda * w1 = {self.lam * w1}")
        if problems:
            raise InstanceError(problems)
        return scen

    def first_stage_map(self, x):
        return {sid: float(v) for sid, v in zip(self.set_ids, x)}

    @cached_property
    def cache(self):
        """Per-instance scratch space for LP templates and memoised solves."""
        return {}


@dataclass(frozen=True, eq=False)
class FacilityLocationInstance:
    """Two-stage facility location with 0/1 demands.

    ``metric[i, j]`` is the distance from facility ``i`` to client ``j``.
    Budgets may be ``inf``: ``budget`` bounds the total scenario cost,
    ``budget_facility`` the scenario opening cost and ``budget_assignment``
    the scenario assignment cost.
    """

    facilities: tuple
    f1: np.ndarray
    clients: tuple
    metric: np.ndarray
    lam: float = 1.0
    budget: float = math.inf
    budget_facility: float = math.inf
    budget_assignment: float = math.inf
    f2: np.ndarray | None = None
    assume_cost_floor: bool = False

    kind = "facility_location"

    def __post_init__(self):
        object.__setattr__(self, "facilities", tuple(self.facilities))
        object.__setattr__(self, "clients", tuple(self.clients))
        f1 = np.asarray(self.f1, dtype=float)
        object.__setattr__(self, "f1", f1)
        metric = np.asarray(self.metric, dtype=float)
        object.__setattr__(self, "metric", metric)
        f2 = f1.copy() if self.f2 is None else np.asarray(self.f2, dtype=float)
        object.__setattr__(self, "f2", f2)
        problems = []
        nf, nc = len(self.facilities), len(self.clients)
        if len(set(self.facilities)) != nf or len(set(self.clients)) != nc:
            problems.append("duplicate facility or client ids")
        if f1.shape != (nf,) or f2.shape != (nf,):
            problems.append("one opening cost per facility required")
        elif np.any(f1 < 0) or np.any(f2 < 0):
            problems.append("negative opening cost")
        if metric.shape != (nf, nc):
            problems.append(f"metric has shape {metric.shape}, expected {(nf, nc)}")
        elif np.any(metric < 0) or not np.all(np.isfinite(metric)):
            problems.append("distances must be finite and nonnegative")
        elif nf and nc:
            # c_ij <= c_ij' + c_i'j' + c_i'j for all i, i', j, j'
            hop = np.min(metric[:, None, :] + metric[None, :, :], axis=2)  # i -> j' -> i'
            rhs = np.min(hop[:, :, None] + metric[None, :, :], axis=1)
            worst = float(np.max(metric - rhs))
            if worst > 1e-9 * (1 + float(metric.max())):
                problems.append(f"distances violate the triangle inequality by {worst:.3g}")
        if not (self.lam >= 1):
            problems.append(f"lambda {self.lam} must be >= 1")
        for name in ("budget", "budget_facility", "budget_assignment"):
            if not (getattr(self, name) >= 0):
                problems.append(f"{name} must be >= 0")
        if problems:
            raise InstanceError(problems)

    @property
    def m(self):
        return len(self.facilities)

    @property
    def w1(self):
        return self.f1

    @cached_property
    def set_ids(self):
        return list(self.facilities)

    @cached_property
    def facility_index(self):
        return {f: i for i, f in enumerate(self.facilities)}

    @cached_property
    def client_index(self):
        return {c: j for j, c in enumerate(self.clients)}

    @property
    def multi_budget(self):
        return math.isfinite(self.budget_facility) or math.isfinite(self.budget_assignment)

    def stage2_weights(self, scen):
        w = self.f2.copy()
        for k, v in scen.w2:
            w[self.facility_index[k]] = v
        return w

    def scenario_budget(self, scen, default=None):
        if scen.budget_override is not None:
            return scen.budget_override
        return self.budget if default is None else default

    def min_assignment_cost(self, scen):
        """Cheapest conceivable assignment cost of the scenario's clients."""
        cols = [self.client_index[c] for c in scen.active]
        return float(self.metric[:, cols].min(axis=0).sum()) if cols else 0.0

    def check_scenario(self, scen):
        problems = [f"unknown client {c!r}" for c in scen.active if c not in self.client_index]
        for k, v in scen.w2:
            if k not in self.facility_index:
                problems.append(f"unknown facility {k!r}")
                continue
            f1 = self.f1[self.facility_index[k]]
            if v < 0 or v > self.lam * f1 + INFLATION_TOL * (1 + self.lam * f1):
                problems.append(f"stage-II cost {v} of facility {k!r} exceeds lambda * f1 = {self.lam * f1}")
        if problems:
            raise InstanceError(problems)
        return scen

    def first_stage_map(self, y):
        return {fid: float(v) for fid, v in zip(self.facilities, y)}

    @cached_property
    def cache(self):
        return {}


def draw_scenario(oracle, rng, inst=None):
    """One scenario from ``oracle``; validated against ``inst`` when given."""
    scen = oracle.draw(rng)
    return inst.check_scenario(scen) if inst is not None else scen


# -- JSON documents -----------------------------------------------------------

def _num(v):
    if isinstance(v, str) and v.lower() in ("inf", "infinity"):
        return math.inf
    return float(v)


def _ident(v):
    # JSON turns tuple ids (edges, terminal pairs) into lists; restore them
    return tuple(_ident(a) for a in v) if isinstance(v, list) else v


def _weights_from_doc(w2):
    if isinstance(w2, list):
        return {_ident(k): _num(v) for k, v in w2}
    return {k: _num(v) for k, v in w2.items()}


def _weights_to_doc(w2):
    w2 = dict(w2)
    if all(isinstance(k, str) for k in w2):
        return w2
    return [[k, v] for k, v in sorted(w2.items(), key=lambda kv: _sort_token(kv[0]))]


def _distribution_from_doc(doc, inst):
    spec = doc.get("distribution")
    if spec is None:
        return ExplicitDistribution.point_mass()
    kind = spec.get("kind")
    if kind == "explicit":
        entries = []
        for s in spec["scenarios"]:
            scen = Scenario(frozenset(_ident(a) for a in s.get("active", [])),
                            _weights_from_doc(s.get("w2", {})), s.get("budget"))
            entries.append((inst.check_scenario(scen), s["p"]))
        return ExplicitDistribution(tuple(entries))
    if kind == "generator":
        from .generators import oracle_from_generator

        return oracle_from_generator(inst, spec["name"], spec.get("params", {}), spec.get("seed", 0))
    raise InstanceError(f"unknown distribution kind {kind!r}")


def load_problem(text):
    """Parse an instance document; returns ``(instance, oracle)``."""
    if isinstance(text, (str, bytes)):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InstanceError(f"parse error: {exc}") from exc
    else:
        doc = text
    kind = doc.get("type", "set_cover")
    try:
        if kind == "set_cover":
            sets = tuple(
                SetSpec(_ident(s["id"]), tuple(_ident(e) for e in s.get("members", [])), _num(s["w1"]),
                        None if s.get("w2") is None else _num(s["w2"]))
                for s in doc["sets"]
            )
            inst = SetCoverInstance(
                tuple(_ident(e) for e in doc["elements"]), sets, _num(doc.get("lambda", 1.0)),
                _num(doc.get("budget", math.inf)), bool(doc.get("assume_cost_floor", False)),
            )
        elif kind == "facility_location":
            facs = doc["facilities"]
            budgets = doc.get("budgets", {})
            inst = FacilityLocationInstance(
                tuple(f["id"] for f in facs),
                np.array([_num(f["f1"]) for f in facs]),
                tuple(doc["clients"]),
                np.array(doc["metric"], dtype=float),
                lam=_num(doc.get("lambda", 1.0)),
                budget=_num(budgets.get("total", doc.get("budget", math.inf))),
                budget_facility=_num(budgets.get("facility", math.inf)),
                budget_assignment=_num(budgets.get("assignment", math.inf)),
                f2=np.array([_num(f.get("f2", f["f1"])) for f in facs]),
                assume_cost_floor=bool(doc.get("assume_cost_floor", False)),
            )
        else:
            raise InstanceError(f"unknown instance type {kind!r}")
    except (KeyError, TypeError) as exc:
        raise InstanceError(f"parse error: missing or malformed field {exc}") from exc
    return inst, _distribution_from_doc(doc, inst)


def load_instance(text):
    return load_problem(text)[0]


def _json_num(v):
    return "inf" if v == math.inf else v


def dump_problem(inst, dist=None, generator=None):
    """Inverse of :func:`load_problem` for explicit distributions or generator specs."""
    if inst.kind == "set_cover":
        doc = {
            "type": "set_cover",
            "elements": list(inst.elements),
            "sets": [
                {"id": s.id, "members": list(s.members), "w1": s.w1, **({} if s.w2 is None else {"w2": s.w2})}
                for s in inst.sets
            ],
            "lambda": inst.lam,
            "budget": _json_num(inst.budget),
        }
    else:
        doc = {
            "type": "facility_location",
            "facilities": [{"id": f, "f1": float(a), "f2": float(b)} for f, a, b in zip(inst.facilities, inst.f1, inst.f2)],
            "clients": list(inst.clients),
            "metric": inst.metric.tolist(),
            "lambda": inst.lam,
            "budgets": {
                "total": _json_num(inst.budget),
                "facility": _json_num(inst.budget_facility),
                "assignment": _json_num(inst.budget_assignment),
            },
        }
    if inst.assume_cost_floor:
        doc["assume_cost_floor"] = True
    if generator is not None:
        doc["distribution"] = {"kind": "generator", **generator}
    elif dist is not None:
        if not isinstance(dist, ExplicitDistribution):
            if dist.support is None:
                raise ValueError("only explicit distributions or generator specs can be written")
            dist = dist.support
        doc["distribution"] = {
            "kind": "explicit",
            "scenarios": [
                {"active": sorted(s.active, key=_sort_token), "w2": _weights_to_doc(s.w2), "p": p,
                 **({} if s.budget_override is None else {"budget": s.budget_override})}
                for s, p in dist
            ],
        }
    return doc


# -- reductions ---------------------------------------------------------------

def _edge(u, v):
    return tuple(sorted((u, v), key=_sort_token))


def reduce_vertex_cover(vertex_weights, edges, oracle, lam=1.0, budget=math.inf):
    """Vertex cover as set cover: elements are edges, a vertex covers its incident edges.

    ``oracle`` yields scenarios whose ``active`` items are ``(u, v)`` edges and
    whose stage-II weights are keyed by vertex.
    """
    edges = [_edge(u, v) for u, v in edges]
    bad = [e for e in edges if e[0] not in vertex_weights or e[1] not in vertex_weights]
    if bad:
        raise InstanceError(f"edges {bad} have endpoints outside the vertex set")
    members = {v: [] for v in vertex_weights}
    for e in edges:
        members[e[0]].append(e)
        members[e[1]].append(e)
    inst = SetCoverInstance(
        tuple(edges),
        tuple(SetSpec(v, tuple(members[v]), float(w)) for v, w in vertex_weights.items()),
        lam, budget,
    )
    known = set(edges)

    def to_cover(scen):
        active = frozenset(_edge(u, v) for u, v in scen.active)
        if not active <= known:
            raise InstanceError(f"scenario edges {sorted(active - known)} are not graph edges")
        return Scenario(active, scen.w2, scen.budget_override)

    return inst, MappedOracle(oracle, to_cover)


def reduce_tree_multicut(tree_edges, oracle, pairs=None, lam=1.0, budget=math.inf):
    """Multicut on a tree as set cover: elements are terminal pairs, sets are tree edges.

    ``tree_edges`` holds ``(u, v, w1)``; an edge covers a pair when it lies on
    the pair's unique tree path.  ``pairs`` is the universe of pairs; it
    defaults to the pairs seen in the oracle's explicit support.
    """
    g = nx.Graph()
    for u, v, _ in tree_edges:
        g.add_edge(u, v)
    if g.number_of_nodes() and not nx.is_tree(g):
        raise InstanceError("edge list is not a tree")
    if pairs is None:
        if oracle.support is None:
            raise InstanceError("pair universe required for a black-box pair distribution")
        pairs = {pr for s, _ in oracle.support for pr in s.active}
    canon = []
    for s, t in pairs:
        if s == t:
            raise InstanceError(f"degenerate pair ({s!r}, {t!r})")
        if s not in g or t not in g:
            raise InstanceError(f"pair ({s!r}, {t!r}) has a terminal outside the tree")
        canon.append(_edge(s, t))
    canon = sorted(set(canon), key=_sort_token)
    members = {_edge(u, v): [] for u, v, _ in tree_edges}
    for pr in canon:
        path = nx.shortest_path(g, pr[0], pr[1])
        for a, b in zip(path, path[1:]):
            members[_edge(a, b)].append(pr)
    inst = SetCoverInstance(
        tuple(canon),
        tuple(SetSpec(_edge(u, v), tuple(members[_edge(u, v)]), float(w)) for u, v, w in tree_edges),
        lam, budget,
    )
    known = set(canon)

    def to_cover(scen):
        active = set()
        for s, t in scen.active:
            if s == t:
                raise InstanceError(f"degenerate pair ({s!r}, {t!r})")
            active.add(_edge(s, t))
        if not active <= known:
            raise InstanceError(f"pairs {sorted(active - known, key=_sort_token)} not in the pair universe")
        w2 = tuple((_edge(*k), v) for k, v in scen.w2)
        return Scenario(frozenset(active), w2, scen.budget_override)

    return inst, MappedOracle(oracle, to_cover)
