"""Sample average approximation of the Lagrangian problem for a fixed delta.

The sampled problem ``min_x w1.x + sum_A phat_A g_A(delta; x)`` over the unit
box is written as one LP with the first-stage variables shared by one block
per distinct sampled scenario.  The block structure does not depend on delta,
so an :class:`AggregateLp` is built once per empirical distribution and
re-solved from the previous basis as delta moves along the grid.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .model import ExplicitDistribution
from .scenario_lp import ScenarioInfeasible, _template
from .simplex import LpProblem, SimplexError, solve_lp

log = logging.getLogger(__name__)

DEFAULT_CAP = 5000
_HUGE = 1e15


@dataclass(frozen=True)
class SaaConfig:
    """Constants of the sample-size bound for one delta.

    ``K`` is the Lipschitz bound of the Lagrangian in ``x``; ``R`` and ``V``
    are the radii of balls containing and contained in the unit box.
    """

    eps_bar: float
    eta: float
    zeta: float
    delta: float          # failure probability
    K: float
    m: int
    lam: float = 1.0
    robust: bool = False
    sample_mode: object = DEFAULT_CAP

    def __post_init__(self):
        for name in ("eps_bar", "eta", "zeta", "delta", "K"):
            if not (getattr(self, name) > 0):
                raise ValueError(f"{name} must be positive")
        if self.m < 1:
            raise ValueError("need at least one first-stage variable")

    @property
    def R(self):
        return math.sqrt(self.m)

    @property
    def V(self):
        return 0.5

    @property
    def tau(self):
        return self.zeta / 6

    @property
    def N(self):
        return max(1, math.ceil(math.log2(2 * self.K * self.R / (self.V * self.tau))))

    @classmethod
    def for_delta(cls, inst, params, lagrange_delta, robust=False, eps_bar=None, eta=None, zeta=None):
        """Configuration used by the risk search at multiplier ``lagrange_delta``."""
        w1 = np.asarray(inst.w1, dtype=float)
        norm = float(np.linalg.norm(w1))
        K = (norm if robust else inst.lam * norm) + lagrange_delta
        return cls(
            eps_bar=params.eps / 6 if eps_bar is None else eps_bar,
            eta=params.rho * params.kappa / 16 if eta is None else eta,
            zeta=params.gamma / 4 if zeta is None else zeta,
            delta=params.delta,
            K=max(K, 1e-12),
            m=inst.m,
            lam=inst.lam,
            robust=robust,
            sample_mode=params.sample_mode,
        )


@dataclass(frozen=True)
class SampleSize:
    count: int
    theory: float
    capped: bool


def log_net_size(cfg):
    """Upper bound on ln|G_tau| for the extended net of the unit box."""
    N, m = cfg.N, cfg.m
    return m * math.log(3 * cfg.K * cfg.R * N * math.sqrt(m) / cfg.tau) + math.log(N + 1) + 2


def theory_sample_size(cfg):
    """Scenario count sufficient for the SAA guarantee at one delta.

    Robust mode drops the ``4 lambda / eps`` term, so its count does not depend
    on ``lambda``.  In capped mode the count is ``min(theory, cap)``.
    """
    lead = cfg.m / cfg.eta if cfg.robust else 4 * cfg.lam / cfg.eps_bar + cfg.m / cfg.eta
    log_term = math.log(2 * cfg.m / cfg.delta) + log_net_size(cfg)
    theory = 8 * cfg.N ** 2 * lead ** 2 * log_term
    if cfg.sample_mode == "theory":
        if not math.isfinite(theory) or theory > _HUGE:
            log.warning("theoretical sample count %.3g overflows; capping at %d", theory, int(_HUGE))
            return SampleSize(int(_HUGE), theory, True)
        return SampleSize(math.ceil(theory), theory, False)
    cap = int(cfg.sample_mode)
    if theory > cap:
        log.info("theoretical sample count %.3g capped at %d", theory, cap)
        return SampleSize(cap, theory, True)
    return SampleSize(math.ceil(theory), theory, False)


def build_empirical(samples):
    """Empirical distribution of a nonempty list of scenarios."""
    if not samples:
        raise ValueError("need at least one sample")
    counts = Counter(samples)
    n = len(samples)
    entries = [(s, c / n) for s, c in counts.items()]
    # renormalise so the sum is 1 to the last bit
    total = math.fsum(p for _, p in entries)
    return ExplicitDistribution(tuple((s, p / total) for s, p in entries))


class AggregateLp:
    """The sampled Lagrangian problem for one empirical distribution and mode.

    Variables are ``x`` in the unit box followed by one scenario block per
    distinct scenario.  :meth:`solve` changes only the cost of the ``r``
    variables, so successive solves reuse the previous optimal basis.
    """

    def __init__(self, inst, dist, mode, budget=None):
        self.inst, self.dist, self.mode = inst, dist, mode
        m = inst.m
        blocks = []
        for scen, p in dist:
            if not scen.active:
                continue
            B = scen.budget_override if scen.budget_override is not None else (inst.budget if budget is None else budget)
            blocks.append((scen, p, _template(inst, scen, mode, float(B))))
        n = m + sum(t.lp.n_vars for _, _, t in blocks)
        rows = sum(t.lp.n_rows for _, _, t in blocks)
        A = np.zeros((rows, n))
        b = np.zeros(rows)
        c = np.zeros(n)
        c[:m] = inst.w1
        rel = []
        lo = np.zeros(n)
        hi = np.full(n, np.inf)
        hi[:m] = 1.0
        r_cols, offsets = [], []
        row = col = 0
        col = m
        for scen, p, t in blocks:
            k, nv = t.lp.n_rows, t.lp.n_vars
            A[row:row + k, col:col + nv] = t.lp.A
            A[row:row + k, :m] = t.R
            b[row:row + k] = t.lp.b
            c[col:col + nv] = p * t.lp.c
            rel.extend(t.lp.rel)
            r_cols.append(col + t.r_var)
            offsets.append(col)
            row += k
            col += nv
        self.blocks = blocks
        self.r_cols = np.array(r_cols, dtype=int)
        self.weights = np.array([p for _, p, _ in blocks])
        self.offsets = offsets
        self.lp = LpProblem(c=c, A=A, rel=tuple(rel), b=b, lo=lo, hi=hi)
        self._warm = None

    def solve(self, lagrange_delta):
        c = self.lp.c.copy()
        c[self.r_cols] = self.weights * lagrange_delta
        sol = solve_lp(self.lp.with_objective(c), warm=self._warm)
        if sol.status == "infeasible":
            raise ScenarioInfeasible("a sampled scenario cannot be covered")
        if not sol.optimal:
            raise SimplexError(f"aggregate LP ended {sol.status}")
        self._warm = sol.warm
        return sol

    def block_r(self, sol):
        return sol.x[self.r_cols]


@dataclass
class SaaResult:
    x: np.ndarray
    value: float               # hhat(delta; x)
    empirical: ExplicitDistribution
    sample_size: SampleSize | None


def draw_samples(oracle, rng, n, inst=None):
    samples = oracle.sample(rng, n)
    if inst is not None:
        for s in set(samples):
            inst.check_scenario(s)
    return samples


def sa_alg(inst, oracle, mode, lagrange_delta, cfg=None, rng=None, empirical=None, budget=None):
    """Minimise the sampled Lagrangian at ``lagrange_delta``.

    Pass ``empirical`` to reuse an existing empirical distribution (or the
    exact one, for full-support runs); otherwise ``cfg`` fixes the sample
    count and ``rng`` the draws.
    """
    size = None
    if empirical is None:
        if cfg is None or rng is None:
            raise ValueError("need either an empirical distribution or (cfg, rng)")
        size = theory_sample_size(cfg)
        empirical = build_empirical(draw_samples(oracle, rng, size.count, inst))
    agg = AggregateLp(inst, empirical, mode, budget)
    sol = agg.solve(lagrange_delta)
    x = np.clip(sol.x[: inst.m], 0.0, 1.0)
    return SaaResult(x, float(sol.objective), empirical, size)
