"""Sample-complexity experiments.

``coin_experiment`` measures how often the zero-heads rule misclassifies a
coin with bias ``q = 0`` versus ``q = 2 varrho + xi`` from ``N`` tosses.
``lower_bound_demo`` runs the multiplier search on the two arms of the
three-element instance from :func:`generators.lb1` and, with a tiny sample
budget, counts how often the sampled run on the second arm looks like the
first arm's answer.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .generators import lb1
from .model import ExplicitDistribution, RiskParams, stream
from .risk_search import RiskSearchError, risk_alg


def coin_threshold(varrho, delta):
    """``ln(1/delta - 1) / (4 varrho)`` tosses."""
    if not (0 < varrho < 0.25):
        raise ValueError("varrho must lie in (0, 1/4)")
    if not (0 < delta < 0.5):
        raise ValueError("delta must lie in (0, 1/2)")
    return math.log(1 / delta - 1) / (4 * varrho)


@dataclass
class CoinRow:
    tosses: int
    error_fair: float      # arm q = 0: says "q > varrho"
    error_biased: float    # arm q = 2 varrho + xi: says "q <= varrho"

    @property
    def worst(self):
        return max(self.error_fair, self.error_biased)


@dataclass
class CoinTable:
    varrho: float
    delta: float
    xi: float
    trials: int
    threshold: float
    rows: list = field(default_factory=list)

    def to_dict(self):
        return {
            "varrho": self.varrho, "delta": self.delta, "xi": self.xi, "trials": self.trials,
            "threshold": self.threshold, "threshold_tosses": math.ceil(self.threshold),
            "rows": [{"tosses": r.tosses, "error_fair": r.error_fair, "error_biased": r.error_biased,
                      "worst": r.worst} for r in self.rows],
        }


def coin_experiment(varrho, delta, trials=10_000, sample_counts=None, xi=0.01, seed=0):
    """Worst-arm error of the zero-heads rule for each toss count.

    Default counts are the rounded-up threshold and a quarter of it.
    """
    thr = coin_threshold(varrho, delta)
    q_hi = 2 * varrho + xi
    if not q_hi < 1:
        raise ValueError("2 varrho + xi must be below 1")
    if sample_counts is None:
        sample_counts = [math.ceil(thr), max(1, math.floor(thr / 4))]
    table = CoinTable(varrho, delta, xi, trials, thr)
    for t, n in enumerate(sample_counts):
        rng = stream(seed, "coin", t)
        heads_fair = rng.binomial(n, 0.0, size=trials)
        heads_biased = rng.binomial(n, q_hi, size=trials)
        table.rows.append(CoinRow(int(n), float(np.mean(heads_fair > 0)), float(np.mean(heads_biased == 0))))
    return table


# -- the two-arm instance -----------------------------------------------------

def _arm_output(x):
    x = np.asarray(x, dtype=float)
    return {"sum_x": float(x.sum()), "x_s2_s3": float(x[1] + x[2]), "x": x.tolist()}


@dataclass
class LowerBoundReport:
    params: dict
    arm_small: dict         # p(A2) = 0
    arm_large: dict         # p(A2) = 3 kappa
    sample_budget: int
    trials: int
    confusion_rate: float
    failures: int
    distinct_runs: int

    @property
    def small_ok(self):
        return self.arm_small.get("sum_x", math.inf) <= 1 / 3 + 1e-9

    @property
    def large_ok(self):
        return self.arm_large.get("x_s2_s3", -math.inf) >= 0.5 - 1e-9

    def to_dict(self):
        return {
            "params": self.params, "arm_small": self.arm_small, "arm_large": self.arm_large,
            "small_arm_structure_holds": self.small_ok, "large_arm_structure_holds": self.large_ok,
            "sample_budget": self.sample_budget, "trials": self.trials,
            "confusion_rate": self.confusion_rate, "failures": self.failures, "distinct_runs": self.distinct_runs,
        }


def _run(inst, dist, params):
    try:
        return _arm_output(risk_alg(inst, dist, params.replace(full_support=True)).x)
    except RiskSearchError as exc:
        return {"error": str(exc)}


def lower_bound_demo(B=12.0, rho=0.1, kappa=0.02, eps=None, gamma=0.05, sample_budget=1, trials=1000, seed=0):
    """Both arms in full-support mode, then ``trials`` runs on ``sample_budget`` draws from the large arm.

    A sampled run counts as confused when its output has ``x_S2 + x_S3 < 1/2``,
    the shape expected only on the small arm; runs whose search fails are
    counted separately.  Runs are memoised by the multiset of drawn scenarios.
    """
    eps = kappa if eps is None else eps
    params = RiskParams(rho=rho, eps=eps, gamma=gamma, kappa=kappa, seed=seed)
    inst0, d0 = lb1(B, rho, kappa, 0.0, eps=eps, gamma=gamma)
    inst1, d1 = lb1(B, rho, kappa, 3 * kappa, eps=eps, gamma=gamma)
    small = _run(inst0, d0, params)
    large = _run(inst1, d1, params)
    rng = stream(seed, "lb_demo")
    cache = {}
    confused = failures = 0
    for _ in range(trials):
        draws = d1.sample(rng, sample_budget)
        key = tuple(sorted(Counter(draws).items(), key=lambda kv: kv[0].sort_key))
        if key not in cache:
            emp = ExplicitDistribution(tuple((s, c / sample_budget) for s, c in key))
            cache[key] = _run(inst1, emp, params)
        out = cache[key]
        if "error" in out:
            failures += 1
        elif out["x_s2_s3"] < 0.5:
            confused += 1
    return LowerBoundReport(
        {"B": B, "rho": rho, "kappa": kappa, "eps": eps, "gamma": gamma, "seed": seed},
        small, large, sample_budget, trials, confused / trials, failures, len(cache),
    )
