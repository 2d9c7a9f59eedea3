import math

import numpy as np
import pytest
from conftest import make_t1, sc_fixture

from riskaverse.exact_oracle import exact_lagrangian_value
from riskaverse.model import ExplicitDistribution, Scenario, stream
from riskaverse.saa import AggregateLp, SaaConfig, build_empirical, log_net_size, sa_alg, theory_sample_size

# m=3, lambda=2, eps_bar=0.5, eta=0.1, delta=0.1, multiplier 1, w1 = ones, zeta = 0.1.
# K = 2 sqrt(3) + 1; value from a 40-digit evaluation of the closed form.
FROZEN_COUNT = 80161489
FROZEN_N = 11


def frozen_cfg(**over):
    kw = dict(eps_bar=0.5, eta=0.1, zeta=0.1, delta=0.1, K=2 * math.sqrt(3) + 1, m=3, lam=2.0, sample_mode="theory")
    kw.update(over)
    return SaaConfig(**kw)


def test_frozen_theory_count():
    cfg = frozen_cfg()
    assert cfg.N == FROZEN_N
    size = theory_sample_size(cfg)
    assert size.count == FROZEN_COUNT and not size.capped


def test_capped_mode():
    size = theory_sample_size(frozen_cfg(sample_mode=1000))
    assert size.count == 1000 and size.capped
    assert size.theory == pytest.approx(FROZEN_COUNT, rel=1e-8)


def test_overflow_is_flagged():
    size = theory_sample_size(frozen_cfg(eta=1e-9, eps_bar=1e-9))
    assert size.capped


def test_doubling_lambda_quadruples_dominated_count():
    base = theory_sample_size(frozen_cfg(eta=1e6, sample_mode="theory")).theory
    dbl = theory_sample_size(frozen_cfg(eta=1e6, lam=4.0, sample_mode="theory")).theory
    assert dbl >= 4 * base * 0.999


def test_robust_count_ignores_lambda():
    a = theory_sample_size(frozen_cfg(robust=True)).theory
    b = theory_sample_size(frozen_cfg(robust=True, lam=50.0)).theory
    assert a == b


def test_config_constants():
    cfg = frozen_cfg()
    assert cfg.R == pytest.approx(math.sqrt(3)) and cfg.V == 0.5 and cfg.tau == pytest.approx(0.1 / 6)
    assert log_net_size(cfg) > 0
    with pytest.raises(ValueError):
        frozen_cfg(eta=0.0)


def test_build_empirical_counts():
    A, B = Scenario({"a"}), Scenario({"b"})
    emp = build_empirical([A, A, B, A])
    assert dict(emp.entries) == {A: 0.75, B: 0.25}
    assert dict(build_empirical([A] * 5).entries) == {A: 1.0}
    with pytest.raises(ValueError):
        build_empirical([])


def test_empirical_chernoff_band():
    d = ExplicitDistribution(((Scenario({"a"}), 0.3), (Scenario(), 0.7)))
    emp = build_empirical(d.sample(stream(2, "chernoff"), 10_000))
    assert abs(emp.probability(lambda s: s.active) - 0.3) <= 0.02


def test_null_oracle_gives_zero():
    inst, _ = make_t1()
    res = sa_alg(inst, ExplicitDistribution.point_mass(), "budget", 1.0, empirical=ExplicitDistribution.point_mass())
    assert np.all(res.x == 0) and res.value == 0.0


def test_full_support_t1_plain_two_stage():
    inst, dist = make_t1()
    res = sa_alg(inst, dist, "budget", 0.0, empirical=dist)
    assert res.value == pytest.approx(1.5)
    assert res.x == pytest.approx([0.0, 0.0, 1.0])


@pytest.mark.parametrize("mode", ["budget", "robust"])
@pytest.mark.parametrize("seed", range(3))
def test_aggregate_matches_exact_oracle(seed, mode):
    inst, dist = sc_fixture(seed)
    agg = AggregateLp(inst, dist, mode, None)
    for delta in (0.0, 0.5, 3.0, 20.0, 200.0):
        assert agg.solve(delta).objective == pytest.approx(
            exact_lagrangian_value(inst, dist, delta, mode=mode), abs=1e-6)


def test_sampled_run_uses_cap_and_is_replayable():
    inst, dist = sc_fixture(0)
    cfg = SaaConfig(eps_bar=0.05, eta=0.01, zeta=0.01, delta=0.1, K=10.0, m=inst.m, lam=inst.lam, sample_mode=300)
    a = sa_alg(inst, dist, "budget", 2.0, cfg=cfg, rng=stream(0, "saa"))
    b = sa_alg(inst, dist, "budget", 2.0, cfg=cfg, rng=stream(0, "saa"))
    assert a.sample_size.count == 300
    assert np.array_equal(a.x, b.x)


def test_sampled_gap_shrinks_with_sample_count():
    inst, dist = sc_fixture(3)
    delta = 5.0
    opt = exact_lagrangian_value(inst, dist, delta)
    from riskaverse.scenario_lp import lagrangian_value

    medians = []
    for n in (100, 1000, 10_000):
        gaps = []
        for seed in range(20):
            emp = build_empirical(dist.sample(stream(seed, "gap", n), n))
            x = sa_alg(inst, dist, "budget", delta, empirical=emp).x
            gaps.append(lagrangian_value(inst, "budget", delta, x, dist)[0] - opt)
        medians.append(float(np.median(gaps)))
    assert all(g >= -1e-9 for g in medians)
    assert medians[0] + 1e-9 >= medians[1] >= medians[2] - 1e-9
