import numpy as np
import pytest
from conftest import make_t1, sc_fixture
from hypothesis import given, settings
from hypothesis import strategies as st

from riskaverse.generators import grid_fl
from riskaverse.model import Scenario
from riskaverse.scenario_lp import (
    SolveStore,
    assemble_subgradient,
    lagrangian_value,
    solve_scenario_lagrangian,
    solve_second_stage,
)

BOTH = Scenario({"e1", "e2"})


def test_second_stage_t1_values():
    inst, _ = make_t1()
    val, y = solve_second_stage(inst, np.zeros(3), BOTH)
    assert val == pytest.approx(3.0)
    assert y == pytest.approx([0.0, 0.0, 1.0])
    assert solve_second_stage(inst, np.array([0, 0, 1.0]), BOTH)[0] == pytest.approx(0.0)
    assert solve_second_stage(inst, np.array([0.5, 0, 0]), Scenario({"e1"}))[0] == pytest.approx(1.0)


def test_budget_mode_t1_partial_exceedance():
    inst, _ = make_t1(1.5)
    s = solve_scenario_lagrangian(inst, "budget", 2.0, np.zeros(3), BOTH)
    assert s.value == pytest.approx(4.0)
    assert s.r == pytest.approx(0.5)
    w2 = inst.stage2_weights(BOTH)
    assert s.value == pytest.approx(w2 @ (s.y + s.z) + 2.0 * s.r)
    assert w2 @ s.y <= 1.5 + 1e-7


def test_delta_zero_gives_full_recourse_value():
    inst, dist = sc_fixture(0)
    x = np.full(inst.m, 0.2)
    for scen, _ in dist:
        g = solve_scenario_lagrangian(inst, "budget", 0.0, x, scen)
        assert g.value == pytest.approx(solve_second_stage(inst, x, scen)[0], abs=1e-8)


def test_slack_budget_and_large_delta_gives_no_exceedance():
    inst, dist = make_t1(100.0)
    for scen, _ in dist:
        s = solve_scenario_lagrangian(inst, "budget", 1e4, np.zeros(3), scen)
        assert s.r == pytest.approx(0.0)
        assert s.value == pytest.approx(solve_second_stage(inst, np.zeros(3), scen)[0])


def test_robust_mode_has_no_overflow_recourse():
    inst, _ = make_t1(1.5)
    s = solve_scenario_lagrangian(inst, "robust", 2.0, np.zeros(3), BOTH)
    assert s.value == pytest.approx(2.0 * s.r)
    assert np.all(s.z == 0)
    assert 0 <= s.value <= 2.0 + 1e-9


def test_mode_must_match_instance():
    inst, _ = make_t1()
    with pytest.raises(ValueError):
        solve_scenario_lagrangian(inst, "facility", 1.0, np.zeros(3), BOTH)
    with pytest.raises(ValueError):
        solve_scenario_lagrangian(inst, "budget", -1.0, np.zeros(3), BOTH)


@pytest.mark.parametrize("seed", range(3))
def test_concave_nondecreasing_in_delta(seed):
    inst, dist = sc_fixture(seed)
    x = np.random.default_rng(seed).uniform(0, 0.5, inst.m)
    grid = np.linspace(0, 20, 21)
    for scen, _ in dist:
        g = np.array([solve_scenario_lagrangian(inst, "budget", d, x, scen).value for d in grid])
        assert np.all(np.diff(g) >= -1e-8)
        assert np.all(np.diff(g, 2) <= 1e-8)


def test_store_and_memo_agree():
    inst, dist = sc_fixture(1)
    x = np.full(inst.m, 0.3)
    store = SolveStore()
    for scen, _ in dist:
        a = solve_scenario_lagrangian(inst, "budget", 3.0, x, scen, store=store)
        b = solve_scenario_lagrangian(inst, "budget", 3.0, x, scen)
        assert a.value == pytest.approx(b.value, abs=1e-9)


def test_subgradient_all_covered_is_stage_one_weights():
    inst, dist = make_t1(1.5)
    x = np.ones(3)
    _, sols = lagrangian_value(inst, "budget", 2.0, x, dist)
    assert assemble_subgradient(inst, "budget", sols) == pytest.approx(inst.w1)


def test_subgradient_rejects_bad_weights():
    inst, dist = make_t1(1.5)
    _, sols = lagrangian_value(inst, "budget", 2.0, np.zeros(3), dist)
    with pytest.raises(ValueError):
        assemble_subgradient(inst, "budget", [(2.0, s) for _, s in sols])
    with pytest.raises(ValueError):
        assemble_subgradient(inst, "robust", sols)


def test_finite_difference_t1():
    inst, dist = make_t1(1.5)
    x = np.zeros(3)
    h0, sols = lagrangian_value(inst, "budget", 2.0, x, dist)
    d = assemble_subgradient(inst, "budget", sols)
    for s in range(3):
        for step in (0.01, -0.01):
            xp = x.copy()
            xp[s] += step
            if xp[s] < 0:
                continue
            h1, _ = lagrangian_value(inst, "budget", 2.0, xp, dist)
            assert h1 - h0 >= d[s] * step - 1e-5


@pytest.mark.parametrize("mode", ["budget", "robust"])
def test_subgradient_range_envelope(mode):
    inst, dist = sc_fixture(2)
    rng = np.random.default_rng(0)
    delta = 5.0
    for _ in range(10):
        x = rng.uniform(0, 1, inst.m)
        _, sols = lagrangian_value(inst, mode, delta, x, dist)
        d = assemble_subgradient(inst, mode, sols)
        w1 = np.asarray(inst.w1)
        assert np.all(d <= w1 + 1e-9)
        assert np.all(d >= -inst.lam * w1 - delta - 1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 3), st.floats(0.0, 30.0), st.integers(0, 10_000))
def test_h_convex_midpoint(seed, delta, rs):
    inst, dist = sc_fixture(seed)
    rng = np.random.default_rng(rs)
    u, v = rng.uniform(0, 1, inst.m), rng.uniform(0, 1, inst.m)
    hu = lagrangian_value(inst, "budget", delta, u, dist)[0]
    hv = lagrangian_value(inst, "budget", delta, v, dist)[0]
    hm = lagrangian_value(inst, "budget", delta, (u + v) / 2, dist)[0]
    assert hm <= (hu + hv) / 2 + 1e-8


# -- facility mode ---------------------------------------------------------------

def fl_fixture(seed=0):
    return grid_fl(seed=seed, budget=3.0)


def test_facility_solution_is_feasible_and_consistent():
    inst, dist = fl_fixture()
    y = np.full(inst.m, 0.25)
    for scen, _ in dist:
        s = solve_scenario_lagrangian(inst, "facility", 4.0, y, scen)
        if not scen.active:
            assert s.value == 0.0
            continue
        cols = [inst.client_index[c] for c in scen.active]
        assert np.all(s.assign_x[:, cols].sum(axis=0) + s.r >= 1 - 1e-7)
        assert np.all((s.assign_x + s.assign_u)[:, cols].sum(axis=0) >= 1 - 1e-7)
        assert s.budget_cost <= 3.0 + 1e-7
        f2 = inst.stage2_weights(scen)
        assert s.value == pytest.approx(f2 @ (s.y + s.z) + np.sum(inst.metric * (s.assign_x + s.assign_u)) + 4.0 * s.r)


@pytest.mark.parametrize("seed", range(3))
def test_facility_dual_bounds(seed):
    inst, dist = fl_fixture(seed)
    rng = np.random.default_rng(seed)
    for _ in range(5):
        y = rng.uniform(0, 1, inst.m)
        delta = float(rng.uniform(0, 10))
        for scen, _ in dist:
            s = solve_scenario_lagrangian(inst, "facility", delta, y, scen)
            if not scen.active:
                continue
            f2 = inst.stage2_weights(scen)
            assert np.all(s.beta.sum(axis=1) <= delta + 1e-6)
            assert np.all(s.gamma.sum(axis=1) <= f2 + 1e-6)


def test_facility_subgradient_inequality():
    inst, dist = fl_fixture(1)
    rng = np.random.default_rng(5)
    for _ in range(30):
        u, v = rng.uniform(0, 1, inst.m), rng.uniform(0, 1, inst.m)
        hu, sols = lagrangian_value(inst, "facility", 3.0, u, dist)
        d = assemble_subgradient(inst, "facility", sols)
        hv, _ = lagrangian_value(inst, "facility", 3.0, v, dist)
        assert hv - hu >= d @ (v - u) - 1e-6
