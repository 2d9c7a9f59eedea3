"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line.

The lines are printed in the terminal summary (see ``conftest.py``).  Two
criteria are expected to fail; the README explains why.
"""

import math

import numpy as np
import pytest
from conftest import make_t1, record, sc_fixture
from lp_oracle import random_lp, vertex_enumerate
from test_rounding import sta_factors

from riskaverse.exact_oracle import InfeasibleProblem, SizeGuard, exact_integer_enum, exact_lagrangian_value, exact_lp
from riskaverse.experiments import coin_experiment, coin_threshold
from riskaverse.facility import fl_risk_solve
from riskaverse.generators import grid_fl, lb1
from riskaverse.model import RiskParams
from riskaverse.risk_search import compute_ub, evaluate_report, grid_points, risk_alg
from riskaverse.robust import chance_constrained_cover, robust_solve, scenario_costs
from riskaverse.rounding import harmonic, round_integer_cover, scale_first_stage
from riskaverse.scenario_lp import assemble_subgradient, lagrangian_value
from riskaverse.simplex import solve_lp, stats

EPS, GAMMA, KAPPA = 0.3, 0.05, 0.5
SC_RHO, FL_RHO, FL_BUDGET = 0.1, 0.3, 3.0


def contract(eps, rho, **kw):
    return RiskParams(rho=rho, eps=eps, gamma=GAMMA, kappa=KAPPA, **kw)


# -- 1 -------------------------------------------------------------------------------

def dual_max(inst, dist, rho):
    """``max over delta of OPT(delta) - delta rho``: geometric grid, then golden-section refinement."""
    phi = lambda d: exact_lagrangian_value(inst, dist, d) - d * rho  # noqa: E731
    grid = (0.0,) + grid_points(1e-3, 1.25, compute_ub(inst, RiskParams(rho=rho)).ub)
    vals = [phi(d) for d in grid]
    i = int(np.argmax(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    g = (math.sqrt(5) - 1) / 2
    a, b = hi - g * (hi - lo), lo + g * (hi - lo)
    fa, fb = phi(a), phi(b)
    for _ in range(60):
        if fa >= fb:
            hi, b, fb = b, a, fa
            a = hi - g * (hi - lo)
            fa = phi(a)
        else:
            lo, a, fa = a, b, fb
            b = lo + g * (hi - lo)
            fb = phi(b)
    return max(max(vals), fa, fb)


def test_criterion_01_lagrangian_duality():
    worst_grid = worst_star = 0.0
    seeds = range(10)
    for seed in seeds:
        inst, dist = sc_fixture(seed)
        assert inst.m <= 8 and len(dist) <= 10
        sol = exact_lp(inst, dist, SC_RHO)
        worst_grid = max(worst_grid, abs(sol.value - dual_max(inst, dist, SC_RHO)))
        at_star = exact_lagrangian_value(inst, dist, sol.delta_star) - sol.delta_star * SC_RHO
        worst_star = max(worst_star, abs(at_star - sol.value))
    ok = worst_grid <= 1e-4 and worst_star <= 1e-6
    record(1, ok, f"{len(seeds)} fixtures, max |OPT - grid dual| {worst_grid:.1e} (<= 1e-4), "
                  f"max |OPT(D*) - D* rho - OPT| {worst_star:.1e} (<= 1e-6)")
    assert ok


# -- 2 and 6 -----------------------------------------------------------------------

@pytest.fixture(scope="module")
def full_support_runs():
    runs = []
    for seed in range(10):
        inst, dist = sc_fixture(seed)
        runs.append((f"sc{seed}", inst, dist, SC_RHO, risk_alg(inst, dist, contract(EPS, SC_RHO, full_support=True))))
    inst, dist = make_t1(1.5)
    runs.append(("t1", inst, dist, 0.3, risk_alg(inst, dist, contract(EPS, 0.3, full_support=True))))
    for seed in range(4):
        inst, dist = grid_fl(seed=seed, budget=FL_BUDGET)
        runs.append((f"fl{seed}", inst, dist, FL_RHO,
                     fl_risk_solve(inst, dist, contract(EPS, FL_RHO, full_support=True))))
    return runs


def test_criterion_02_full_support_contract(full_support_runs):
    bad = []
    for name, inst, dist, rho, rep in full_support_runs:
        cost, mass = evaluate_report(rep, inst, dist)
        opt = exact_lp(inst, dist, rho).value
        if not (cost <= (1 + EPS) * opt + GAMMA + 1e-9 and mass <= rho * (1 + KAPPA) + 1e-9):
            bad.append(name)
    ok = not bad
    record(2, ok, f"{len(full_support_runs)} fixtures (set cover and facility location), "
                  f"violations: {bad or 'none'}")
    assert ok


def test_criterion_06_end_of_grid_exceedance(full_support_runs):
    bad = [name for name, *_, rep in full_support_runs if not rep.extras["end_exceedance"]["ok"]]
    worst = max(rep.extras["end_exceedance"]["value"] / rep.extras["end_exceedance"]["cut"]
                for *_, rep in full_support_runs)
    ok = not bad
    record(6, ok, f"{len(full_support_runs)} runs, worst exceedance/cut at the largest multiplier {worst:.2e}, "
                  f"violations: {bad or 'none'}")
    assert ok


# -- 3 -------------------------------------------------------------------------------

def test_criterion_03_sampled_runs():
    eps_check = 0.5
    rates = []
    for seed in range(5):
        inst, dist = sc_fixture(seed)
        opt = exact_lp(inst, dist, SC_RHO).value
        good = 0
        for run in range(20):
            rep = risk_alg(inst, dist, contract(EPS, SC_RHO, sample_mode=2000, seed=run))
            cost, mass = evaluate_report(rep, inst, dist)
            good += cost <= (1 + eps_check) * opt + GAMMA + 1e-9 and mass <= SC_RHO * (1 + KAPPA) + 1e-9
        rates.append(good / 20)
    ok = min(rates) >= 0.9
    record(3, ok, f"5 fixtures x 20 seeds at n = 2000, per-fixture success {rates} (>= 0.9)")
    assert ok


# -- 4 -------------------------------------------------------------------------------

def test_criterion_04_rounding_factors():
    checked, bad = 0, []
    for seed in range(10):
        inst, dist = sc_fixture(seed)
        try:
            exact_integer_enum(inst, dist, SC_RHO)
        except SizeGuard:
            continue
        except InfeasibleProblem:
            pass
        sol = exact_lp(inst, dist, SC_RHO)
        P = float(sum(p * min(r, 1.0) for (_, p), r in zip(dist, sol.r)))
        c = harmonic(inst.n)
        for eps_r in (0.5, 1.0):
            checked += 1
            x_hat = scale_first_stage(sol.x, eps_r)
            cover = round_integer_cover(inst, x_hat)
            rec = [(s, p, r, cover.recourse(s)[1]) for (s, p), r in zip(dist, sol.r)]
            cost = cover.stage1_cost + sum(p * v for _, p, _, v in rec)
            cap = lambda s: 2 * c * (1 + 1 / eps_r) * inst.scenario_budget(s)  # noqa: E731
            frac = scenario_costs(inst, x_hat, dist)[0]
            ok_cost = cost <= 2 * c * (1 + eps_r + 1 / eps_r) * sol.value + 1e-6
            ok_scen = all(v <= cap(s) + 1e-6 for s, _, r, v in rec if r < 1 / (1 + eps_r))
            ok_mass = sum(p for s, p, _, v in rec if v > cap(s) + 1e-9) <= (1 + eps_r) * P + 1e-9
            ok_frac = sum(p for (s, p), v in zip(dist, frac)
                          if v > (1 + 1 / eps_r) * inst.scenario_budget(s) + 1e-9) <= (1 + eps_r) * P + 1e-9
            if not (ok_cost and ok_scen and ok_mass and ok_frac):
                bad.append((seed, eps_r))
    ok = checked > 0 and not bad
    record(4, ok, f"{checked} (fixture, eps) pairs, violations: {bad or 'none'}")
    assert ok


# -- 5 -------------------------------------------------------------------------------

def test_criterion_05_subgradients_and_dual_bounds():
    rng = np.random.default_rng(2024)
    worst = -np.inf
    dual_bad = fl_solves = 0
    cases = [(sc_fixture(s), m) for s in range(3) for m in ("budget", "robust")]
    cases += [(grid_fl(seed=s, budget=FL_BUDGET), "facility") for s in range(2)]
    for (inst, dist), mode in cases:
        for _ in range(200):
            u, v = rng.uniform(0, 1, inst.m), rng.uniform(0, 1, inst.m)
            delta = float(rng.uniform(0, 20))
            hu, su = lagrangian_value(inst, mode, delta, u, dist)
            hv, sv = lagrangian_value(inst, mode, delta, v, dist)
            d = assemble_subgradient(inst, mode, su)
            worst = max(worst, d @ (v - u) - (hv - hu))
            if mode == "facility":
                for (scen, _), (_, s) in zip(list(dist) * 2, su + sv):
                    if not scen.active:
                        continue
                    fl_solves += 1
                    f2 = inst.stage2_weights(scen)
                    if np.any(s.beta.sum(axis=1) > delta + 1e-6) or np.any(s.gamma.sum(axis=1) > f2 + 1e-6):
                        dual_bad += 1
    ok = worst <= 1e-6 and dual_bad == 0
    record(5, ok, f"{len(cases)} fixture/mode cases x 200 pairs, max violation {worst:.1e} (<= 1e-6); "
                  f"{fl_solves} facility scenario solves, {dual_bad} dual-bound violations")
    assert ok


# -- 7 -------------------------------------------------------------------------------

def test_criterion_07_robust_and_chance():
    rho = 0.2
    params = contract(EPS, rho, full_support=True)
    bad, worst_ratio = [], 0.0
    for seed in range(4):
        inst, dist = sc_fixture(seed)
        res = robust_solve(inst, dist, params)
        w1 = np.asarray(inst.w1)
        opt = math.inf
        for B in res.grid:
            try:
                sol = exact_lp(inst, dist, rho, budget=B, mode="robust")
            except InfeasibleProblem:
                continue
            opt = min(opt, float(w1 @ sol.x) + B)
        worst_ratio = max(worst_ratio, res.objective / opt)
        if not res.objective <= (1 + EPS) * opt + 2 * GAMMA + 1e-9:
            bad.append(f"robust{seed}")
        ch = chance_constrained_cover(inst, dist, params)
        _, mass = evaluate_report(ch.report, inst, dist)
        if not mass <= rho * (1 + KAPPA) + 1e-9:
            bad.append(f"chance{seed}")
    ok = not bad
    record(7, ok, f"4 fixtures, worst objective / grid optimum {worst_ratio:.3f}, violations: {bad or 'none'}")
    assert ok


# -- 8 -------------------------------------------------------------------------------

def test_criterion_08_sta_factors():
    factors = [sta_factors(seed) for seed in range(20)]
    client = max(f[0] for f in factors)
    facility = max(f[1] for f in factors)
    ok = client <= 4 + 1e-9 and facility <= 4 + 1e-9
    record(8, ok, f"20 seeds of 5 facilities x 8 clients, max client factor {client:.3f}, "
                  f"max facility factor {facility:.3f} (<= 4)")
    assert ok


# -- 9 -------------------------------------------------------------------------------

def test_criterion_09_coin_experiment():
    varrho, delta = 0.05, 0.25
    table = coin_experiment(varrho, delta, trials=10_000)
    at_thr, quarter = table.rows
    assert at_thr.tosses == math.ceil(coin_threshold(varrho, delta))
    assert quarter.tosses == math.floor(coin_threshold(varrho, delta) / 4)
    ok_thr = at_thr.worst <= delta + 0.05
    ok_quarter = quarter.worst > delta
    record(9, ok_thr and ok_quarter,
           f"{at_thr.tosses} tosses: worst-arm error {at_thr.worst:.4f} (need <= {delta + 0.05}); "
           f"{quarter.tosses} toss: {quarter.worst:.4f} (need > {delta})")
    assert ok_thr and ok_quarter


# -- 10 ------------------------------------------------------------------------------

def test_criterion_10_two_arm_separation():
    B, rho, kappa = 12.0, 0.1, 0.02
    params = RiskParams(rho=rho, eps=kappa, gamma=0.05, kappa=kappa, full_support=True)
    inst0, d0 = lb1(B, rho, kappa, 0.0, eps=kappa, gamma=0.05)
    inst1, d1 = lb1(B, rho, kappa, 3 * kappa, eps=kappa, gamma=0.05)
    x0 = risk_alg(inst0, d0, params).x
    x1 = risk_alg(inst1, d1, params).x
    ok_small = x0.sum() <= 1 / 3 + 1e-9
    ok_large = x1[1] + x1[2] >= 0.5 - 1e-9
    record(10, ok_small and ok_large,
           f"p(A2) = 0: sum x = {x0.sum():.4f} (need <= 1/3); "
           f"p(A2) = 3 kappa: x_S2 + x_S3 = {x1[1] + x1[2]:.4f} (need >= 1/2)")
    assert ok_small and ok_large


# -- 11 ------------------------------------------------------------------------------

def test_criterion_11_simplex_against_vertex_enumeration():
    rng = np.random.default_rng(500)
    worst, mismatched = 0.0, 0
    for t in range(500):
        p = random_lp(rng, 3 + t % 3, 3 + t % 4, int_coefs=t % 2 == 0)
        status, val = vertex_enumerate(p)
        sol = solve_lp(p)
        if sol.status != status:
            mismatched += 1
        elif status == "optimal":
            worst = max(worst, abs(sol.objective - val))
    ok = mismatched == 0 and worst <= 1e-8 and stats.max_duality_residual <= 1e-6
    record(11, ok, f"500 LPs, {mismatched} status mismatches, max |objective gap| {worst:.1e} (<= 1e-8)")
    assert ok
