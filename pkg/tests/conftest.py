import math

import pytest

from riskaverse.generators import random_set_cover
from riskaverse.model import ExplicitDistribution, Scenario, SetCoverInstance, SetSpec
from riskaverse.simplex import stats


def make_t1(budget=math.inf):
    sets = (
        SetSpec("S1", ("e1",), 1.0, 2.0),
        SetSpec("S2", ("e2",), 1.0, 2.0),
        SetSpec("S3", ("e1", "e2"), 1.5, 3.0),
    )
    inst = SetCoverInstance(("e1", "e2"), sets, lam=2.0, budget=budget)
    dist = ExplicitDistribution((
        (Scenario({"e1"}), 0.5),
        (Scenario({"e1", "e2"}), 0.3),
        (Scenario(), 0.2),
    ))
    return inst, dist


@pytest.fixture
def t1():
    return make_t1()


@pytest.fixture
def t1_budget():
    return make_t1(1.5)


# Random explicit fixtures with tight budgets, so the probability row binds.
SC_SEEDS = tuple(range(10))


def sc_fixture(seed, m=6, n=5, support=5, budget_scale=0.2):
    return random_set_cover(m=m, n=n, seed=seed, support=support, budget_scale=budget_scale)


@pytest.fixture(params=SC_SEEDS[:4], ids=lambda s: f"seed{s}")
def sc_small(request):
    return sc_fixture(request.param)


# acceptance verdicts: criterion number -> (passed, detail)
ACCEPTANCE = {}


def record(n, ok, detail):
    ACCEPTANCE[n] = (bool(ok), detail)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        if n == 11:
            # the residual bound covers every solve of the whole run
            run_ok = stats.max_duality_residual <= 1e-6
            detail += f"; whole-run max duality residual {stats.max_duality_residual:.2e}"
            ok = ok and run_ok
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_sessionfinish(session, exitstatus):
    # every optimal solve of the run is certified; surface the worst residual
    tr = session.config.pluginmanager.get_plugin("terminalreporter")
    msg = (f"simplex: {stats.optimal} optimal solves, max relative duality residual "
           f"{stats.max_duality_residual:.2e}, max complementary-slackness residual {stats.max_cs_residual:.2e}")
    if tr is not None:
        tr.write_line(msg)
    if stats.max_duality_residual > 1e-6:
        session.exitstatus = 1
