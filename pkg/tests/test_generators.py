import json

import numpy as np
import pytest

from riskaverse.generators import (
    FAMILIES,
    generate,
    generate_document,
    grid_fl,
    lb1,
    oracle_from_generator,
    random_fl,
    random_set_cover,
)
from riskaverse.model import InstanceError, load_problem, stream


def test_lb1_rejects_inconsistent_parameters():
    # kappa > rho would give the full scenario negative probability
    with pytest.raises(InstanceError):
        lb1(B=12, rho=0.1, kappa=0.2)
    with pytest.raises(InstanceError):
        lb1(B=0.1, rho=0.1, kappa=0.02, gamma=0.05)
    with pytest.raises(InstanceError):
        lb1(B=12, rho=0.2, kappa=0.02, eps=0.5)


def test_lb1_structure():
    inst, dist = lb1(B=12, rho=0.1, kappa=0.02, p_a2=0.06)
    assert list(inst.w1) == [12, 12, 12]
    probs = {tuple(sorted(s.active)): p for s, p in dist}
    assert probs[("e1", "e2", "e3")] == pytest.approx(0.08)
    assert probs[("e2", "e3")] == pytest.approx(0.06)
    assert probs[()] == pytest.approx(0.86)


@pytest.mark.parametrize("family", sorted(FAMILIES))
def test_documents_are_deterministic_and_load(family):
    kw = {} if family == "lb1" else {"seed": 1}
    a, b = generate_document(family, **kw), generate_document(family, **kw)
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
    inst, oracle = load_problem(json.dumps(a))
    assert abs(sum(p for _, p in oracle.support) - 1.0) <= 1e-9


def test_random_set_cover_seeds_differ():
    a = generate_document("random", m=6, n=5, seed=1)
    b = generate_document("random", m=6, n=5, seed=2)
    assert a != b


def test_random_set_cover_budget_is_positive_and_scenarios_unique():
    inst, dist = random_set_cover(m=6, n=5, seed=3, support=5)
    assert inst.budget > 0
    keys = [s for s, _ in dist]
    assert len(set(keys)) == len(keys)


def test_fl_generators_pass_metric_checks():
    for seed in range(5):
        inst, dist = grid_fl(seed=seed)
        assert inst.metric.shape == (4, 4)
        inst, _ = random_fl(seed=seed)
        assert inst.metric.shape == (5, 8) and np.all(inst.metric >= 0)


def test_unknown_family():
    with pytest.raises(InstanceError):
        generate("hexagon")


def test_independent_oracle_from_generator():
    inst, _ = random_set_cover(seed=0)
    oracle = oracle_from_generator(inst, "independent", {"p": 0.5, "inflation": 1.5}, 0)
    draws = oracle.sample(stream(0, "gen.test"), 200)
    frac = np.mean([len(s.active) for s in draws]) / inst.n
    assert 0.35 <= frac <= 0.65
    with pytest.raises(InstanceError):
        oracle_from_generator(inst, "independent", {"inflation": 10.0}, 0)
    with pytest.raises(InstanceError):
        oracle_from_generator(inst, "poisson", {}, 0)
