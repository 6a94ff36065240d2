import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from asymfair.allocate import max_percentile_allocation, multiplier_allocation, round_robin, welfare_max_allocation
from asymfair.errors import DomainError, SizeGuardError
from asymfair.experiments import sample_instance
from asymfair.fairness import (
    bundle_totals,
    envy_matrix,
    find_pareto_improvement,
    fpo_certificate_check,
    is_ef1,
    is_envy_free,
    is_pareto_optimal_bruteforce,
)
from asymfair.instance import Instance, bundle_values
from asymfair.profiles import load_profile
from helpers import naive_pareto_search

U2 = Instance(np.array([[0.9, 0.2], [0.5, 0.3]]))


def test_envy_examples():
    np.testing.assert_array_equal(envy_matrix(Instance(np.array([[0.4, 0.1]])), [0, 0]), [[0.0]])
    E = envy_matrix(U2, [0, 1])
    assert E[0, 1] == pytest.approx(-0.7) and E[1, 0] == pytest.approx(0.2)
    assert not is_envy_free(U2, [0, 1])
    assert is_envy_free(Instance(np.zeros((3, 0))), np.zeros(0, dtype=int))


def test_envy_relabeling():
    rng = np.random.default_rng(0)
    u = rng.random((4, 12))
    owners = rng.integers(0, 4, size=12)
    perm = rng.permutation(4)
    inv = np.argsort(perm)
    E = envy_matrix(Instance(u), owners)
    E2 = envy_matrix(Instance(u[perm]), inv[owners])
    np.testing.assert_allclose(E2, E[np.ix_(perm, perm)], atol=1e-15)


def test_block_diagonal_is_envy_free():
    u = np.kron(np.eye(3), np.ones((1, 2)))
    assert is_envy_free(Instance(u), [0, 0, 1, 1, 2, 2])


def test_ef1_examples():
    # with both unit items held by agent 0, agent 1 still envies 1 > 0 after one removal
    assert not is_ef1(Instance(np.ones((2, 2))), [0, 0])
    assert is_ef1(Instance(np.ones((2, 2))), [0, 1])
    assert is_ef1(Instance(np.ones((2, 1))), [0])


def test_certificates():
    assert fpo_certificate_check(U2, welfare_max_allocation(U2), [1, 1])
    assert not fpo_certificate_check(U2, [1, 0], [1, 1])
    with pytest.raises(DomainError):
        fpo_certificate_check(U2, [0, 1], [1, 0])


def test_bruteforce_examples():
    inst = Instance(np.array([[0.9, 0.9], [0.1, 0.1]]))
    # every other allocation leaves agent 1 with less than 0.2
    assert is_pareto_optimal_bruteforce(inst, [1, 1])
    assert is_pareto_optimal_bruteforce(inst, [0, 0])
    assert not is_pareto_optimal_bruteforce(Instance(np.array([[0.9, 0.9], [0.0, 0.1]])), [1, 1])
    assert not is_pareto_optimal_bruteforce(Instance(np.array([[0.9, 0.9], [0.0, 0.0]])), [1, 1])
    with pytest.raises(SizeGuardError):
        is_pareto_optimal_bruteforce(Instance(np.ones((4, 11))), np.zeros(11, dtype=int))


def test_two_for_one_trade():
    # agent 0 holds one top item, agent 1 two median items that agent 0 prefers together
    u = np.array([[0.6, 0.4, 0.4], [0.9, 0.3, 0.3]])
    trade = find_pareto_improvement(Instance(u), [0, 1, 1])
    assert trade is not None and trade.kind == "two_for_one"
    assert find_pareto_improvement(Instance(u), [0, 1, 1], depth=1) is None
    gains = trade.deltas
    assert np.all(gains >= 0) and np.any(gains > 0)


def test_percentile_counterexample_pattern():
    prof = load_profile("percentile-counterexample")
    found = sum(find_pareto_improvement(inst := sample_instance(prof, 5000, s),
                                        max_percentile_allocation(inst, prof)) is not None for s in range(5))
    assert found >= 3


def test_trade_application_improves():
    rng = np.random.default_rng(1)
    for _ in range(50):
        inst = Instance(rng.random((3, 7)))
        owners = rng.integers(0, 3, size=7)
        trade = find_pareto_improvement(inst, owners)
        if trade is None:
            continue
        before = bundle_totals(inst.utilities, owners[None, :])[0]
        after = bundle_totals(inst.utilities, trade.apply(owners)[None, :])[0]
        assert np.all(after >= before) and np.any(after > before)
        np.testing.assert_allclose(after - before, trade.deltas, atol=1e-12)


def test_neighbourhood_matches_naive_enumeration():
    rng = np.random.default_rng(2)
    for _ in range(500):
        n, m = int(rng.integers(2, 4)), int(rng.integers(1, 8))
        u = rng.integers(0, 6, size=(n, m)) / 5 if rng.random() < 0.4 else rng.random((n, m))
        inst = Instance(u)
        owners = rng.integers(0, n, size=m)
        found = find_pareto_improvement(inst, owners) is not None
        assert found == naive_pareto_search(u, owners)
        if found:
            assert not is_pareto_optimal_bruteforce(inst, owners)


def test_round_robin_rr_profile_found_rate():
    prof = load_profile("rr-po-counterexample")
    hits = sum(find_pareto_improvement(inst := sample_instance(prof, 50, s), round_robin(inst)) is not None
               for s in range(200))
    assert hits / 200 >= 1 / 81


@given(st.integers(0, 2**32 - 1))
def test_fpo_implies_po_implies_no_trade(seed):
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(2, 4)), int(rng.integers(1, 7))
    inst = Instance(rng.random((n, m)))
    beta = rng.uniform(0.5, 2.0, size=n)
    owners = multiplier_allocation(inst, beta)
    assert fpo_certificate_check(inst, owners, beta)
    assert find_pareto_improvement(inst, owners) is None
    assert is_pareto_optimal_bruteforce(inst, owners)


@given(st.integers(0, 2**32 - 1))
def test_ef_implies_ef1_and_sum_order(seed):
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(1, 5)), int(rng.integers(0, 40))
    inst = Instance(rng.random((n, m)))
    owners = rng.integers(0, n, size=m)
    if is_envy_free(inst, owners):
        assert is_ef1(inst, owners)
    V = bundle_values(inst, owners)
    for i in range(n):
        for j in range(n):
            assert abs(V[i, j] - sum(sorted(inst.utilities[i, owners == j], reverse=True))) <= 1e-12


def test_multiplier_never_flagged():
    rng = np.random.default_rng(3)
    for _ in range(10_000):
        n, m = int(rng.integers(2, 5)), int(rng.integers(1, 12))
        inst = Instance(rng.random((n, m)))
        assert find_pareto_improvement(inst, multiplier_allocation(inst, rng.uniform(0.5, 2, size=n))) is None


def test_welfare_max_bruteforce_po():
    rng = np.random.default_rng(4)
    for _ in range(30):
        inst = Instance(rng.random((3, 6)))
        assert is_pareto_optimal_bruteforce(inst, welfare_max_allocation(inst))
