import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from asymfair.errors import DomainError, SizeGuardError
from asymfair.fairness import fpo_certificate_check
from asymfair.instance import Instance
from asymfair.mnw import (
    fractional_mnw,
    integer_mnw_bruteforce,
    kkt_gap,
    nash_welfare,
    round_fractional,
)


def test_examples():
    r = fractional_mnw(Instance(np.array([[0.7, 0.2, 0.4]])))
    np.testing.assert_allclose(r.shares, 1.0)
    r = fractional_mnw(Instance(np.array([[1.0, 0.0], [0.0, 1.0]])))
    np.testing.assert_allclose(r.shares, np.eye(2), atol=1e-9)
    assert nash_welfare(Instance(np.eye(2)), round_fractional(r.shares)) == 1.0
    # maximize log(0.8 s) + log(0.4 (1 - s)) => s = 1/2
    r = fractional_mnw(Instance(np.array([[0.8], [0.4]])))
    np.testing.assert_allclose(r.shares[:, 0], [0.5, 0.5], atol=1e-6)


def test_rounding():
    assert round_fractional(np.array([[0.6], [0.4]])).tolist() == [0]
    assert round_fractional(np.array([[0.5], [0.5]])).tolist() == [0]
    integral = np.eye(3)[:, [2, 0, 1, 1]]
    assert round_fractional(integral).tolist() == [2, 0, 1, 1]
    with pytest.raises(DomainError):
        round_fractional(np.array([[0.6], [0.6]]))


def test_errors():
    with pytest.raises(DomainError):
        fractional_mnw(Instance(np.array([[0.0, 0.0], [0.3, 0.1]])))
    with pytest.raises(SizeGuardError):
        integer_mnw_bruteforce(Instance(np.ones((4, 2))))


def _grid_optimum(u, steps=200):
    """Fine discretization of the share simplices (two agents)."""
    m = u.shape[1]
    s = np.linspace(0, 1, steps + 1)
    best = -np.inf
    for combo in itertools.product(s, repeat=m):
        x = np.array(combo)
        v0, v1 = (u[0] * x).sum(), (u[1] * (1 - x)).sum()
        if v0 > 0 and v1 > 0:
            best = max(best, np.log(v0) + np.log(v1))
    return best


@pytest.mark.parametrize("seed", range(6))
def test_objective_matches_grid_oracle(seed):
    rng = np.random.default_rng(seed)
    u = rng.integers(1, 5, size=(2, 2)) / 4
    r = fractional_mnw(Instance(u))
    assert r.log_nash_welfare >= _grid_optimum(u) - 1e-6


@given(st.integers(0, 2**32 - 1))
def test_kkt_certificate(seed):
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(2, 5)), int(rng.integers(1, 30))
    inst = Instance(rng.random((n, m)))
    r = fractional_mnw(inst, 1e-6)
    assert r.kkt_gap <= 10 * 1e-6
    assert kkt_gap(inst.utilities, r.shares, 1e-6) == pytest.approx(r.kkt_gap)
    owners = round_fractional(r.shares)
    assert fpo_certificate_check(inst, owners, r.multipliers, 10 * max(r.kkt_gap, 1e-6))


def test_large_instance_converges():
    inst = Instance(np.random.default_rng(3).random((10, 2000)))
    r = fractional_mnw(inst)
    assert r.kkt_gap <= 1e-5
    np.testing.assert_allclose(r.shares.sum(axis=0), 1.0, atol=1e-9)


def test_bruteforce_prefers_positive_agents():
    inst = Instance(np.array([[1.0, 1.0], [0.0, 0.1]]))
    assert integer_mnw_bruteforce(inst).tolist() == [0, 1]
