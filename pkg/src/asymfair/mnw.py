"""Maximum Nash welfare: fractional solver, rounding, and an exhaustive oracle.

The fractional problem ``max sum_i log u_i(x_i)`` over per-item simplices is
the Eisenberg-Gale program of a Fisher market with unit budgets. Its dual
lives in only ``n`` dimensions: over log-multipliers ``w``,

    minimize  sum_a max_i exp(w_i) u_i(a)  -  sum_i w_i.

The inner max is smoothed to a log-sum-exp at temperature ``tau``; each
smoothed problem is solved by damped Newton steps and ``tau`` is driven
down geometrically. The shares are the softmax weights of each item's
column, so a share off the best scaled utility vanishes like
``exp(-gap / tau)``. At the optimum ``exp(w_i) = 1 / u_i(x_i)``, the
multipliers certifying fractional Pareto optimality.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, softmax

from .errors import ConvergenceError, DomainError, SizeGuardError
from .instance import Instance, check_allocation, check_fractional

KKT_SLACK = 10.0  # certificate factor on the tolerance
TAU_START = 1e-1
TAU_END = 1e-10
TAU_FACTOR = 0.1
STEPS_PER_TAU = 60


@dataclass
class FractionalResult:
    shares: np.ndarray
    utilities: np.ndarray  # u_i(x_i)
    iterations: int  # Newton steps over all temperatures
    kkt_gap: float

    @property
    def multipliers(self) -> np.ndarray:
        return 1.0 / self.utilities

    @property
    def log_nash_welfare(self) -> float:
        return float(np.sum(np.log(self.utilities)))


def kkt_gap(u: np.ndarray, shares: np.ndarray, tolerance: float) -> float:
    """Largest relative shortfall ``1 - ratio / best`` over shares above ``tolerance``,
    where ``ratio = u_i(a) / u_i(x_i)`` and ``best`` is the item's largest ratio."""
    vals = np.sum(u * shares, axis=1)
    ratio = u / vals[:, None]
    best = ratio.max(axis=0)
    live = (shares > tolerance) & (best > 0)[None, :]
    if not live.any():
        return 0.0
    rel = 1.0 - ratio / np.where(best > 0, best, 1.0)[None, :]
    return float(np.max(np.where(live, rel, 0.0)))


def _smoothed(w, logu, tau):
    a = (w[:, None] + logu) / tau
    shares = softmax(a, axis=0)
    price = np.exp(tau * logsumexp(a, axis=0))
    value = price.sum() - w.sum()
    grad = shares @ price - 1.0
    ps = shares * price
    hess = (1.0 - 1.0 / tau) * (ps @ shares.T) + np.diag(ps.sum(axis=1)) / tau
    return value, grad, hess, shares


def _newton(w, logu, tau, max_steps):
    steps = 0
    value, grad, hess, shares = _smoothed(w, logu, tau)
    gnorm = np.max(np.abs(grad))
    while steps < max_steps and gnorm > 1e-13:
        try:
            d = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            d = -grad
        decrement = -grad @ d
        flat = 1e-13 * max(1.0, abs(value))  # below this the objective is rounding noise
        t, cand = 1.0, None
        for _ in range(50):
            with np.errstate(over="ignore", invalid="ignore"):  # overshoots come back non-finite
                trial = _smoothed(w + t * d, logu, tau)
            tnorm = np.max(np.abs(trial[1]))
            if trial[0] <= value - 0.25 * t * decrement:
                cand = trial
                break
            if trial[0] <= value + flat and tnorm < 0.9 * gnorm:
                cand = trial
                break
            t *= 0.5
        if cand is None:
            break
        w = w + t * d
        value, grad, hess, shares = cand
        gnorm = np.max(np.abs(grad))
        steps += 1
    return w, shares, steps


def fractional_mnw(instance: Instance, tolerance: float = 1e-6,
                   max_iterations: int = 2000) -> FractionalResult:
    """Fractional allocation maximizing the sum of log utilities.

    Exits once every share above ``tolerance`` goes to an agent whose
    ``u_i(a) / u_i(x_i)`` is within a factor ``1 - 10 * tolerance`` of the
    item's best ratio; raises ConvergenceError if that fails.
    """
    u = instance.utilities
    n, m = u.shape
    if not tolerance > 0:
        raise DomainError("tolerance must be positive")
    if np.any(u.max(axis=1, initial=0.0) <= 0):
        raise DomainError("every agent must value some item positively")
    wanted = u.max(axis=0) > 0
    x = np.zeros((n, m))
    x[0, ~wanted] = 1.0  # items nobody values
    uw = u[:, wanted]
    with np.errstate(divide="ignore"):
        logu = np.log(uw)
    w = np.log(n / uw.sum(axis=1))  # proportional-share guess u_i(x_i) ~ u_i(M) / n
    target = KKT_SLACK * tolerance
    tau, steps = TAU_START, 0
    while True:
        w, shares, k = _newton(w, logu, tau, min(STEPS_PER_TAU, max_iterations - steps))
        steps += k
        gap = kkt_gap(uw, shares, tolerance)
        if gap <= target or tau <= TAU_END or steps >= max_iterations:
            break
        tau *= TAU_FACTOR
    if gap > target:
        raise ConvergenceError(
            f"fractional MNW stopped at KKT gap {gap:.3g} > {target:g} after {steps} Newton steps"
        )
    x[:, wanted] = shares
    vals = np.sum(u * x, axis=1)
    return FractionalResult(x, vals, steps, kkt_gap(u, x, tolerance))


def round_fractional(shares) -> np.ndarray:
    """Give each item to the agent with the largest share (lowest index on ties)."""
    x = np.asarray(shares, dtype=float)
    check_fractional(x, *x.shape)
    return np.argmax(x, axis=0)


def nash_welfare(instance: Instance, owners) -> float:
    """Product of the agents' bundle utilities."""
    owners = check_allocation(instance, owners)
    vals = np.zeros(instance.n)
    np.add.at(vals, owners, instance.utilities[owners, np.arange(instance.m)])
    return float(np.prod(vals))


def integer_mnw_bruteforce(instance: Instance) -> np.ndarray:
    """Exhaustive integral MNW for ``n <= 3`` and ``m <= 10``.

    Maximizes the number of agents with positive utility first, then the
    sum of logs among those agents.
    """
    n, m = instance.n, instance.m
    if n > 3 or m > 10:
        raise SizeGuardError(f"exhaustive MNW supports n <= 3 and m <= 10, got {n}x{m}")
    if m == 0:
        return np.zeros(0, dtype=np.int64)
    owners = np.array(list(itertools.product(range(n), repeat=m)), dtype=np.int64)
    u = instance.utilities
    gains = u[owners, np.arange(m)[None, :]]  # (alloc, m)
    vals = np.zeros((len(owners), n))
    for i in range(n):
        vals[:, i] = np.sum(np.where(owners == i, gains, 0.0), axis=1)
    positive = (vals > 0).sum(axis=1)
    with np.errstate(divide="ignore"):
        logs = np.where(vals > 0, np.log(np.where(vals > 0, vals, 1.0)), 0.0).sum(axis=1)
    best = np.lexsort((-logs, -positive))[0]
    return owners[best]
