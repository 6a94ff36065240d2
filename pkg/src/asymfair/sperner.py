"""Brute-force equalizing multipliers by a Sperner-type grid search (n <= 3).

The last agent's multiplier is pinned to 1 and the others range over the
exponent box ``[-K, K]^(n-1)`` with step ``1 + eps``. Each grid point is
coloured by the agent with the largest resulting probability. At the box
faces an agent with a ``2q`` multiplier advantage cannot lose to one it
dominates, which gives the Sperner boundary condition; a panchromatic cell
then has all probabilities within ``delta`` of each other.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import DomainError, GridSearchError, SizeGuardError


def grid_parameters(n: int, delta: float, q: float):
    eps = delta / (2.0 * n * q)
    K = math.ceil(math.log(2.0 * q) / math.log1p(eps))
    return eps, K


class _Colouring:
    def __init__(self, oracle, eps):
        self.oracle = oracle
        self.step = math.log1p(eps)
        self.cache = {}

    def beta(self, point):
        return np.exp(self.step * np.array(list(point) + [0], dtype=float))

    def probs(self, point):
        p = self.cache.get(point)
        if p is None:
            p = self.cache[point] = self.oracle(self.beta(point))
        return p

    def __call__(self, point):
        return int(np.argmax(self.probs(point)))  # lowest index on ties

    def tightest(self, points):
        return min(points, key=lambda pt: np.ptp(self.probs(pt)))


def _search_line(colour, K):
    # colour(-K) is 1 and colour(K) is 0; bisect to an adjacent (1, 0) pair
    lo, hi = -K, K
    if colour((lo,)) != 1 or colour((hi,)) != 0:
        raise GridSearchError("boundary colours violate the Sperner condition; q_bound too small?")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if colour((mid,)) == 1:
            lo = mid
        else:
            hi = mid
    return [(lo,), (hi,)]


def _boundary_doors(colour, K):
    doors = []
    for y in range(-K, K):  # right face x = K
        u, v = (K, y), (K, y + 1)
        if {colour(u), colour(v)} == {0, 1}:
            doors.append((u, v, (K - 1, y)))
    for x in range(-K, K):  # top face y = K
        u, v = (x, K), (x + 1, K)
        if {colour(u), colour(v)} == {0, 1}:
            doors.append((u, v, (x, K - 1)))
    return doors


def _follow(colour, K, u, v, w, max_steps):
    inside = lambda p: -K <= p[0] <= K and -K <= p[1] <= K
    for _ in range(max_steps):
        cw = colour(w)
        if cw == 2:
            return (u, v, w)
        # the other {0, 1} edge of the triangle is the exit door
        if cw == colour(u):
            u, v, w = v, w, u
        else:
            u, v, w = u, w, v
        nxt = (u[0] + v[0] - w[0], u[1] + v[1] - w[1])
        if not inside(nxt):
            return None
        w = nxt
    return None


def _search_square(colour, K):
    cells = (2 * K) ** 2 * 2
    for u, v, w in _boundary_doors(colour, K):
        tri = _follow(colour, K, u, v, w, cells)
        if tri is not None:
            return list(tri)
    raise GridSearchError("no door path ends in a panchromatic cell; q_bound too small?")


def sperner_grid_search(oracle, delta: float, q_bound: float) -> np.ndarray:
    """Multipliers for ``n <= 3`` agents with probabilities pairwise within ``delta``.

    Returns the multipliers at the vertex of the panchromatic cell with the
    smallest probability spread; the last agent's multiplier is 1.
    """
    n = oracle.n
    if n > 3:
        raise SizeGuardError(f"grid search supports at most 3 agents, got {n}")
    if not delta > 0 or not q_bound > 0:
        raise DomainError("delta and q_bound must be positive")
    if n == 1:
        return np.ones(1)
    eps, K = grid_parameters(n, delta, q_bound)
    colour = _Colouring(oracle, eps)
    cell = _search_line(colour, K) if n == 2 else _search_square(colour, K)
    return colour.beta(colour.tightest(cell))
