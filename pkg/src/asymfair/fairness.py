"""Fairness and efficiency checks for integral allocations."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .errors import DomainError, SizeGuardError
from .instance import Instance, bundle_values, check_allocation

BRUTEFORCE_LIMIT = 10**6
SLACK = 1e-12  # search filters are loose; every candidate is re-verified exactly
MAX_CANDIDATES = 64


def bundle_totals(u: np.ndarray, owner_rows: np.ndarray) -> np.ndarray:
    """Own-bundle utilities for each row of an ``(k, m)`` array of allocations.

    All exact dominance comparisons go through this one routine. Values are
    summed in sorted order, so a bundle's total depends only on the multiset
    of its item values and not on item positions.
    """
    n, m = u.shape
    gains = u[owner_rows, np.arange(m)[None, :]]
    vals = np.zeros((owner_rows.shape[0], n))
    for i in range(n):
        vals[:, i] = np.sum(np.sort(np.where(owner_rows == i, gains, 0.0), axis=1), axis=1)
    return vals


def envy_matrix(instance: Instance, owners) -> np.ndarray:
    """``E[i, j] = u_i(A_j) - u_i(A_i)``; zero on the diagonal."""
    V = bundle_values(instance, owners)
    return V - np.diagonal(V)[:, None]


def is_envy_free(instance: Instance, owners) -> bool:
    return bool(np.all(envy_matrix(instance, owners) <= 0.0))


def is_ef1(instance: Instance, owners) -> bool:
    """Envy-free up to one good: dropping agent i's favourite item from any
    other bundle removes i's envy towards it."""
    owners = check_allocation(instance, owners)
    V = bundle_values(instance, owners)
    own = np.diagonal(V)
    u = instance.utilities
    for j in range(instance.n):
        mine = owners == j
        if not mine.any():
            continue
        best = u[:, mine].max(axis=1)
        if np.any(V[:, j] - best > own):
            return False
    return True


def fpo_certificate_check(instance: Instance, owners, beta, tolerance: float = 0.0) -> bool:
    """True iff every item's owner attains ``(1 - tolerance)`` of the item's
    largest ``beta_i * u_i(item)``, which certifies fractional Pareto optimality."""
    owners = check_allocation(instance, owners)
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (instance.n,) or np.any(beta <= 0):
        raise DomainError("multipliers must be positive, one per agent")
    if instance.m == 0:
        return True
    scaled = beta[:, None] * instance.utilities
    got = scaled[owners, np.arange(instance.m)]
    return bool(np.all(got >= (1.0 - tolerance) * scaled.max(axis=0)))


# ---------------------------------------------------------------------------
# neighbourhood search for Pareto improvements


@dataclass
class ParetoImprovement:
    """A trade: ``moves`` lists ``(item, from_agent, to_agent)``."""

    kind: str
    moves: List[Tuple[int, int, int]]
    deltas: np.ndarray = field(repr=False)

    def apply(self, owners) -> np.ndarray:
        out = np.array(owners, copy=True)
        for item, _, to in self.moves:
            out[item] = to
        return out


def _trade(instance, owners, kind, moves):
    after = np.array(owners, copy=True)
    for item, _, dst in moves:
        after[item] = dst
    before_v, after_v = bundle_totals(instance.utilities, np.stack([owners, after]))
    deltas = after_v - before_v
    if np.all(after_v >= before_v) and np.any(after_v > before_v):
        return ParetoImprovement(kind, list(moves), deltas)
    return None


def _find_transfer(instance, owners):
    u = instance.utilities
    m = instance.m
    held = u[owners, np.arange(m)]
    for a in np.flatnonzero(held == 0):
        others = np.flatnonzero(u[:, a] > 0)
        if others.size:
            return _trade(instance, owners, "transfer", [(int(a), int(owners[a]), int(others[0]))])
    return None


def _suffix_argmin(vals):
    """``idx[k]`` = position of the minimum of ``vals[k:]`` (first one on ties)."""
    rev = vals[::-1]
    run = np.minimum.accumulate(rev)
    # positions in rev where the running minimum is attained
    pos = np.arange(len(rev))
    last = np.maximum.accumulate(np.where(rev == run, pos, 0))
    return (len(vals) - 1 - last)[::-1]


def _find_swap(instance, owners, i, j, Ai, Aj):
    # i gives a in Ai to j, j gives g in Aj to i
    u = instance.utilities
    ui_g, uj_g = u[i, Aj], u[j, Aj]
    order = np.argsort(ui_g, kind="stable")
    keys, ujs = ui_g[order], uj_g[order]
    best = _suffix_argmin(ujs)
    for strict_i in (False, True):
        side = "right" if strict_i else "left"
        start = np.searchsorted(keys, u[i, Ai], side=side)
        ok = start < len(keys)
        k = best[np.minimum(start, len(keys) - 1)]
        cand = ujs[k]
        hit = ok & ((cand <= u[j, Ai] + SLACK) if strict_i else (cand < u[j, Ai] + SLACK))
        for t in np.flatnonzero(hit)[:MAX_CANDIDATES]:
            a, g = int(Ai[t]), int(Aj[order[k[t]]])
            found = _trade(instance, owners, "swap", [(a, i, j), (g, j, i)])
            if found is not None:
                return found
    return None


def _prefix_top2(vals):
    """Indices of the largest and second-largest entries of each prefix."""
    k = len(vals)
    first = np.zeros(k, dtype=np.int64)
    second = np.full(k, -1, dtype=np.int64)
    b1, b2 = 0, -1
    for t in range(1, k):
        if vals[t] > vals[b1]:
            b1, b2 = t, b1
        elif b2 < 0 or vals[t] > vals[b2]:
            b2 = t
        first[t], second[t] = b1, b2
    return first, second


def _find_two_for_one(instance, owners, i, j, Ai, Aj, chunk=1 << 20):
    """Agent i gives one item a to j and receives two items g1, g2 from j.

    Two passes cover every improving trade: the best receiver gain subject
    to the giver not losing, and the least giver loss subject to the
    receiver not losing. Only g1 with u_j(g1) <= u_j(a) can take part. For
    each (a, g1) the best g2 comes from a binary search plus a prefix top-2
    table (top-2 so that g2 != g1).
    """
    if len(Aj) < 2 or len(Ai) < 1:
        return None
    u = instance.utilities
    ui_g, uj_g = u[i, Aj], u[j, Aj]
    k = len(Aj)

    # g's sorted by u_j; pass A picks g2 with u_j(g2) <= budget maximizing u_i(g2)
    order = np.argsort(uj_g, kind="stable")
    rank = np.empty(k, dtype=np.int64)
    rank[order] = np.arange(k)
    keys = uj_g[order]
    vals = ui_g[order]
    first, second = _prefix_top2(vals)
    # g's sorted by u_i; pass B picks g2 with u_i(g2) >= need minimizing u_j(g2)
    order_b = np.argsort(ui_g, kind="stable")
    rank_b = np.empty(k, dtype=np.int64)
    rank_b[order_b] = np.arange(k)
    keys_b = ui_g[order_b]
    vals_b = -uj_g[order_b][::-1]
    first_b, second_b = _prefix_top2(vals_b)  # on the reversed order

    # admissible g1 for each a: a prefix of ``order``
    A = Ai[np.argsort(-u[j, Ai], kind="stable")]  # most receiver budget first
    counts = np.searchsorted(keys, u[j, A] + SLACK, side="right")
    ends = np.cumsum(counts)

    def candidates(r0, r1):
        cnt = counts[r0:r1]
        rows = np.repeat(np.arange(r0, r1), cnt)
        base = ends[r0:r1] - cnt
        pos = np.arange(ends[r1 - 1] - base[0]) - np.repeat(base - base[0], cnt)
        return rows, order[pos]

    def pass_a(rows, g1):
        a = A[rows]
        budget = u[j, a] - uj_g[g1] + SLACK
        top = np.searchsorted(keys, budget, side="right") - 1
        valid = top >= 0
        topc = np.maximum(top, 0)
        pick = first[topc]
        pick = np.where(pick == rank[g1], second[topc], pick)
        valid &= pick >= 0
        gain = ui_g[g1] + np.where(valid, vals[np.maximum(pick, 0)], -np.inf) - u[i, a]
        hits = np.flatnonzero(valid & (gain > -SLACK))[:MAX_CANDIDATES]
        return [(a[h], g1[h], order[pick[h]]) for h in hits]

    def pass_b(rows, g1):
        a = A[rows]
        need = u[i, a] - ui_g[g1] - SLACK
        start = np.searchsorted(keys_b, need, side="left")
        valid = start < k
        # the suffix [start, k) of order_b is the prefix [0, k - start) reversed
        topr = np.maximum(k - 1 - start, 0)
        pick = first_b[topr]
        pick = np.where(pick == k - 1 - rank_b[g1], second_b[topr], pick)
        valid &= pick >= 0
        least = np.where(valid, -vals_b[np.maximum(pick, 0)], np.inf)
        gain = u[j, a] - uj_g[g1] - least
        hits = np.flatnonzero(valid & (gain > -SLACK))[:MAX_CANDIDATES]
        return [(a[h], g1[h], order_b[k - 1 - pick[h]]) for h in hits]

    r0, budget_rows = 0, 64
    while r0 < len(A):
        # grow the block geometrically, capped at ``chunk`` candidate pairs
        r1 = r0 + 1
        limit = (ends[r0] - counts[r0]) + min(chunk, budget_rows * k)
        r1 = max(r1, int(np.searchsorted(ends, limit, side="right")))
        r1 = min(r1, len(A))
        if ends[r1 - 1] > ends[r0] - counts[r0]:
            rows, g1 = candidates(r0, r1)
            for search in (pass_a, pass_b):
                for a, c1, c2 in search(rows, g1):
                    found = _trade(instance, owners, "two_for_one",
                                   [(int(a), i, j), (int(Aj[c1]), j, i), (int(Aj[c2]), j, i)])
                    if found is not None:
                        return found
        r0 = r1
        budget_rows *= 2
    return None


def find_pareto_improvement(instance: Instance, owners, depth: int = 2) -> Optional[ParetoImprovement]:
    """Search small trades for a Pareto improvement.

    Depth 1 tries single-item transfers and one-for-one swaps between two
    agents; depth 2 adds trades of one item against two. Returns the first
    improving trade found, or None. None does not prove Pareto optimality.
    """
    if depth not in (1, 2):
        raise DomainError("depth must be 1 or 2")
    owners = check_allocation(instance, owners)
    if instance.m == 0 or instance.n == 1:
        return None
    found = _find_transfer(instance, owners)
    if found is not None:
        return found
    bundles = [np.flatnonzero(owners == i) for i in range(instance.n)]
    pairs = [(i, j) for i in range(instance.n) for j in range(instance.n) if i != j]
    for i, j in pairs:
        if i < j and len(bundles[i]) and len(bundles[j]):
            found = _find_swap(instance, owners, i, j, bundles[i], bundles[j])
            if found is not None:
                return found
    if depth == 2:
        for i, j in pairs:
            found = _find_two_for_one(instance, owners, i, j, bundles[i], bundles[j])
            if found is not None:
                return found
    return None


# ---------------------------------------------------------------------------
# exact check for tiny instances


def is_pareto_optimal_bruteforce(instance: Instance, owners, chunk: int = 1 << 16) -> bool:
    """Exhaustive Pareto-optimality test over all ``n**m`` allocations."""
    owners = check_allocation(instance, owners)
    n, m = instance.n, instance.m
    if n**m > BRUTEFORCE_LIMIT:
        raise SizeGuardError(f"{n}^{m} allocations exceed the brute-force limit {BRUTEFORCE_LIMIT}")
    if m == 0:
        return True
    u = instance.utilities
    powers = n ** np.arange(m - 1, -1, -1, dtype=np.int64)

    def values(codes):
        return bundle_totals(u, (codes[:, None] // powers[None, :]) % n)

    current = bundle_totals(u, owners[None, :])[0]
    total = n**m
    for lo in range(0, total, chunk):
        vals = values(np.arange(lo, min(total, lo + chunk), dtype=np.int64))
        dominated = np.all(vals >= current, axis=1) & np.any(vals > current, axis=1)
        if dominated.any():
            return False
    return True
