"""Shared generators for randomized tests."""
import numpy as np

from asymfair.distributions import make_peak, uniform
from asymfair.profiles import Profile


def random_bounded_profile(rng, n_min=2, n_max=5, name="random"):
    """Random (0.1, 1.9)-bounded profile with interval supports."""
    n = int(rng.integers(n_min, n_max + 1))
    dists = []
    for _ in range(n):
        if rng.random() < 0.6:
            dists.append(make_peak(float(rng.uniform(0.05, 0.95))))
        else:
            length = float(rng.uniform(1 / 1.9, 1.0))
            lo = float(rng.uniform(0.0, 1.0 - length))
            dists.append(uniform(lo, lo + length))
    return Profile(name, dists)


def random_beta(rng, n, spread=0.5):
    return np.exp(rng.uniform(-spread, spread, size=n))


def naive_pareto_search(u, owners):
    """Exhaustive depth-2 neighbourhood: every transfer, swap and 2-for-1 trade."""
    n, m = u.shape
    owners = np.asarray(owners)
    base = np.array([np.sort(u[i, owners == i]).sum() for i in range(n)])

    def improves(new_owners):
        now = np.array([np.sort(u[i, new_owners == i]).sum() for i in range(n)])
        return np.all(now >= base) and np.any(now > base)

    for a in range(m):
        for j in range(n):
            if j != owners[a]:
                o = owners.copy()
                o[a] = j
                if improves(o):
                    return True
    for a in range(m):
        for b in range(m):
            if owners[a] != owners[b]:
                o = owners.copy()
                o[a], o[b] = owners[b], owners[a]
                if improves(o):
                    return True
    for a in range(m):
        for b in range(m):
            for c in range(b + 1, m):
                if owners[b] == owners[c] != owners[a]:
                    o = owners.copy()
                    o[a], o[b], o[c] = owners[b], owners[a], owners[a]
                    if improves(o):
                        return True
    return False
