"""Resulting probabilities and conditional expected utilities.

For multipliers ``beta`` agent ``i``'s resulting probability is the chance
that ``beta_i u_i`` is the largest scaled utility, i.e.

    p_i(beta) = int f_i(u) prod_{j != i} F_j(beta_i / beta_j * u) du.

All integrals here are products of one density, optional powers of ``u``
and CDFs / partial moments of the other agents evaluated at scaled
arguments. They are computed in one batched adaptive quadrature call with
panel edges at every scaled breakpoint. Agents with an unbounded density
are integrated in quantile space (``u = F_i^{-1}(t)``), which removes the
singularity.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from .errors import DegenerateError, DomainError
from .profiles import Profile
from .quadrature import integrate_batch

QUAD_ATOL = 1e-8
_NONE, _CDF, _MOMENT = 0, 1, 2


def _check_beta(beta, n):
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (n,):
        raise DomainError(f"expected {n} multipliers, got shape {beta.shape}")
    if not np.all(np.isfinite(beta)) or np.any(beta <= 0):
        raise DomainError("multipliers must be finite and strictly positive")
    return beta


def _ratio_matrix(beta):
    # R[i, k] = beta_i / beta_k, computed from logs so c * beta gives the same bits
    lb = np.log(beta)
    return np.exp(lb[:, None] - lb[None, :])


@dataclass(frozen=True)
class _Term:
    """``int u^power f_outer(u) prod_k g_k(R[outer, k] u) du``."""

    outer: int
    power: int
    factors: Dict[int, int]  # agent -> _CDF | _MOMENT


def _integrate_terms(profile: Profile, beta, terms: Sequence[_Term], atol=QUAD_ATOL):
    n = profile.n
    R = _ratio_matrix(beta)
    dists = profile.dists
    outer = np.array([t.outer for t in terms])
    power = np.array([t.power for t in terms], dtype=float)
    kindmat = np.zeros((len(terms), n), dtype=int)
    for ti, t in enumerate(terms):
        for k, kind in t.factors.items():
            kindmat[ti, k] = kind
    singular = np.array([d.singular for d in dists])

    points = []
    for ti, t in enumerate(terms):
        d = dists[t.outer]
        sup = d.support
        pts = [sup.lo, sup.hi]
        pts.extend(d.breakpoints)
        for k in t.factors:
            pts.extend(dists[k].breakpoints / R[t.outer, k])
        pts = np.asarray(pts)
        pts = pts[(pts >= sup.lo) & (pts <= sup.hi)]
        if singular[t.outer]:
            pts = np.concatenate([[0.0, 1.0], d.cdf(pts)])
        points.append(pts)

    def func(x, tk):
        ag = outer[tk]
        u = x.copy()
        val = np.ones_like(x)
        for k in range(n):
            m = ag == k
            if not m.any():
                continue
            if singular[k]:
                u[m] = dists[k].ppf(x[m])
            else:
                val[m] = dists[k].pdf(x[m])
        pw = power[tk]
        val = np.where(pw == 1.0, val * u, val)
        kinds = kindmat[tk]
        for k in range(n):
            col = kinds[:, k]
            m = col == _CDF
            if m.any():
                val[m] *= dists[k].cdf(R[ag[m], k] * u[m])
            m = col == _MOMENT
            if m.any():
                val[m] *= dists[k].partial_moment(R[ag[m], k] * u[m])
        return val

    values, _ = integrate_batch(func, points, atol=atol)
    return values


def _win_terms(n, agents, power=0):
    return [_Term(i, power, {k: _CDF for k in range(n) if k != i}) for i in agents]


# ---------------------------------------------------------------------------
# oracle


class ProbabilityOracle:
    """Callable returning the full probability vector for given multipliers.

    ``method`` is ``"quadrature"`` (default) or ``"monte_carlo"``. The Monte
    Carlo oracle draws its samples once (common random numbers), so it is a
    deterministic function of ``beta``. ``queries`` counts per-agent
    probability evaluations: each full-vector call adds ``n``.
    """

    def __init__(self, profile: Profile, method: str = "quadrature", samples: int = 10**6,
                 seed: int = 0, atol: float = QUAD_ATOL):
        if method not in ("quadrature", "monte_carlo"):
            raise DomainError(f"unknown oracle method {method!r}")
        self.profile = profile
        self.method = method
        self.samples = int(samples)
        self.seed = seed
        self.atol = atol
        self._queries = 0
        self._lock = threading.Lock()
        self._draws = None

    @property
    def n(self) -> int:
        return self.profile.n

    @property
    def queries(self) -> int:
        return self._queries

    def reset(self):
        with self._lock:
            self._queries = 0

    def _mc_draws(self):
        if self._draws is None:
            rng = np.random.default_rng(self.seed)
            self._draws = np.stack([d.sample(rng, self.samples) for d in self.profile])
        return self._draws

    def __call__(self, beta) -> np.ndarray:
        beta = _check_beta(beta, self.n)
        if self.method == "quadrature":
            probs = _probabilities_quad(self.profile, beta, self.atol)
        else:
            probs = _mc_frequencies(self._mc_draws(), beta)
        with self._lock:
            self._queries += self.n
        return probs


def _probabilities_quad(profile, beta, atol=QUAD_ATOL):
    n = profile.n
    if n == 1:
        return np.ones(1)
    return _integrate_terms(profile, beta, _win_terms(n, range(n)), atol)


def _mc_frequencies(draws, beta):
    winners = np.argmax(beta[:, None] * draws, axis=0)  # ties -> lowest index
    return np.bincount(winners, minlength=len(beta)) / draws.shape[1]


def resulting_probabilities(oracle, beta) -> np.ndarray:
    """Probability vector at ``beta``; ``oracle`` may also be a bare Profile."""
    if isinstance(oracle, Profile):
        oracle = ProbabilityOracle(oracle)
    return oracle(beta)


def resulting_probabilities_mc(profile: Profile, beta, samples: int,
                               rng: np.random.Generator, chunk: int = 1 << 17) -> np.ndarray:
    """Empirical winning frequencies of ``argmax_i beta_i u_i`` over fresh draws."""
    if samples < 1:
        raise DomainError("need at least one sample")
    beta = _check_beta(beta, profile.n)
    counts = np.zeros(profile.n)
    left = samples
    while left > 0:
        size = min(chunk, left)
        draws = np.stack([d.sample(rng, size) for d in profile])
        counts += _mc_frequencies(draws, beta) * size
        left -= size
    return counts / samples


def mc_stderr(samples: int) -> float:
    """Worst-case binomial standard error of a frequency estimate."""
    return math.sqrt(0.25 / samples)


# ---------------------------------------------------------------------------
# conditional expectations

_DEGENERATE = 1e-12


def expected_utility_given_win(profile: Profile, beta, i: int, atol=QUAD_ATOL) -> float:
    """E[u_i | agent i has the largest scaled utility]."""
    n = profile.n
    beta = _check_beta(beta, n)
    if n == 1:
        return profile[0].mean()
    mass, moment = _integrate_terms(
        profile, beta, _win_terms(n, [i], 0) + _win_terms(n, [i], 1), atol
    )
    if mass < _DEGENERATE:
        raise DegenerateError(f"agent {i} wins with probability {mass:.3g}")
    return float(moment / mass)


def expected_utility_given_other_wins(profile: Profile, beta, i: int, j: int,
                                      atol=QUAD_ATOL) -> float:
    """E[u_i | agent j has the largest scaled utility], for i != j.

    Integrates over j's winning value ``v``; the inner integral over ``u_i``
    is the closed-form partial first moment of agent i's distribution.
    """
    n = profile.n
    if i == j:
        raise DomainError("need i != j")
    beta = _check_beta(beta, n)
    cond = {k: _CDF for k in range(n) if k != j}
    inner = dict(cond)
    inner[i] = _MOMENT
    mass, moment = _integrate_terms(profile, beta, [_Term(j, 0, cond), _Term(j, 0, inner)], atol)
    if mass < _DEGENERATE:
        raise DegenerateError(f"agent {j} wins with probability {mass:.3g}")
    return float(moment / mass)


def expected_utility_given_beats(profile: Profile, beta, i: int, j: int,
                                 atol=QUAD_ATOL) -> float:
    """E[u_i | beta_i u_i >= beta_j u_j] (pairwise comparison only)."""
    beta = _check_beta(beta, profile.n)
    mass, moment = _integrate_terms(
        profile, beta, [_Term(i, 0, {j: _CDF}), _Term(i, 1, {j: _CDF})], atol
    )
    if mass < _DEGENERATE:
        raise DegenerateError(f"agent {i} never beats agent {j}")
    return float(moment / mass)


# ---------------------------------------------------------------------------
# gap constant


@dataclass(frozen=True)
class GapConstant:
    overlap: float  # L_q: lower bound on support overlap length
    slope: float  # D_{p,q}: lower bound on the comparison CDF's slope
    mass_gap: float  # G_{p,q}
    value: float  # C_{p,q}


def gap_constant_terms(p: float, q: float) -> GapConstant:
    if not (p > 0 and q >= p):
        raise DomainError(f"need 0 < p <= q, got p={p}, q={q}")
    overlap = 1.0 / (16.0 * q * q)
    slope = p / (4.0 * q)
    mass_gap = p * overlap**2 * slope / 16.0
    return GapConstant(overlap, slope, mass_gap, overlap * mass_gap / 4.0)


def gap_constant(p: float, q: float) -> float:
    """Lower bound on the expected-utility gap for (p, q)-bounded profiles,
    ``p**2 / (2**20 * q**7)``."""
    if not (p > 0 and q >= p):
        raise DomainError(f"need 0 < p <= q, got p={p}, q={q}")
    return p * p / (2.0**20 * q**7)
