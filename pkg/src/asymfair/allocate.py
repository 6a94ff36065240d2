"""Allocation algorithms.

Allocations are integer arrays ``owners`` of length ``m``; ties always go
to the lowest agent index (``np.argmax`` semantics).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateError, DomainError
from .instance import Instance
from .mnw import fractional_mnw, round_fractional
from .probability import ProbabilityOracle, gap_constant
from .profiles import Profile
from .solver import SolverConfig, equalize_annealed

log = logging.getLogger(__name__)


def multiplier_allocation(instance: Instance, beta) -> np.ndarray:
    """Each item goes to the agent with the largest ``beta_i * u_i(item)``."""
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (instance.n,) or np.any(beta <= 0) or not np.all(np.isfinite(beta)):
        raise DomainError(f"need {instance.n} finite positive multipliers")
    return np.argmax(beta[:, None] * instance.utilities, axis=0)


def welfare_max_allocation(instance: Instance) -> np.ndarray:
    return np.argmax(instance.utilities, axis=0)


def round_robin(instance: Instance) -> np.ndarray:
    """Agents 0..n-1 pick in turn, each taking their favourite remaining item.

    Only each agent's ranking of the items matters; among equal values the
    lower item index is preferred.
    """
    n, m = instance.n, instance.m
    prefs = np.argsort(-instance.utilities, axis=1, kind="stable")
    owners = np.full(m, -1, dtype=np.int64)
    cursor = np.zeros(n, dtype=np.int64)
    for turn in range(m):
        i = turn % n
        row, c = prefs[i], cursor[i]
        while owners[row[c]] >= 0:
            c += 1
        owners[row[c]] = i
        cursor[i] = c + 1
    return owners


def max_percentile_allocation(instance: Instance, profile: Profile) -> np.ndarray:
    """Each item goes to the agent for whom it sits at the highest quantile."""
    if profile.n != instance.n:
        raise DomainError("profile and instance disagree on the number of agents")
    pct = np.stack([d.cdf(row) for d, row in zip(profile, instance.utilities)])
    return np.argmax(pct, axis=0)


def normalizing_multiplier_allocation(instance: Instance) -> np.ndarray:
    """Multiplier allocation with ``beta_i = 1 / u_i(all items)``."""
    totals = instance.utilities.sum(axis=1)
    if np.any(totals <= 0):
        raise DegenerateError("an agent has zero total utility")
    return multiplier_allocation(instance, 1.0 / totals)


def rounded_mnw_allocation(instance: Instance, tolerance: float = 1e-6) -> np.ndarray:
    return round_fractional(fractional_mnw(instance, tolerance).shares)


# ---------------------------------------------------------------------------
# end-to-end pipeline


@dataclass(frozen=True)
class PipelineConfig:
    """Accuracy settings for the approximate-multiplier pipeline.

    ``p``/``q`` override the profile's density bounds (required for
    profiles without them). The target accuracy is
    ``min(max(C(p, q) / (4 n), delta_floor), 1 / (4 n))``.
    """

    p: Optional[float] = None
    q: Optional[float] = None
    delta_floor: float = 1e-6
    delta: Optional[float] = None  # explicit override of the computed target


def pipeline_bounds(profile: Profile, config: PipelineConfig):
    bounds = profile.density_bounds()
    p = config.p if config.p is not None else (bounds.p if bounds else None)
    q = config.q if config.q is not None else (bounds.q if bounds else None)
    if p is None or q is None:
        raise DomainError(f"profile {profile.name!r} declares no density bounds; pass p and q")
    return p, q


def theoretical_delta(p: float, q: float, n: int) -> float:
    return min(gap_constant(p, q) / (4 * n), 1.0 / (4 * n))


def pipeline_delta(profile: Profile, config: PipelineConfig) -> float:
    if config.delta is not None:
        return config.delta
    p, q = pipeline_bounds(profile, config)
    n = profile.n
    return min(max(gap_constant(p, q) / (4 * n), config.delta_floor), 1.0 / (4 * n))


def pipeline_multipliers(profile: Profile, config: PipelineConfig = PipelineConfig(),
                         oracle: Optional[ProbabilityOracle] = None):
    """Solve for the profile's multipliers once; returns ``(beta, trace)``.

    With an explicit ``config.delta`` only ``q`` is needed.
    """
    if config.delta is not None and config.q is not None:
        q, delta = config.q, config.delta
    else:
        p, q = pipeline_bounds(profile, config)
        delta = pipeline_delta(profile, config)
        log.info("pipeline delta %.3g (theoretical %.3g)", delta, theoretical_delta(p, q, profile.n))
    oracle = oracle or ProbabilityOracle(profile)
    return equalize_annealed(oracle, SolverConfig(delta=delta, q_bound=q, record=False))


def approximate_multiplier_pipeline(profile: Profile, instance: Instance,
                                    config: PipelineConfig = PipelineConfig(), beta=None):
    """Equalize the profile's probabilities, then allocate by multipliers.

    Pass precomputed ``beta`` to skip the solve (it depends only on the
    profile). Returns ``(owners, beta)``.
    """
    if profile.n != instance.n:
        raise DomainError("profile and instance disagree on the number of agents")
    if profile.non_interval_support:
        log.warning("profile %r has non-interval support; envy-freeness is not guaranteed",
                    profile.name)
    if beta is None:
        beta, _ = pipeline_multipliers(profile, config)
    return multiplier_allocation(instance, beta), np.asarray(beta, dtype=float)
