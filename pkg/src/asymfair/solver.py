"""Approximately equalizing multipliers.

``equalize_fixed_eps`` runs the basic integer-exponent ascent: with
``eps = delta / (2 q)`` and ``beta = (1 + eps) ** z``, every round bumps the
exponent of each agent whose resulting probability is at most ``1/n`` until
all probabilities lie within ``delta`` of ``1/n``. ``equalize_annealed``
repeats this on a geometric schedule of accuracies, warm-starting each stage
from the previous multipliers.
"""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import DomainError, NonTerminationError
from .probability import ProbabilityOracle

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    delta: float = 1e-5
    q_bound: float = 1.9
    max_iterations: Optional[int] = None  # per stage; default 2 * T
    anneal: bool = True
    initial_delta: float = 0.1
    anneal_factor: float = 0.5
    record: bool = True  # keep per-iteration history in the trace

    def __post_init__(self):
        if not (0.0 < self.delta <= 1.0):
            raise DomainError(f"delta must lie in (0, 1], got {self.delta}")
        if not self.q_bound > 0:
            raise DomainError(f"q_bound must be positive, got {self.q_bound}")
        if not (0.0 < self.anneal_factor < 1.0):
            raise DomainError("anneal_factor must lie in (0, 1)")
        if self.max_iterations is not None and self.max_iterations < 0:
            raise DomainError("max_iterations must be nonnegative")

    @property
    def eps(self) -> float:
        return step_size(self.delta, self.q_bound)


def step_size(delta: float, q: float) -> float:
    return delta / (2.0 * q)


def iteration_bound(n: int, delta: float, q: float) -> int:
    """Worst-case number of rounds T for the fixed-step ascent from ``z = 0``."""
    eps = step_size(delta, q)
    return math.ceil(math.log(2.0 * q) / math.log1p(eps)) * max(n - 1, 0)


@dataclass
class SolverTrace:
    n: int
    delta: float
    eps: float
    iterations: int = 0
    queries: int = 0
    z_history: List[np.ndarray] = field(default_factory=list)
    prob_history: List[np.ndarray] = field(default_factory=list)
    step_sets: List[np.ndarray] = field(default_factory=list)
    final_probs: Optional[np.ndarray] = None
    final_z: Optional[np.ndarray] = None
    stages: List["SolverTrace"] = field(default_factory=list)

    @property
    def max_deviation(self) -> float:
        return float(np.max(np.abs(self.final_probs - 1.0 / self.n)))

    def to_dict(self) -> dict:
        def stage_rows(t):
            return [
                {"iteration": k, "z": z.tolist(), "probabilities": p.tolist()}
                for k, (z, p) in enumerate(zip(t.z_history, t.prob_history))
            ]

        out = {
            "n": self.n,
            "delta": self.delta,
            "eps": self.eps,
            "iterations": self.iterations,
            "oracle_queries": self.queries,
            "final_z": None if self.final_z is None else self.final_z.tolist(),
            "final_probabilities": None if self.final_probs is None else self.final_probs.tolist(),
        }
        if self.stages:
            out["stages"] = [
                {"delta": s.delta, "eps": s.eps, "iterations": s.iterations, "rows": stage_rows(s)}
                for s in self.stages
            ]
        else:
            out["rows"] = stage_rows(self)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _ascend(oracle, delta, q, z0, cap, record):
    n = oracle.n
    eps = step_size(delta, q)
    step = math.log1p(eps)
    trace = SolverTrace(n=n, delta=delta, eps=eps)
    start_queries = oracle.queries
    z = np.array(z0, dtype=np.int64)
    target = 1.0 / n
    while True:
        probs = oracle(np.exp(step * (z - z.max())))
        if record:
            trace.z_history.append(z.copy())
            trace.prob_history.append(probs)
        if not np.any(np.abs(probs - target) > delta):
            break
        if trace.iterations >= cap:
            trace.final_probs, trace.final_z = probs, z
            trace.queries = oracle.queries - start_queries
            raise NonTerminationError(
                f"no convergence within {cap} rounds at delta={delta:g}, q={q:g} "
                f"(max deviation {np.max(np.abs(probs - target)):.3g}); "
                "the density bound q may be too small for this profile",
                trace=trace,
            )
        lifted = probs <= target
        if record:
            trace.step_sets.append(np.flatnonzero(lifted))
        z = z + lifted
        trace.iterations += 1
    trace.final_probs, trace.final_z = probs, z
    trace.queries = oracle.queries - start_queries
    return z, trace


def _multipliers(z, eps):
    # normalized so the smallest multiplier is 1
    return np.exp(math.log1p(eps) * (z - z.min()))


def equalize_fixed_eps(oracle: ProbabilityOracle, config: SolverConfig, z0=None):
    """Fixed-step ascent from ``z0`` (default all zeros).

    Returns ``(beta, trace)`` with ``beta`` normalized to minimum 1. Raises
    NonTerminationError after ``2 T`` rounds (or ``config.max_iterations``).
    """
    n = oracle.n
    z0 = np.zeros(n, dtype=np.int64) if z0 is None else np.asarray(z0, dtype=np.int64)
    if z0.shape != (n,):
        raise DomainError(f"start exponents must have length {n}")
    cap = config.max_iterations
    if cap is None:
        cap = 2 * iteration_bound(n, config.delta, config.q_bound) + int(z0.max() - z0.min())
    z, trace = _ascend(oracle, config.delta, config.q_bound, z0, cap, config.record)
    return _multipliers(z, trace.eps), trace


def anneal_schedule(config: SolverConfig) -> List[float]:
    deltas = []
    d = max(config.initial_delta, config.delta)
    while d > config.delta:
        deltas.append(d)
        d *= config.anneal_factor
    deltas.append(config.delta)
    return deltas


def transfer_exponents(z, eps_old, eps_new):
    """Re-express ``(1 + eps_old) ** z`` on the ``(1 + eps_new)`` grid."""
    scale = math.log1p(eps_old) / math.log1p(eps_new)
    return np.rint(np.asarray(z, dtype=float) * scale).astype(np.int64)


def equalize_annealed(oracle: ProbabilityOracle, config: SolverConfig, z0=None):
    """Run the ascent on a decreasing accuracy schedule with warm starts.

    ``z0`` lives on the grid of the first stage. The returned trace has one
    sub-trace per stage; its ``iterations``/``queries`` are totals.
    """
    n = oracle.n
    schedule = anneal_schedule(config)
    z = np.zeros(n, dtype=np.int64) if z0 is None else np.asarray(z0, dtype=np.int64)
    total = SolverTrace(n=n, delta=config.delta, eps=config.eps)
    prev_eps = None
    for delta in schedule:
        eps = step_size(delta, config.q_bound)
        if prev_eps is not None:
            z = transfer_exponents(z, prev_eps, eps)
        z = z - z.min()
        cap = config.max_iterations
        if cap is None:
            cap = 2 * iteration_bound(n, delta, config.q_bound) + int(z.max() - z.min())
        try:
            z, stage = _ascend(oracle, delta, config.q_bound, z, cap, config.record)
        except NonTerminationError as exc:
            total.stages.append(exc.trace)
            total.iterations += exc.trace.iterations
            total.queries += exc.trace.queries
            exc.trace = total
            raise
        log.debug("stage delta=%g: %d rounds", delta, stage.iterations)
        total.stages.append(stage)
        total.iterations += stage.iterations
        total.queries += stage.queries
        prev_eps = eps
    total.final_probs = stage.final_probs
    total.final_z = z
    return _multipliers(z, prev_eps), total


def equalize(oracle: ProbabilityOracle, config: SolverConfig, z0=None):
    if config.anneal:
        return equalize_annealed(oracle, config, z0)
    return equalize_fixed_eps(oracle, config, z0)


# ---------------------------------------------------------------------------
# uniqueness


@dataclass
class UniquenessReport:
    runs: int
    delta: float
    spread: float  # max pairwise sup-distance of normalized log-multipliers
    band: float
    multipliers: List[np.ndarray]

    @property
    def passed(self) -> bool:
        return self.spread <= self.band


def _fresh_oracle(oracle: ProbabilityOracle) -> ProbabilityOracle:
    return ProbabilityOracle(oracle.profile, method=oracle.method, samples=oracle.samples,
                             seed=oracle.seed, atol=oracle.atol)


def check_uniqueness(oracle: ProbabilityOracle, runs: int, delta: float, q_bound: float = 1.9,
                     seed: int = 0, workers: int = 1) -> UniquenessReport:
    """Solve from ``runs`` random starting exponents and compare the results.

    Starts are drawn uniformly from the box of exponents whose multiplier
    ratios stay within ``2 q`` on the first annealing stage. The check passes
    when all normalized log-multipliers agree within ``10 * delta * n``.
    """
    if runs < 2:
        raise DomainError("need at least two runs")
    n = oracle.n
    config = SolverConfig(delta=delta, q_bound=q_bound, record=False)
    eps0 = step_size(anneal_schedule(config)[0], q_bound)
    K = math.ceil(math.log(2.0 * q_bound) / math.log1p(eps0))
    rng = np.random.default_rng(seed)
    starts = [rng.integers(-K, K + 1, size=n) for _ in range(runs)]

    def solve(z0):
        beta, _ = equalize_annealed(_fresh_oracle(oracle), config, z0)
        return beta / beta[0]

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        betas = list(pool.map(solve, starts))
    logs = np.log(np.stack(betas))
    spread = float(np.max(np.abs(logs[:, None, :] - logs[None, :, :]))) if n > 1 else 0.0
    return UniquenessReport(runs, delta, spread, 10.0 * delta * n, betas)
