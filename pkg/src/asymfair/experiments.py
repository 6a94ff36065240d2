"""Monte-Carlo experiment harness.

Every trial gets its own random stream derived from
``SeedSequence([base_seed, grid_index, trial_index])``, so results do not
depend on the worker count or on the order in which trials finish. All
algorithms in a trial see the same instance.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm

from .allocate import (
    PipelineConfig,
    max_percentile_allocation,
    multiplier_allocation,
    normalizing_multiplier_allocation,
    pipeline_multipliers,
    round_robin,
    welfare_max_allocation,
)
from .errors import AsymfairError, DomainError
from .fairness import find_pareto_improvement, fpo_certificate_check, is_ef1, is_envy_free
from .instance import Instance
from .mnw import fractional_mnw, round_fractional
from .profiles import Profile, load_profile

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
COLUMNS = ["algorithm", "m", "metric", "rate", "ci_lo", "ci_hi", "trials", "seconds"]
METRICS = ("ef", "ef1", "po_violation_found", "fpo_certified")
ALGORITHMS = ("multiplier", "welfare_max", "round_robin", "mnw", "max_percentile", "normalizing")
FIG3_GRID = (10, 20, 100, 200, 500, 1000, 2000, 5000, 10000)
FIG3_OFFSET_GRID = (13, 23, 53, 103, 203, 503, 1003)
MNW_TOLERANCE = 1e-6


def trial_seed(base_seed: int, grid_index: int, trial_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([base_seed, grid_index, trial_index])


def sample_instance(profile: Profile, m: int, seed) -> Instance:
    """Draw an ``n x m`` utility matrix; ``seed`` is an int, a sequence of
    ints, or a SeedSequence."""
    if m < 0:
        raise DomainError("m must be nonnegative")
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    rng = np.random.default_rng(seed)
    u = np.stack([d.sample(rng, m) for d in profile]) if m else np.zeros((profile.n, 0))
    return Instance(u, profile=profile.name, seed=int(seed.entropy) if np.isscalar(seed.entropy) else None)


def confidence_interval(successes: int, trials: int, level: float = 0.95) -> Tuple[float, float]:
    """Wilson score interval."""
    if trials < 1 or not 0 <= successes <= trials:
        raise DomainError("need 0 <= successes <= trials and trials >= 1")
    z = norm.ppf(0.5 + level / 2)
    phat = successes / trials
    denom = 1 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    lo, hi = max(0.0, centre - half), min(1.0, centre + half)
    if successes == 0:
        lo = 0.0
    if successes == trials:
        hi = 1.0
    return lo, hi


# ---------------------------------------------------------------------------
# configuration and results


@dataclass(frozen=True)
class ExperimentConfig:
    profile: str = "peak10"
    m_grid: Tuple[int, ...] = FIG3_GRID
    trials: int = 1000
    algorithms: Tuple[str, ...] = ("multiplier", "welfare_max", "round_robin", "mnw")
    base_seed: int = 0
    workers: int = 1
    depth: int = 2
    pipeline: PipelineConfig = PipelineConfig()

    def __post_init__(self):
        object.__setattr__(self, "m_grid", tuple(int(m) for m in self.m_grid))
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        if self.trials < 1:
            raise DomainError("trials must be at least 1")
        if any(b <= a for a, b in zip(self.m_grid, self.m_grid[1:])) or any(m < 0 for m in self.m_grid):
            raise DomainError("m grid must be strictly increasing and nonnegative")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise DomainError(f"unknown algorithms: {sorted(unknown)}")
        if self.workers < 1:
            raise DomainError("workers must be at least 1")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["m_grid"], out["algorithms"] = list(self.m_grid), list(self.algorithms)
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        obj = dict(obj)
        unknown = set(obj) - {f.name for f in fields(cls)}
        if unknown:
            raise DomainError(f"unknown experiment config keys: {sorted(unknown)}")
        if "pipeline" in obj:
            obj["pipeline"] = PipelineConfig(**obj["pipeline"])
        return cls(**obj)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError, TypeError) as exc:
            raise DomainError(f"cannot load experiment config {path}: {exc}") from exc


@dataclass
class TrialBatchResult:
    algorithm: str
    m: int
    trials: int = 0
    counts: Dict[str, int] = field(default_factory=lambda: {k: 0 for k in METRICS})
    seconds: float = 0.0
    failure: Optional[str] = None

    def rate(self, metric: str) -> float:
        return self.counts[metric] / self.trials

    def rows(self) -> List[dict]:
        out = []
        for metric in METRICS:
            lo, hi = confidence_interval(self.counts[metric], self.trials)
            out.append({
                "algorithm": self.algorithm, "m": self.m, "metric": metric,
                "rate": self.rate(metric), "ci_lo": lo, "ci_hi": hi,
                "trials": self.trials, "seconds": self.seconds,
            })
        return out


# ---------------------------------------------------------------------------
# one trial


def _allocate(name, instance, profile, beta):
    """Return ``(owners, certificate_multipliers, certificate_tolerance)``."""
    if name == "multiplier":
        return multiplier_allocation(instance, beta), beta, 0.0
    if name == "welfare_max":
        return welfare_max_allocation(instance), np.ones(instance.n), 0.0
    if name == "round_robin":
        return round_robin(instance), None, 0.0
    if name == "mnw":
        frac = fractional_mnw(instance, MNW_TOLERANCE)
        return round_fractional(frac.shares), frac.multipliers, 10 * max(frac.kkt_gap, MNW_TOLERANCE)
    if name == "max_percentile":
        return max_percentile_allocation(instance, profile), None, 0.0
    if name == "normalizing":
        return normalizing_multiplier_allocation(instance), 1.0 / instance.utilities.sum(axis=1), 0.0
    raise DomainError(f"unknown algorithm {name!r}")


def evaluate_allocation(instance, owners, beta=None, tolerance=0.0, depth=2) -> Dict[str, bool]:
    certified = beta is not None and fpo_certificate_check(instance, owners, beta, tolerance)
    # an exact certificate already rules out any Pareto improvement
    if certified and tolerance == 0.0:
        violation = False
    else:
        violation = find_pareto_improvement(instance, owners, depth) is not None
    return {
        "ef": is_envy_free(instance, owners),
        "ef1": is_ef1(instance, owners),
        "po_violation_found": violation,
        "fpo_certified": bool(certified),
    }


def _run_chunk(args):
    profile, algorithms, beta, depth, base_seed, grid_index, m, trial_indices = args
    counts = {a: {k: 0 for k in METRICS} for a in algorithms}
    seconds = {a: 0.0 for a in algorithms}
    failures = {}
    for t in trial_indices:
        instance = sample_instance(profile, m, trial_seed(base_seed, grid_index, t))
        for name in algorithms:
            if name in failures:
                continue
            start = time.perf_counter()
            try:
                owners, cert, tol = _allocate(name, instance, profile, beta)
                flags = evaluate_allocation(instance, owners, cert, tol, depth)
            except AsymfairError as exc:
                failures[name] = f"trial {t}: {exc}"
                continue
            seconds[name] += time.perf_counter() - start
            for k, v in flags.items():
                counts[name][k] += int(v)
    return grid_index, len(trial_indices), counts, seconds, failures


def run_experiment(config: ExperimentConfig, profile: Optional[Profile] = None,
                   beta=None) -> List[TrialBatchResult]:
    """Run every (algorithm, m) cell for ``config.trials`` trials.

    The multiplier algorithm's ``beta`` is solved once for the profile
    unless supplied. Cells whose allocator raises are logged and dropped.
    """
    profile = profile or load_profile(config.profile)
    if "multiplier" in config.algorithms and beta is None:
        beta, trace = pipeline_multipliers(profile, config.pipeline)
        log.info("multipliers solved: %d rounds, %d oracle queries", trace.iterations, trace.queries)
    chunk = max(1, math.ceil(config.trials / (4 * config.workers)))
    jobs = []
    for g, m in enumerate(config.m_grid):
        for lo in range(0, config.trials, chunk):
            idx = list(range(lo, min(config.trials, lo + chunk)))
            jobs.append((profile, config.algorithms, beta, config.depth, config.base_seed, g, m, idx))
    cells = {(a, g): TrialBatchResult(a, m) for g, m in enumerate(config.m_grid)
             for a in config.algorithms}
    if config.workers == 1:
        outputs = map(_run_chunk, jobs)
        pool = None
    else:
        pool = ProcessPoolExecutor(max_workers=config.workers)
        outputs = pool.map(_run_chunk, jobs)
    try:
        for g, done, counts, seconds, failures in outputs:
            for a in config.algorithms:
                cell = cells[(a, g)]
                if a in failures:
                    cell.failure = cell.failure or failures[a]
                    continue
                cell.trials += done
                cell.seconds += seconds[a]
                for k in METRICS:
                    cell.counts[k] += counts[a][k]
    finally:
        if pool is not None:
            pool.shutdown()
    results = []
    for g, m in enumerate(config.m_grid):
        for a in config.algorithms:
            cell = cells[(a, g)]
            if cell.failure:
                log.error("cell (%s, m=%d) aborted: %s", a, m, cell.failure)
                continue
            results.append(cell)
    for a in config.algorithms:
        check_monotone(results, a, "ef")
    return results


def check_monotone(results: Sequence[TrialBatchResult], algorithm: str, metric: str) -> bool:
    """Warn when a rate drops along the m grid by more than the CIs allow."""
    cells = sorted((r for r in results if r.algorithm == algorithm), key=lambda r: r.m)
    ok = True
    for a, b in zip(cells, cells[1:]):
        lo_a, _ = confidence_interval(a.counts[metric], a.trials)
        _, hi_b = confidence_interval(b.counts[metric], b.trials)
        if hi_b < lo_a:
            log.warning("%s %s rate drops from m=%d to m=%d beyond CI overlap",
                        algorithm, metric, a.m, b.m)
            ok = False
    return ok


# ---------------------------------------------------------------------------
# serialization


def result_rows(results: Sequence[TrialBatchResult]) -> List[dict]:
    return [row for r in results for row in r.rows()]


def _fmt(v):
    return repr(float(v)) if isinstance(v, float) else str(v)


def emit_results(results: Sequence[TrialBatchResult], path, format: str = "csv") -> Path:
    """Write one row per (algorithm, m, metric); ``format`` is csv or json."""
    if format not in ("csv", "json"):
        raise DomainError(f"unknown format {format!r}")
    path = Path(path)
    rows = result_rows(results)
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in COLUMNS])
        text = buf.getvalue()
    else:
        text = json.dumps({"schema_version": SCHEMA_VERSION, "columns": COLUMNS, "rows": rows},
                          indent=1) + "\n"
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    return path


def parse_results(path) -> List[TrialBatchResult]:
    """Inverse of ``emit_results`` (either format)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read results from {path}: {exc}") from exc
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise DomainError(f"{path}: unsupported schema version {doc.get('schema_version')}")
        rows = doc["rows"]
    else:
        rows = list(csv.DictReader(io.StringIO(text)))
    cells: Dict[Tuple[str, int], TrialBatchResult] = {}
    for row in rows:
        key = (row["algorithm"], int(row["m"]))
        cell = cells.setdefault(key, TrialBatchResult(key[0], key[1]))
        cell.trials = int(row["trials"])
        cell.seconds = float(row["seconds"])
        cell.counts[row["metric"]] = round(float(row["rate"]) * cell.trials)
    return list(cells.values())
