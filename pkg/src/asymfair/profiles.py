"""Agent profiles: ordered collections of utility distributions.

Built-in profiles cover the experimental agent sets and the counterexample
constructions; user profiles are JSON arrays of distribution objects.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Sequence

from .distributions import (
    Beta,
    DensityBounds,
    UtilityDistribution,
    from_dict,
    make_peak,
    piecewise_uniform,
    uniform,
)
from .errors import DomainError


@dataclass(frozen=True)
class Profile:
    name: str
    dists: tuple

    def __post_init__(self):
        object.__setattr__(self, "dists", tuple(self.dists))
        if not self.dists:
            raise DomainError("a profile needs at least one agent")

    @property
    def n(self) -> int:
        return len(self.dists)

    def __len__(self):
        return len(self.dists)

    def __getitem__(self, i) -> UtilityDistribution:
        return self.dists[i]

    def __iter__(self):
        return iter(self.dists)

    def density_bounds(self) -> Optional[DensityBounds]:
        """Common (p, q) for the whole profile, or None if some agent has none."""
        bounds = [d.bounds for d in self.dists]
        if any(b is None for b in bounds):
            return None
        return DensityBounds(min(b.p for b in bounds), max(b.q for b in bounds))

    @property
    def non_interval_support(self) -> bool:
        return any(d.non_interval_support for d in self.dists)

    def to_json(self) -> str:
        return json.dumps([d.to_dict() for d in self.dists], indent=2)


def peak10() -> Profile:
    return Profile("peak10", [make_peak(i / 11) for i in range(1, 11)])


def beta5() -> Profile:
    shapes = [(0.5, 0.5), (1, 3), (2, 5), (2, 2), (5, 1)]
    return Profile("beta5", [Beta(float(a), float(b)) for a, b in shapes])


def symmetric_peak(a: float = 5 / 11, n: int = 10) -> Profile:
    return Profile(f"symmetric-peak{n}", [make_peak(a)] * n)


def identical_uniform(n: int = 3) -> Profile:
    return Profile(f"identical-uniform-{n}", [uniform()] * n)


def percentile_counterexample() -> Profile:
    # A skews low, B skews high; both have interval support
    a = piecewise_uniform([(0.0, 0.25, 0.5), (0.25, 1.0, 0.5)])
    b = piecewise_uniform([(0.0, 0.75, 0.5), (0.75, 1.0, 0.5)])
    return Profile("percentile-counterexample", [a, b])


def interval_counterexample() -> Profile:
    # B's support is not an interval; both multipliers = 1 is equalizing
    a = uniform(0.25, 0.75)
    b = piecewise_uniform([(0.0, 0.25, 0.5), (0.75, 1.0, 0.5)])
    return Profile("interval-counterexample", [a, b])


def rr_po_counterexample() -> Profile:
    return Profile("rr-po-counterexample", [uniform(0.6, 1.0), uniform(0.0, 1.0)])


def normalize_counterexample(n: int = 15) -> Profile:
    dists = [uniform(0.0, 1.0)] + [uniform(1 / 3, 2 / 3)] * (n - 1)
    return Profile("normalize-counterexample", dists)


_BUILTINS = {
    "peak10": peak10,
    "beta5": beta5,
    "symmetric-peak10": symmetric_peak,
    "identical-uniform-2": lambda: identical_uniform(2),
    "identical-uniform-3": lambda: identical_uniform(3),
    "percentile-counterexample": percentile_counterexample,
    "interval-counterexample": interval_counterexample,
    "rr-po-counterexample": rr_po_counterexample,
    "normalize-counterexample": normalize_counterexample,
}


def standard_profiles() -> Dict[str, Profile]:
    return {name: make() for name, make in _BUILTINS.items()}


def profile_from_list(objs: Sequence[dict], name: str = "custom") -> Profile:
    return Profile(name, [from_dict(o) for o in objs])


def load_profile(source: str) -> Profile:
    """Resolve a built-in profile name or a path to a JSON profile file."""
    if source in _BUILTINS:
        prof = _BUILTINS[source]()
    else:
        path = Path(source)
        if not path.exists():
            raise DomainError(
                f"unknown profile {source!r}: not a built-in ({', '.join(_BUILTINS)}) nor a file"
            )
        with path.open() as fh:
            objs = json.load(fh)
        if not isinstance(objs, list):
            raise DomainError(f"{path}: a profile file must hold a JSON array")
        prof = profile_from_list(objs, name=path.stem)
    if prof.non_interval_support:
        warnings.warn(
            f"profile {prof.name!r} has an agent without interval support; "
            "envy-freeness guarantees do not apply",
            stacklevel=2,
        )
    return prof
