"""Realized utility matrices and allocation containers."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DomainError


@dataclass(frozen=True, eq=False)
class Instance:
    """``utilities[i, a]`` is agent ``i``'s value for item ``a``."""

    utilities: np.ndarray
    profile: str = "custom"
    seed: Optional[int] = None

    def __post_init__(self):
        u = np.asarray(self.utilities, dtype=float)
        if u.ndim != 2 or u.shape[0] < 1:
            raise DomainError(f"utilities must be an n x m matrix with n >= 1, got shape {u.shape}")
        if u.size and (np.any(u < 0) or np.any(u > 1) or not np.all(np.isfinite(u))):
            raise DomainError("utilities must lie in [0, 1]")
        u.setflags(write=False)
        object.__setattr__(self, "utilities", u)

    @property
    def n(self) -> int:
        return self.utilities.shape[0]

    @property
    def m(self) -> int:
        return self.utilities.shape[1]

    def to_csv(self, path):
        with Path(path).open("w", newline="") as fh:
            csv.writer(fh).writerows(self.utilities.tolist())

    @classmethod
    def from_csv(cls, path, profile: str = "custom") -> "Instance":
        with Path(path).open() as fh:
            rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
        return cls(np.array(rows, dtype=float), profile=profile)


def check_allocation(instance: Instance, owners) -> np.ndarray:
    owners = np.asarray(owners)
    if owners.shape != (instance.m,):
        raise DomainError(f"allocation must assign all {instance.m} items")
    if owners.size and (owners.min() < 0 or owners.max() >= instance.n):
        raise DomainError("allocation names an agent outside [0, n)")
    return owners.astype(np.int64, copy=False)


def bundle_values(instance: Instance, owners) -> np.ndarray:
    """``V[i, j] = u_i(A_j)``, agent i's value for agent j's bundle."""
    owners = check_allocation(instance, owners)
    onehot = np.zeros((instance.m, instance.n))
    onehot[np.arange(instance.m), owners] = 1.0
    return instance.utilities @ onehot


def own_values(instance: Instance, owners) -> np.ndarray:
    return np.diagonal(bundle_values(instance, owners)).copy()


def check_fractional(shares, n, m) -> np.ndarray:
    x = np.asarray(shares, dtype=float)
    if x.shape != (n, m):
        raise DomainError(f"shares must have shape {(n, m)}")
    if np.any(x < 0) or np.any(np.abs(x.sum(axis=0) - 1.0) > 1e-9):
        raise DomainError("shares must be nonnegative with unit column sums")
    return x
