"""Utility distributions on [0, 1].

Every distribution is immutable and evaluates vectorized over numpy arrays.
Besides pdf/cdf/sampling each kind exposes the information the quadrature
routines need: the points where the density is not smooth (``breakpoints``)
and the partial first moment ``int_0^x u f(u) du``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import special

from .errors import DomainError


@dataclass(frozen=True)
class SupportInterval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (0.0 <= self.lo < self.hi <= 1.0):
            raise DomainError(f"need 0 <= lo < hi <= 1, got [{self.lo}, {self.hi}]")

    @property
    def length(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class DensityBounds:
    """Density is within [p, q] everywhere on the support."""

    p: float
    q: float

    def __post_init__(self):
        if not (0.0 < self.p <= self.q):
            raise DomainError(f"need 0 < p <= q, got p={self.p}, q={self.q}")

    def admits_length(self, length: float, slack: float = 1e-12) -> bool:
        # unit mass forces p*len <= 1 <= q*len
        return self.p * length <= 1.0 + slack and self.q * length >= 1.0 - slack


class UtilityDistribution:
    """Nonatomic distribution on [0, 1].

    Subclasses implement ``pdf``, ``cdf``, ``ppf``, ``partial_moment`` and
    the metadata properties. ``cdf`` is total: arguments below 0 map to 0
    and above 1 map to 1.
    """

    kind: str = "abstract"

    # -- to be provided by subclasses --------------------------------------
    def pdf(self, x):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def ppf(self, u):
        raise NotImplementedError

    def partial_moment(self, x):
        """Return ``int_0^x u f(u) du`` (clamped like ``cdf``)."""
        raise NotImplementedError

    @property
    def support(self) -> SupportInterval:
        raise NotImplementedError

    @property
    def bounds(self) -> Optional[DensityBounds]:
        return None

    @property
    def breakpoints(self) -> np.ndarray:
        """Points in [0, 1] where the density is not smooth, incl. support ends."""
        raise NotImplementedError

    @property
    def non_interval_support(self) -> bool:
        return False

    @property
    def singular(self) -> bool:
        """True if the density is unbounded somewhere on [0, 1]."""
        return False

    def params(self) -> dict:
        raise NotImplementedError

    # -- shared ------------------------------------------------------------
    def mean(self) -> float:
        return float(self.partial_moment(1.0))

    def sample(self, rng: np.random.Generator, size=None):
        u = rng.random(size)
        return self.ppf(u)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": self.params()}


# ---------------------------------------------------------------------------
# peak distributions


@dataclass(frozen=True)
class Peak(UtilityDistribution):
    """Piecewise-linear density rising from 1/10 at 0 to 19/10 at ``a``,
    then falling back to 1/10 at 1."""

    a: float
    kind: str = field(default="peak", init=False, repr=False)

    BASE = 0.1
    RISE = 1.8

    def __post_init__(self):
        if not (0.0 < self.a < 1.0):
            raise DomainError(f"peak location must lie in (0, 1), got {self.a}")

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        a = self.a
        left = self.BASE + self.RISE * x / a
        right = self.BASE + self.RISE * (1.0 - x) / (1.0 - a)
        out = np.where(x <= a, left, right)
        return np.where((x < 0.0) | (x > 1.0), 0.0, out)

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        a = self.a
        y = 1.0 - x
        left = self.BASE * x + 0.5 * self.RISE * x * x / a
        right = 1.0 - self.BASE * y - 0.5 * self.RISE * y * y / (1.0 - a)
        return np.where(x <= a, left, right)

    def ppf(self, u):
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        a = self.a
        # F(a) = a; both branches are quadratics solved in rationalized form
        k_left = 2.0 * self.RISE / a
        x_left = 2.0 * u / (self.BASE + np.sqrt(self.BASE**2 + k_left * u))
        v = 1.0 - u
        k_right = 2.0 * self.RISE / (1.0 - a)
        x_right = 1.0 - 2.0 * v / (self.BASE + np.sqrt(self.BASE**2 + k_right * v))
        return np.where(u <= a, x_left, x_right)

    def partial_moment(self, x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        a = self.a
        c = self.RISE / (1.0 - a)

        def tail(t):  # int_t^1 u f(u) du on the falling branch
            return 0.5 * self.BASE * (1.0 - t * t) + c * (1.0 / 6.0 - t * t / 2.0 + t**3 / 3.0)

        left = 0.5 * self.BASE * x * x + self.RISE * x**3 / (3.0 * a)
        total = 0.5 * self.BASE * a * a + self.RISE * a * a / 3.0 + tail(a)
        right = total - tail(x)
        return np.where(x <= a, left, right)

    @property
    def support(self):
        return SupportInterval(0.0, 1.0)

    @property
    def bounds(self):
        return DensityBounds(self.BASE, self.BASE + self.RISE)

    @property
    def breakpoints(self):
        return np.array([0.0, self.a, 1.0])

    def params(self):
        return {"a": self.a}


def make_peak(a: float) -> Peak:
    return Peak(float(a))


# ---------------------------------------------------------------------------
# piecewise-uniform mixtures (plain uniform is the one-segment case)


@dataclass(frozen=True)
class PiecewiseUniform(UtilityDistribution):
    """Mixture of uniforms on disjoint segments ``(lo, hi, weight)``."""

    segments: Tuple[Tuple[float, float, float], ...]

    def __post_init__(self):
        segs = tuple(tuple(float(v) for v in s) for s in self.segments)
        if not segs:
            raise DomainError("need at least one segment")
        total = 0.0
        prev_hi = 0.0
        for lo, hi, w in segs:
            if not (0.0 <= lo < hi <= 1.0):
                raise DomainError(f"bad segment [{lo}, {hi}]")
            if lo < prev_hi:
                raise DomainError("segments must be sorted and non-overlapping")
            if w <= 0.0:
                raise DomainError("segment weights must be positive")
            prev_hi = hi
            total += w
        if abs(total - 1.0) > 1e-12:
            raise DomainError(f"segment weights sum to {total}, not 1")
        object.__setattr__(self, "segments", segs)

    @property
    def kind(self):
        return "uniform" if len(self.segments) == 1 else "piecewise_uniform"

    @property
    def _arr(self):
        return np.array(self.segments)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        last = len(self.segments) - 1
        for k, (lo, hi, w) in enumerate(self.segments):
            inside = (x >= lo) & ((x < hi) if k < last else (x <= hi))
            out = np.where(inside, w / (hi - lo), out)
        return out

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for lo, hi, w in self.segments:
            out = out + w * np.clip((x - lo) / (hi - lo), 0.0, 1.0)
        return np.minimum(out, 1.0)

    def ppf(self, u):
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        arr = self._arr
        cum = np.concatenate([[0.0], np.cumsum(arr[:, 2])])
        k = np.clip(np.searchsorted(cum, u, side="right") - 1, 0, len(arr) - 1)
        lo, hi, w = arr[k, 0], arr[k, 1], arr[k, 2]
        return np.clip(lo + (u - cum[k]) / w * (hi - lo), lo, hi)

    def partial_moment(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for lo, hi, w in self.segments:
            t = np.clip(x, lo, hi)
            out = out + w / (hi - lo) * (t * t - lo * lo) / 2.0
        return out

    @property
    def support(self):
        return SupportInterval(self.segments[0][0], self.segments[-1][1])

    @property
    def non_interval_support(self):
        return any(
            self.segments[k][1] < self.segments[k + 1][0] for k in range(len(self.segments) - 1)
        )

    @property
    def bounds(self):
        if self.non_interval_support:
            return None
        dens = [w / (hi - lo) for lo, hi, w in self.segments]
        return DensityBounds(min(dens), max(dens))

    @property
    def breakpoints(self):
        pts = sorted({v for lo, hi, _ in self.segments for v in (lo, hi)})
        return np.array(pts)

    def params(self):
        if len(self.segments) == 1:
            lo, hi, _ = self.segments[0]
            return {"lo": lo, "hi": hi}
        return {"segments": [list(s) for s in self.segments]}


def uniform(lo: float = 0.0, hi: float = 1.0) -> PiecewiseUniform:
    return PiecewiseUniform(((lo, hi, 1.0),))


def piecewise_uniform(segments: Sequence[Sequence[float]]) -> PiecewiseUniform:
    return PiecewiseUniform(tuple(tuple(s) for s in segments))


# ---------------------------------------------------------------------------
# beta


@dataclass(frozen=True)
class Beta(UtilityDistribution):
    """Beta(alpha, beta_shape). Carries no density bounds: the density may
    be unbounded at the endpoints."""

    alpha: float
    beta_shape: float
    kind: str = field(default="beta", init=False, repr=False)

    def __post_init__(self):
        if self.alpha <= 0 or self.beta_shape <= 0:
            raise DomainError("beta shape parameters must be positive")

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        a, b = self.alpha, self.beta_shape
        inside = (x > 0.0) & (x < 1.0)
        xs = np.where(inside, x, 0.5)
        logpdf = special.xlogy(a - 1, xs) + special.xlog1py(b - 1, -xs) - special.betaln(a, b)
        out = np.where(inside, np.exp(logpdf), 0.0)
        # finite endpoint values where the density is bounded
        if a == 1.0:
            out = np.where(x == 0.0, b, out)
        if b == 1.0:
            out = np.where(x == 1.0, a, out)
        return out

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        return special.betainc(self.alpha, self.beta_shape, x)

    def ppf(self, u):
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        return special.betaincinv(self.alpha, self.beta_shape, u)

    def partial_moment(self, x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        a, b = self.alpha, self.beta_shape
        return a / (a + b) * special.betainc(a + 1.0, b, x)

    def sample(self, rng, size=None):
        return rng.beta(self.alpha, self.beta_shape, size)

    @property
    def support(self):
        return SupportInterval(0.0, 1.0)

    @property
    def singular(self):
        return self.alpha < 1.0 or self.beta_shape < 1.0

    @property
    def breakpoints(self):
        return np.array([0.0, 1.0])

    def params(self):
        return {"alpha": self.alpha, "beta": self.beta_shape}


# ---------------------------------------------------------------------------
# scalar API and serialization


def pdf_at(d: UtilityDistribution, x: float) -> float:
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"pdf_at needs x in [0, 1], got {x}")
    return float(d.pdf(x))


def cdf_at(d: UtilityDistribution, x: float) -> float:
    return float(d.cdf(x))


def sample(d: UtilityDistribution, rng: np.random.Generator, size=None):
    return d.sample(rng, size)


def from_dict(obj: dict) -> UtilityDistribution:
    """Build a distribution from ``{"kind": ..., "params": {...}}``."""
    try:
        kind = obj["kind"]
        params = obj.get("params", {})
    except (TypeError, KeyError) as exc:
        raise DomainError(f"malformed distribution object: {obj!r}") from exc
    if kind == "peak":
        return make_peak(params["a"])
    if kind == "uniform":
        return uniform(params.get("lo", 0.0), params.get("hi", 1.0))
    if kind == "piecewise_uniform":
        return piecewise_uniform(params["segments"])
    if kind == "beta":
        return Beta(float(params["alpha"]), float(params["beta"]))
    raise DomainError(f"unknown distribution kind {kind!r}")
