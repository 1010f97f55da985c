"""Bounded non-negative latent-utility distributions.

Every distribution samples by inverse transform, so a stream of uniform
variates maps to utilities deterministically.  All methods accept scalars or
numpy arrays.

The truncated power law uses density proportional to ``x ** -alpha`` on
``[xmin, xmax]`` with ``alpha > 1``.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy.special import ndtr, ndtri

from .exceptions import AssumptionViolation, ValidationError
from .numerics import adaptive_simpson
from .validation import check_count, check_probability

_SQRT2PI = math.sqrt(2.0 * math.pi)
DENSITY_GRID = 10_001


class UtilityDistribution:
    """Shared behaviour; subclasses provide ``lo``, ``hi``, pdf, cdf and quantile."""

    lo: float
    hi: float

    @property
    def bounded(self):
        return math.isfinite(self.hi)

    def sample(self, rng, count):
        count = check_count(count, name="count")
        return self.quantile(rng.random(count))

    def sup_support(self):
        return self.hi

    def mean(self):
        if not self.bounded:
            return self.partial_expectation(self.lo)
        return adaptive_simpson(lambda x: x * float(self.pdf(x)), self.lo, self.hi, tol=1e-11)

    def range_lower_bound(self):
        """Smallest possible unconstrained utility ratio, mean / sup of support."""
        return self.mean() / self.hi

    def to_dict(self):
        raise NotImplementedError


def _check_support(lo, hi):
    if not (math.isfinite(lo) and lo >= 0):
        raise ValidationError(f"lower end of support must be finite and >= 0, got {lo}")
    if not hi > lo:
        raise ValidationError(f"support must satisfy lo < hi, got [{lo}, {hi}]")


@dataclass(frozen=True)
class Uniform(UtilityDistribution):
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        _check_support(self.lo, self.hi)
        if not math.isfinite(self.hi):
            raise ValidationError("uniform distribution needs a finite upper end")

    def pdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        return np.where((x >= self.lo) & (x <= self.hi), 1.0 / (self.hi - self.lo), 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        return np.clip((x - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def quantile(self, q):
        q = check_probability(q)
        return np.where(q >= 1.0, self.hi, self.lo + (self.hi - self.lo) * q)

    def mean(self):
        return 0.5 * (self.lo + self.hi)

    def partial_expectation(self, z):
        z = np.clip(np.asarray(z, dtype=np.float64), self.lo, self.hi)
        return (self.hi**2 - z**2) / (2.0 * (self.hi - self.lo))

    def to_dict(self):
        return {"kind": "uniform", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class TruncatedNormal(UtilityDistribution):
    mu: float = 0.5
    sigma: float = 0.2
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        _check_support(self.lo, self.hi)
        if not self.sigma > 0:
            raise ValidationError("sigma must be positive")
        if not self._mass() > 0:
            raise ValidationError("truncation interval carries no normal mass")

    def _std(self, x):
        return (np.asarray(x, dtype=np.float64) - self.mu) / self.sigma

    def _mass(self):
        return float(ndtr(self._std(self.hi)) - ndtr(self._std(self.lo)))

    def pdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        z = self._std(x)
        dens = np.exp(-0.5 * z * z) / (_SQRT2PI * self.sigma * self._mass())
        return np.where((x >= self.lo) & (x <= self.hi), dens, 0.0)

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=np.float64), self.lo, self.hi)
        num = ndtr(self._std(x)) - ndtr(self._std(self.lo))
        return np.clip(num / self._mass(), 0.0, 1.0)

    def quantile(self, q):
        q = check_probability(q)
        a = ndtr(self._std(self.lo))
        x = self.mu + self.sigma * ndtri(a + q * self._mass())
        x = np.clip(x, self.lo, self.hi)
        # Newton polish against the cdf
        for _ in range(2):
            dens = self.pdf(x)
            step = np.where(dens > 0, (self.cdf(x) - q) / np.where(dens > 0, dens, 1.0), 0.0)
            x = np.clip(x - step, self.lo, self.hi)
        x = np.where(q <= 0.0, self.lo, x)
        return np.where(q >= 1.0, self.hi, x)

    def partial_expectation(self, z):
        """``integral_z^hi x * pdf(x) dx`` in closed form."""
        z = np.clip(np.asarray(z, dtype=np.float64), self.lo, self.hi)
        a, b = self._std(z), self._std(self.hi)
        phi = lambda t: np.exp(-0.5 * t * t) / _SQRT2PI  # noqa: E731
        phib = 0.0 if not self.bounded else phi(b)
        num = self.mu * (ndtr(b) - ndtr(a)) + self.sigma * (phi(a) - phib)
        return num / self._mass()

    def to_dict(self):
        return {"kind": "trunc_normal", "mu": self.mu, "sigma": self.sigma, "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class TruncatedPowerLaw(UtilityDistribution):
    """Density proportional to ``x ** -alpha`` on ``[xmin, xmax]``, ``alpha > 1``."""

    alpha: float = 2.0
    xmin: float = 1.0
    xmax: float = 10.0

    def __post_init__(self):
        if not self.xmin > 0:
            raise ValidationError("xmin must be positive")
        _check_support(self.xmin, self.xmax)
        if not self.alpha > 1:
            raise ValidationError("alpha must exceed 1")

    @property
    def lo(self):
        return self.xmin

    @property
    def hi(self):
        return self.xmax

    def _tail(self, x):
        # x ** (1 - alpha), which vanishes at infinity
        return np.power(np.asarray(x, dtype=np.float64), 1.0 - self.alpha)

    def _norm(self):
        return float(self._tail(self.xmin) - self._tail(self.xmax))

    def pdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        c = (self.alpha - 1.0) / self._norm()
        inside = (x >= self.xmin) & (x <= self.xmax)
        return np.where(inside, c * np.power(np.where(inside, x, 1.0), -self.alpha), 0.0)

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=np.float64), self.xmin, self.xmax)
        return np.clip((self._tail(self.xmin) - self._tail(x)) / self._norm(), 0.0, 1.0)

    def quantile(self, q):
        q = check_probability(q)
        inner = self._tail(self.xmin) - q * self._norm()
        with np.errstate(divide="ignore"):
            x = np.power(inner, 1.0 / (1.0 - self.alpha))
        x = np.clip(x, self.xmin, self.xmax)
        x = np.where(q <= 0.0, self.xmin, x)
        return np.where(q >= 1.0, self.xmax, x)

    def partial_expectation(self, z):
        z = np.clip(np.asarray(z, dtype=np.float64), self.xmin, self.xmax)
        c = (self.alpha - 1.0) / self._norm()
        if self.alpha == 2.0:
            return c * (np.log(self.xmax) - np.log(z))
        if not self.bounded and self.alpha <= 2.0:
            return np.full_like(z, np.inf)
        return c * (np.power(self.xmax, 2.0 - self.alpha) - np.power(z, 2.0 - self.alpha)) / (2.0 - self.alpha)

    def mean(self):
        if not self.bounded:
            return float(self.partial_expectation(self.xmin))
        return super().mean()

    def to_dict(self):
        return {"kind": "trunc_powerlaw", "alpha": self.alpha, "xmin": self.xmin, "xmax": self.xmax}


# -- module-level operations -------------------------------------------------


def sample(dist, rng, count):
    return dist.sample(rng, count)


def quantile(dist, q):
    return dist.quantile(q)


def pdf(dist, x):
    return dist.pdf(x)


def cdf(dist, x):
    return dist.cdf(x)


def mean(dist):
    return dist.mean()


def sup_support(dist):
    return dist.sup_support()


def support_grid(dist, points=DENSITY_GRID):
    if not dist.bounded:
        raise AssumptionViolation("unbounded support: density bounds are unsatisfiable")
    return np.linspace(dist.lo, dist.hi, points)


@dataclass(frozen=True)
class Assumption2Params:
    """Density bound ``c``: ``c <= pdf(x) <= 1/c`` on the support."""

    c: float
    min_density: float
    max_density: float


def assumption2_c(dist, points=DENSITY_GRID):
    """Largest ``c`` with ``c <= pdf <= 1/c`` on a dense support grid."""
    grid = support_grid(dist, points)
    dens = dist.pdf(grid)
    lo, hi = float(dens.min()), float(dens.max())
    if lo <= 0:
        raise AssumptionViolation("density vanishes on the support")
    return Assumption2Params(min(lo, 1.0 / hi, 1.0), lo, hi)


def from_dict(doc):
    """Build a distribution from ``{kind, params...}``."""
    kind = doc.get("kind")
    params = {k: float(v) for k, v in doc.items() if k != "kind"}
    try:
        if kind == "uniform":
            return Uniform(**params)
        if kind == "trunc_normal":
            return TruncatedNormal(**params)
        if kind == "trunc_powerlaw":
            return TruncatedPowerLaw(**params)
    except TypeError as exc:
        raise ValidationError(f"bad parameters for {kind}: {exc}") from None
    raise ValidationError(f"unknown distribution kind {kind!r}")
