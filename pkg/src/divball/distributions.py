"""Parametric families used as nominal and alternative models.

Every model lives on a half-line [support_min, inf), exposes its density,
the exponent of the density in exponential form (``f = exp(-phi)``), CDF /
survival / quantile functions, numeric moments with divergence detection,
and -- for the heavy-but-not-fat-tailed families -- the concave surrogate
machinery (:class:`PhiFamily`) used to build tail-adaptive divergences.

Closed forms are used wherever they exist; the log-density exponent is
always computed directly, never by taking the log of a possibly
underflowed density.
"""

import abc
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import special
from scipy.optimize import brentq
from scipy.stats import gennorm

from .errors import UnsupportedFamilyError
from .quadrature import QuadratureConfig, integrate_semi_infinite

__all__ = [
    "DistributionModel",
    "Exponential",
    "HalfGaussian",
    "Weibull",
    "GeneralizedLognormal",
    "Pareto",
    "TruncatedAbove",
    "PhiFamily",
    "GrowthScale",
    "weibull_phi_family",
    "generalized_lognormal_phi_family",
]


@dataclass(frozen=True)
class GrowthScale:
    """Leading growth of the log-density exponent.

    ``kind`` is ``"power"`` (phi ~ coeff * x**degree) or ``"log_power"``
    (phi ~ coeff * log(x)**degree).  Used for symbolic tail-limit
    computations; truncation does not change it.
    """

    kind: str
    degree: float
    coeff: float


class PhiFamily:
    """Concave, increasing surrogate for the log-density exponent.

    Parametrized by the surrogate itself plus the log-space description of
    its inverse: ``log_inverse(z) = log(inverse(z))`` and the first two
    derivatives of ``log_inverse``.  The plain inverse and its derivatives
    are derived from these, which keeps evaluations stable for the very
    large arguments that tail diagnostics require.
    """

    def __init__(self, phi, log_inverse, dlog_inverse, d2log_inverse, x_bar):
        self._phi = phi
        self._log_inverse = log_inverse
        self._dlog = dlog_inverse
        self._d2log = d2log_inverse
        self.x_bar = float(x_bar)

    def phi(self, x):
        return self._phi(np.asarray(x, dtype=float))

    def log_phi_inverse(self, z):
        return self._log_inverse(np.asarray(z, dtype=float))

    def dlog_phi_inverse(self, z):
        return self._dlog(np.asarray(z, dtype=float))

    def d2log_phi_inverse(self, z):
        return self._d2log(np.asarray(z, dtype=float))

    def phi_inverse(self, z):
        return np.exp(self.log_phi_inverse(z))

    def phi_inverse_prime(self, z):
        return self.phi_inverse(z) * self.dlog_phi_inverse(z)

    def phi_inverse_second(self, z):
        d = self.dlog_phi_inverse(z)
        return self.phi_inverse(z) * (d * d + self.d2log_phi_inverse(z))


def weibull_phi_family(shape, scale):
    """Surrogate (x/scale)**shape with inverse scale * z**(1/shape)."""
    k, lam = float(shape), float(scale)
    log_lam = math.log(lam)
    return PhiFamily(
        phi=lambda x: (x / lam) ** k,
        log_inverse=lambda z: log_lam + np.log(z) / k,
        dlog_inverse=lambda z: 1.0 / (k * z),
        d2log_inverse=lambda z: -1.0 / (k * z * z),
        x_bar=lam,
    )


def generalized_lognormal_phi_family(r, sigma):
    """Surrogate log(x)**r / (r sigma**r), inverse exp(sigma r^{1/r} z^{1/r})."""
    r = float(r)
    sigma = float(sigma)
    c = sigma * r ** (1.0 / r)

    def dlog(z):
        return c / r * z ** (1.0 / r - 1.0)

    return PhiFamily(
        phi=lambda x: np.log(x) ** r / (r * sigma ** r),
        log_inverse=lambda z: c * z ** (1.0 / r),
        dlog_inverse=dlog,
        d2log_inverse=lambda z: dlog(z) * (1.0 / r - 1.0) / z,
        # smallest point beyond which the surrogate is positive, increasing
        # and strictly concave
        x_bar=math.exp(r - 1.0),
    )


class DistributionModel(abc.ABC):
    """A probability model on [support_min, inf) with positive density there."""

    support_min: float = 0.0

    @abc.abstractmethod
    def density(self, x):
        """Density f(x); 0 below support_min.  Accepts arrays."""

    @abc.abstractmethod
    def log_density_exponent(self, x):
        """phi(x) = -log f(x), in closed form.  Requires x >= support_min."""

    @abc.abstractmethod
    def cdf(self, x):
        ...

    @abc.abstractmethod
    def survival(self, x):
        """1 - cdf(x) in a cancellation-free form."""

    @property
    @abc.abstractmethod
    def tail_class(self) -> str:
        """'i' (light), 'ii' (heavy but not fat) or 'iii' (fat) tails."""

    @property
    @abc.abstractmethod
    def phi_growth(self) -> GrowthScale:
        ...

    def quantile(self, p):
        """Value q with cdf(q) = p.  Closed form per family; this fallback
        brackets the numeric CDF and bisects."""
        p = float(p)
        if not 0.0 < p < 1.0:
            raise ValueError("quantile level must lie in (0, 1)")
        lo = self.support_min
        hi = max(lo + 1.0, 2.0 * lo + 1.0)
        for _ in range(200):
            if self.cdf(hi) > p:
                break
            hi = 2.0 * hi + 1.0
        else:
            from .errors import RootBracketError
            raise RootBracketError("quantile bracket expansion failed",
                                   lo=lo, hi=hi, f_lo=self.cdf(lo) - p,
                                   f_hi=self.cdf(hi) - p)
        return brentq(lambda q: self.cdf(q) - p, lo, hi, xtol=1e-12, rtol=1e-14)

    def moment(self, t, cfg=None):
        """Numeric moment of order ``t`` with divergence detection.

        Returns the quadrature :class:`IntegralResult`; a diverged status
        encodes an infinite moment, inconclusive an ambiguous one.
        """
        t = float(t)
        if t < 0:
            raise ValueError("moment order must be nonnegative")
        cfg = cfg or QuadratureConfig()
        lo = self.support_min

        def integrand(x):
            x = np.asarray(x, dtype=float)
            out = np.zeros_like(x)
            m = x > max(lo, 0.0)
            if m.any():
                xm = x[m]
                with np.errstate(over="ignore"):
                    out[m] = np.exp(t * np.log(xm) - self.log_density_exponent(xm))
            return out

        return integrate_semi_infinite(integrand, lo, cfg,
                                       breakpoints=self.breakpoints())

    def phi_triple(self):
        raise UnsupportedFamilyError(
            f"{type(self).__name__} has no concave tail surrogate "
            "(only heavy-but-not-fat-tailed families do)")

    def log_density_exponent_at_log(self, logx):
        """phi(exp(logx)), usable when exp(logx) would overflow.

        The generic fallback materializes x; families whose exponent has a
        closed form in log(x) override it.
        """
        return self.log_density_exponent(np.exp(np.asarray(logx, dtype=float)))

    def breakpoints(self):
        """Interior discontinuities of the density, for quadrature seeding."""
        return ()

    def left_edge_growth(self):
        """Leading growth of the log-density exponent at the support edge,
        as ``coeff * u**degree`` in ``u = -log(x)``; None when the density is
        positive at a positive edge (the ratio to any alternative stays
        bounded there)."""
        return None

    def _valid_mask(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return x, x >= self.support_min

    @staticmethod
    def _scalar_like(ref, out):
        return float(out[0]) if np.ndim(ref) == 0 else out

    def _density_from_exponent(self, x):
        xs = np.asarray(x, dtype=float)
        arr, m = self._valid_mask(xs)
        out = np.zeros_like(arr)
        if m.any():
            with np.errstate(over="ignore", divide="ignore"):
                out[m] = np.exp(-np.asarray(self.log_density_exponent(arr[m]),
                                            dtype=float))
        return self._scalar_like(xs, out)

    def _check_in_support(self, x):
        arr, m = self._valid_mask(x)
        if not m.all():
            raise ValueError(
                f"log-density exponent undefined below support_min="
                f"{self.support_min} (got min x={arr.min()})")
        return arr


@dataclass(frozen=True)
class Exponential(DistributionModel):
    rate: float

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError("rate must be positive")

    support_min = 0.0

    def density(self, x):
        return self._density_from_exponent(x)

    def log_density_exponent(self, x):
        arr = self._check_in_support(x)
        return self._scalar_like(x, self.rate * arr - math.log(self.rate))

    def cdf(self, x):
        arr, m = self._valid_mask(x)
        return self._scalar_like(x, np.where(m, -np.expm1(-self.rate * np.maximum(arr, 0.0)), 0.0))

    def survival(self, x):
        arr, m = self._valid_mask(x)
        return self._scalar_like(x, np.where(m, np.exp(-self.rate * np.maximum(arr, 0.0)), 1.0))

    def quantile(self, p):
        if not 0.0 < p < 1.0:
            raise ValueError("quantile level must lie in (0, 1)")
        return -math.log1p(-p) / self.rate

    @property
    def tail_class(self):
        return "i"

    @property
    def phi_growth(self):
        return GrowthScale("power", 1.0, self.rate)

    def left_edge_growth(self):
        return GrowthScale("edge_power", 0.0, 0.0)


@dataclass(frozen=True)
class HalfGaussian(DistributionModel):
    """One-sided Gaussian on [0, inf): twice the centered normal density."""

    scale: float

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    support_min = 0.0

    def density(self, x):
        return self._density_from_exponent(x)

    def log_density_exponent(self, x):
        arr = self._check_in_support(x)
        s = self.scale
        const = math.log(s) + 0.5 * math.log(math.pi / 2.0)
        return self._scalar_like(x, arr * arr / (2.0 * s * s) + const)

    def cdf(self, x):
        arr, m = self._valid_mask(x)
        return self._scalar_like(
            x, np.where(m, special.erf(np.maximum(arr, 0.0) / (self.scale * math.sqrt(2.0))), 0.0))

    def survival(self, x):
        arr, m = self._valid_mask(x)
        return self._scalar_like(
            x, np.where(m, special.erfc(np.maximum(arr, 0.0) / (self.scale * math.sqrt(2.0))), 1.0))

    def quantile(self, p):
        if not 0.0 < p < 1.0:
            raise ValueError("quantile level must lie in (0, 1)")
        return self.scale * math.sqrt(2.0) * special.erfinv(p)

    @property
    def tail_class(self):
        return "i"

    @property
    def phi_growth(self):
        return GrowthScale("power", 2.0, 1.0 / (2.0 * self.scale ** 2))

    def left_edge_growth(self):
        return GrowthScale("edge_power", 0.0, 0.0)


@dataclass(frozen=True)
class Weibull(DistributionModel):
    """Heavy-tailed Weibull; the shape is restricted to (0, 1) because
    larger shapes put the family in the light-tailed class."""

    shape: float
    scale: float

    def __post_init__(self):
        if not 0.0 < self.shape < 1.0:
            raise ValueError("shape must lie in (0, 1)")
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    support_min = 0.0

    def density(self, x):
        return self._density_from_exponent(x)

    def log_density_exponent(self, x):
        arr = self._check_in_support(x)
        k, lam = self.shape, self.scale
        with np.errstate(divide="ignore", over="ignore"):
            rel = np.log(arr / lam)
            out = np.exp(k * rel) - (k - 1.0) * rel - math.log(k / lam)
        return self._scalar_like(x, out)

    def cdf(self, x):
        arr, m = self._valid_mask(x)
        z = (np.maximum(arr, 0.0) / self.scale) ** self.shape
        return self._scalar_like(x, np.where(m, -np.expm1(-z), 0.0))

    def survival(self, x):
        arr, m = self._valid_mask(x)
        z = (np.maximum(arr, 0.0) / self.scale) ** self.shape
        return self._scalar_like(x, np.where(m, np.exp(-z), 1.0))

    def quantile(self, p):
        if not 0.0 < p < 1.0:
            raise ValueError("quantile level must lie in (0, 1)")
        return self.scale * (-math.log1p(-p)) ** (1.0 / self.shape)

    @property
    def tail_class(self):
        return "ii"

    @property
    def phi_growth(self):
        return GrowthScale("power", self.shape, self.scale ** -self.shape)

    def phi_triple(self):
        return weibull_phi_family(self.shape, self.scale)

    def left_edge_growth(self):
        return GrowthScale("edge_power", 1.0, -(1.0 - self.shape))

    def log_density_exponent_at_log(self, logx):
        logx = np.asarray(logx, dtype=float)
        k, lam = self.shape, self.scale
        rel = logx - math.log(lam)
        with np.errstate(over="ignore"):
            out = np.exp(k * rel) - (k - 1.0) * rel - math.log(k / lam)
        return out


@dataclass(frozen=True)
class GeneralizedLognormal(DistributionModel):
    """Density proportional to exp(-|log x - mu|^r / (r sigma^r)) / x.

    ``r = 2`` is the usual lognormal; ``r`` must exceed 1, below that the
    family degenerates to fat tails.
    """

    r: float
    sigma: float
    mu: float = 0.0

    def __post_init__(self):
        if self.r <= 1.0:
            raise ValueError("r must exceed 1")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    support_min = 0.0

    @cached_property
    def _log_norm_const(self):
        r, sigma = self.r, self.sigma
        return math.log(2.0 * r ** (1.0 / r) * sigma * math.gamma(1.0 + 1.0 / r))

    @cached_property
    def _gennorm_scale(self):
        return self.sigma * self.r ** (1.0 / self.r)

    def density(self, x):
        return self._density_from_exponent(x)

    def log_density_exponent(self, x):
        arr = self._check_in_support(x)
        r, sigma = self.r, self.sigma
        with np.errstate(divide="ignore"):
            lx = np.log(arr)
        out = np.abs(lx - self.mu) ** r / (r * sigma ** r) + lx + self._log_norm_const
        return self._scalar_like(x, out)

    def cdf(self, x):
        arr, m = self._valid_mask(x)
        out = np.zeros_like(arr)
        pos = m & (arr > 0)
        if pos.any():
            out[pos] = gennorm.cdf(np.log(arr[pos]), self.r,
                                   loc=self.mu, scale=self._gennorm_scale)
        return self._scalar_like(x, out)

    def survival(self, x):
        arr, m = self._valid_mask(x)
        out = np.ones_like(arr)
        pos = m & (arr > 0)
        if pos.any():
            out[pos] = gennorm.sf(np.log(arr[pos]), self.r,
                                  loc=self.mu, scale=self._gennorm_scale)
        return self._scalar_like(x, out)

    def quantile(self, p):
        if not 0.0 < p < 1.0:
            raise ValueError("quantile level must lie in (0, 1)")
        return float(np.exp(gennorm.ppf(p, self.r, loc=self.mu,
                                        scale=self._gennorm_scale)))

    @property
    def tail_class(self):
        return "ii"

    @property
    def phi_growth(self):
        return GrowthScale("log_power", self.r, 1.0 / (self.r * self.sigma ** self.r))

    def phi_triple(self):
        return generalized_lognormal_phi_family(self.r, self.sigma)

    def left_edge_growth(self):
        return GrowthScale("edge_power", self.r, 1.0 / (self.r * self.sigma ** self.r))

    def log_density_exponent_at_log(self, logx):
        logx = np.asarray(logx, dtype=float)
        r, sigma = self.r, self.sigma
        return np.abs(logx - self.mu) ** r / (r * sigma ** r) + logx \
            + self._log_norm_const


@dataclass(frozen=True)
class Pareto(DistributionModel):
    """Pareto with tail index > 1 (finite mean) on [scale, inf)."""

    tail_index: float
    scale: float

    def __post_init__(self):
        if self.tail_index <= 1.0:
            raise ValueError("tail_index must exceed 1")
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    @property
    def support_min(self):
        return self.scale

    def density(self, x):
        return self._density_from_exponent(x)

    def log_density_exponent(self, x):
        arr = self._check_in_support(x)
        c, xm = self.tail_index, self.scale
        out = (c + 1.0) * np.log(arr) - math.log(c) - c * math.log(xm)
        return self._scalar_like(x, out)

    def cdf(self, x):
        arr, m = self._valid_mask(x)
        ratio = self.scale / np.maximum(arr, self.scale)
        return self._scalar_like(x, np.where(m, 1.0 - ratio ** self.tail_index, 0.0))

    def survival(self, x):
        arr, m = self._valid_mask(x)
        ratio = self.scale / np.maximum(arr, self.scale)
        return self._scalar_like(x, np.where(m, ratio ** self.tail_index, 1.0))

    def quantile(self, p):
        if not 0.0 < p < 1.0:
            raise ValueError("quantile level must lie in (0, 1)")
        return self.scale * (1.0 - p) ** (-1.0 / self.tail_index)

    @property
    def tail_class(self):
        return "iii"

    @property
    def poly_degree(self):
        """Polynomial degree of the tail: lim phi(x)/log(x)."""
        return self.tail_index + 1.0

    @property
    def phi_growth(self):
        return GrowthScale("log_power", 1.0, self.poly_degree)


class TruncatedAbove(DistributionModel):
    """A model conditioned on exceeding its own p-quantile.

    The density is the inner density rescaled by 1/(1-p) on [q_p, inf).
    The concave tail surrogate of the inner model carries over unchanged.
    """

    def __init__(self, inner, p):
        if not 0.0 < p < 1.0:
            raise ValueError("truncation level must lie in (0, 1)")
        if isinstance(inner, TruncatedAbove):
            raise ValueError("nested truncation is not supported")
        self.inner = inner
        self.p = float(p)
        self.support_min = float(inner.quantile(self.p))
        self._log_keep = math.log1p(-self.p)

    def __repr__(self):
        return f"TruncatedAbove(inner={self.inner!r}, p={self.p})"

    def __eq__(self, other):
        return (isinstance(other, TruncatedAbove)
                and other.inner == self.inner and other.p == self.p)

    def __hash__(self):
        return hash((type(self), self.inner, self.p))

    def density(self, x):
        return self._density_from_exponent(x)

    def log_density_exponent(self, x):
        arr = self._check_in_support(x)
        out = np.asarray(self.inner.log_density_exponent(arr), dtype=float) \
            + self._log_keep
        return self._scalar_like(x, out)

    def cdf(self, x):
        arr, m = self._valid_mask(x)
        inner_cdf = np.asarray(self.inner.cdf(np.maximum(arr, self.support_min)),
                               dtype=float)
        out = np.clip((inner_cdf - self.p) / (1.0 - self.p), 0.0, 1.0)
        return self._scalar_like(x, np.where(m, out, 0.0))

    def survival(self, x):
        arr, m = self._valid_mask(x)
        inner_sf = np.asarray(self.inner.survival(np.maximum(arr, self.support_min)),
                              dtype=float)
        return self._scalar_like(x, np.where(m, inner_sf / (1.0 - self.p), 1.0))

    def quantile(self, p):
        if not 0.0 < p < 1.0:
            raise ValueError("quantile level must lie in (0, 1)")
        return self.inner.quantile(self.p + p * (1.0 - self.p))

    @property
    def tail_class(self):
        return self.inner.tail_class

    @property
    def phi_growth(self):
        return self.inner.phi_growth

    @property
    def poly_degree(self):
        return self.inner.poly_degree

    def phi_triple(self):
        return self.inner.phi_triple()

    def log_density_exponent_at_log(self, logx):
        return np.asarray(self.inner.log_density_exponent_at_log(logx),
                          dtype=float) + self._log_keep
