"""Tail classification and ball-membership diagnostics.

Answers, for a nominal model and candidate alternatives, the questions
that decide whether a worst-case analysis is meaningful: which tail class
the nominal belongs to, which alternatives each divergence ball contains
(finite divergence), how to shrink a contained alternative into a ball of
any radius without changing its tail, and whether the semi-infinite
integral certifying a finite worst case converges.

Membership verdicts are decided symbolically from the families' growth
scales and corroborated numerically; direct numeric integration is the
cross-check, not the decision rule, because quadrature cannot distinguish
slow divergence from convergence.
"""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .distributions import DistributionModel, GrowthScale
from .divergence import DivergenceGenerator, FPhiDivergence, divergence
from .errors import TailClassificationError, UnsupportedFamilyError
from .quadrature import (IntegralStatus, QuadratureConfig,
                         integrate_semi_infinite)

__all__ = [
    "Verdict",
    "TailClass",
    "TailReport",
    "classify",
    "growth_ratio_limit",
    "kl_ball_verdict",
    "alpha_ball_verdict",
    "fphi_ball_verdict",
    "pair_report",
    "verdict_matrix",
    "ShrinkResult",
    "TailSpliceModel",
    "shrink_to_radius",
    "i_c_diagnostic",
]


class Verdict(Enum):
    FINITE = "finite"
    INFINITE = "infinite"
    INCONCLUSIVE = "inconclusive"


_STATUS_TO_VERDICT = {
    IntegralStatus.CONVERGED: Verdict.FINITE,
    IntegralStatus.DIVERGED: Verdict.INFINITE,
    IntegralStatus.INCONCLUSIVE: Verdict.INCONCLUSIVE,
}


@dataclass(frozen=True)
class TailClass:
    kind: str  # 'i' | 'ii' | 'iii'
    degree: float | None = None  # polynomial degree, class iii only

    def __str__(self):
        if self.kind == "iii":
            return f"iii({self.degree:g})"
        return self.kind


@dataclass
class TailReport:
    tail_class: TailClass
    lim_phi_over_x: float
    lim_phi_over_logx: float
    verdicts: dict = field(default_factory=dict)
    gamma_over_phi_limit: float | None = None


def _numeric_grid(model, lo=1e2, hi=1e6, n=5):
    base = max(lo, 10.0 * (model.support_min + 1.0))
    return np.geomspace(base, max(hi, 1e4 * base), n)


def classify(model: DistributionModel) -> TailReport:
    """Assign the tail class symbolically and corroborate it on a grid.

    Disagreement between the symbolic class and the numeric evidence raises
    :class:`TailClassificationError`.
    """
    kind = model.tail_class
    growth = model.phi_growth

    xs = _numeric_grid(model)
    phi = np.asarray(model.log_density_exponent(xs), dtype=float)
    over_x = phi / xs
    over_log = phi / np.log(xs)

    if kind == "i":
        limit_x = growth.coeff if growth.degree == 1.0 else math.inf
        report = TailReport(TailClass("i"), limit_x, math.inf)
        if over_x[-1] <= 0.0 or over_x[-1] < 0.95 * over_x[-2]:
            raise TailClassificationError(
                f"phi/x not bounded away from zero on the grid: {over_x}")
        if math.isfinite(limit_x) and abs(over_x[-1] - limit_x) > 0.05 * limit_x:
            raise TailClassificationError(
                f"phi/x = {over_x[-1]:.4g} at x={xs[-1]:.3g} disagrees with "
                f"symbolic limit {limit_x:.4g}")
        return report

    if kind == "ii":
        report = TailReport(TailClass("ii"), 0.0, math.inf)
        # judge the tail trend on the last increments; transients at the
        # small end of the grid are legitimate (large log-normal constants)
        if not np.all(np.diff(over_x)[-2:] < 0.0):
            raise TailClassificationError(
                f"phi/x not decreasing on the grid: {over_x}")
        if not np.all(np.diff(over_log)[-2:] > 0.0):
            raise TailClassificationError(
                f"phi/log(x) not increasing on the grid: {over_log}")
        return report

    # class iii: extrapolate phi/log(x) in 1/log(x) to remove the
    # constant-offset transient, then require 5% agreement
    degree = model.poly_degree
    L1, L2 = np.log(xs[-2]), np.log(xs[-1])
    est = (over_log[-1] * L2 - over_log[-2] * L1) / (L2 - L1)
    if abs(est - degree) > 0.05 * degree:
        raise TailClassificationError(
            f"extrapolated phi/log(x) = {est:.4g} disagrees with symbolic "
            f"degree {degree:.4g}")
    return TailReport(TailClass("iii", degree), 0.0, degree)


def _symbolic_ratio_limit(g_eta: GrowthScale, g_nu: GrowthScale) -> float:
    if g_eta.kind == g_nu.kind:
        if g_eta.degree > g_nu.degree:
            return math.inf
        if g_eta.degree < g_nu.degree:
            return 0.0
        return g_eta.coeff / g_nu.coeff
    return math.inf if g_eta.kind == "power" else 0.0


def growth_ratio_limit(eta: DistributionModel, nu: DistributionModel) -> float:
    """Limit of gamma(x)/phi(x), decided symbolically and sanity-checked.

    The numeric check extrapolates the grid ratio in 1/log(x); a gross
    disagreement raises, slow transients are tolerated.
    """
    limit = _symbolic_ratio_limit(eta.phi_growth, nu.phi_growth)

    x6 = max(1e6, 1e3 * (eta.support_min + 1.0), 1e3 * (nu.support_min + 1.0))
    x5 = x6 / 10.0
    xs = np.array([x5, x6])
    ratio = np.asarray(eta.log_density_exponent(xs), dtype=float) \
        / np.asarray(nu.log_density_exponent(xs), dtype=float)
    if math.isinf(limit):
        ok = ratio[1] > ratio[0] and ratio[1] > 1.5
    elif limit == 0.0:
        ok = ratio[1] < ratio[0] and ratio[1] < 0.7
    else:
        L1, L2 = np.log(xs)
        est = (ratio[1] * L2 - ratio[0] * L1) / (L2 - L1)
        ok = abs(est - limit) <= 0.10 * max(abs(limit), 0.1)
    if not ok:
        raise TailClassificationError(
            f"numeric gamma/phi ratio {ratio} does not corroborate the "
            f"symbolic limit {limit!r}")
    return limit


def kl_ball_verdict(nu, eta, cfg=None) -> Verdict:
    """Finiteness of the relative entropy of ``eta`` from ``nu``.

    Requires the alternative's own entropy integral to stabilize first;
    the verdict is then the convergence status of the cross term
    ``integral of phi d eta``.
    """
    cfg = cfg or QuadratureConfig()
    if eta.support_min < nu.support_min - 1e-12:
        return Verdict.INFINITE

    start = max(eta.support_min, nu.support_min)

    def own_entropy(x):
        x = np.maximum(np.asarray(x, dtype=float), start)
        gamma = np.asarray(eta.log_density_exponent(x), dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            out = gamma * np.exp(-gamma)
        return np.where(np.isfinite(out), out, 0.0)

    side = integrate_semi_infinite(own_entropy, start, cfg)
    if side.status is not IntegralStatus.CONVERGED:
        return Verdict.INCONCLUSIVE

    def cross(x):
        x = np.maximum(np.asarray(x, dtype=float), start)
        phi = np.asarray(nu.log_density_exponent(x), dtype=float)
        gamma = np.asarray(eta.log_density_exponent(x), dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            out = phi * np.exp(-gamma)
        return np.where(np.isfinite(out), out, 0.0)

    return _STATUS_TO_VERDICT[integrate_semi_infinite(cross, start, cfg).status]


def _alpha_edge_verdict(nu, eta, alpha) -> Verdict:
    """Convergence of the divergence integrand at the nominal's support edge.

    The membership threshold arguments presume the density ratio stays
    bounded on compact intervals; a nominal whose density vanishes at the
    edge breaks that for alternatives with mass there, and the edge window
    contributes ``exp((alpha-1) phi - alpha gamma)`` whose exponent growth
    in ``u = -log(x)`` decides convergence.
    """
    g_nu = nu.left_edge_growth()
    g_eta = eta.left_edge_growth()
    if g_nu is None or g_eta is None or eta.support_min > nu.support_min + 1e-12:
        return Verdict.FINITE
    top = max(g_nu.degree, g_eta.degree)
    c = (alpha - 1.0) * (g_nu.coeff if g_nu.degree == top else 0.0) \
        - alpha * (g_eta.coeff if g_eta.degree == top else 0.0)
    if top <= 1.0:
        c = (c if top == 1.0 else 0.0) - 1.0  # the dx = -exp(-u) du factor
    if c < -1e-12:
        return Verdict.FINITE
    if c > 1e-12:
        return Verdict.INFINITE
    return Verdict.INCONCLUSIVE


def alpha_ball_verdict(nu, eta, alpha) -> Verdict:
    """Membership of ``eta`` in polynomial-divergence balls around ``nu``.

    Decided by the limit of gamma/phi against the class-dependent
    threshold, combined with the support-edge check; equality within
    floating tolerance is left undecided.
    """
    alpha = float(alpha)
    if alpha <= 1.0:
        raise ValueError("alpha must exceed 1")
    if eta.support_min < nu.support_min - 1e-12:
        return Verdict.INFINITE

    limit = growth_ratio_limit(eta, nu)
    threshold = (alpha - 1.0) / alpha
    if nu.tail_class == "iii":
        c = nu.poly_degree
        threshold += 1.0 / (c * alpha)

    if math.isinf(limit) or limit > threshold + 1e-12:
        tail = Verdict.FINITE
    elif limit < threshold - 1e-12:
        tail = Verdict.INFINITE
    else:
        tail = Verdict.INCONCLUSIVE

    edge = _alpha_edge_verdict(nu, eta, alpha)
    if Verdict.INFINITE in (tail, edge):
        return Verdict.INFINITE
    if Verdict.INCONCLUSIVE in (tail, edge):
        return Verdict.INCONCLUSIVE
    return Verdict.FINITE


def _fphi_edge_verdict(nu, eta, theta) -> Verdict:
    """Support-edge contribution to the tail-adaptive divergence.

    Only a nominal with an exponentially-growing surrogate inverse (the
    log-normal kind) can blow up at the edge: the integrand behaves like
    ``x**-theta`` against the alternative's density there, so the
    alternative must vanish at the edge faster than ``x**(theta-1)``.
    """
    g_nu = nu.left_edge_growth()
    g_eta = eta.left_edge_growth()
    if g_nu is None or g_eta is None or eta.support_min > nu.support_min + 1e-12:
        return Verdict.FINITE
    if nu.phi_growth.kind != "log_power":
        return Verdict.FINITE  # polynomial surrogate inverse: edge harmless
    if g_eta.degree > 1.0:
        return Verdict.FINITE
    if g_eta.degree < 1.0:
        return Verdict.INFINITE
    if g_eta.coeff > theta - 1.0 + 1e-12:
        return Verdict.FINITE
    if g_eta.coeff < theta - 1.0 - 1e-12:
        return Verdict.INFINITE
    return Verdict.INCONCLUSIVE


def fphi_ball_verdict(nu, eta, theta, cfg=None) -> Verdict:
    """Membership of ``eta`` in tail-adaptive divergence balls around ``nu``.

    Finite when the alternative has a finite moment of order ``theta`` and
    the support-edge window integrates; infinite when the edge blows up or
    the density tail dominates ``x**-(t+1)`` for some ``t`` strictly
    between 1 and ``theta``; inconclusive otherwise.
    """
    cfg = cfg or QuadratureConfig()
    theta = float(theta)
    if theta <= 1.0:
        raise ValueError("theta must exceed 1")
    if nu.tail_class != "ii":
        raise UnsupportedFamilyError(
            "tail-adaptive balls are defined for heavy-but-not-fat-tailed "
            f"nominals, got class {nu.tail_class!r}")
    if eta.support_min < nu.support_min - 1e-12:
        return Verdict.INFINITE

    xs = _numeric_grid(eta, lo=1e2, hi=1e6, n=5)
    dens = np.asarray(eta.density(xs), dtype=float)
    if np.any(dens > 1.0 + 1e-9):
        return Verdict.INCONCLUSIVE

    edge = _fphi_edge_verdict(nu, eta, theta)
    if edge is not Verdict.FINITE:
        return edge

    if eta.moment(theta, cfg).status is IntegralStatus.CONVERGED:
        return Verdict.FINITE

    delta = 0.05 * (theta - 1.0)
    for t in (1.0 + delta, 0.5 * (1.0 + theta), theta - delta):
        with np.errstate(over="ignore"):
            v = np.exp((t + 1.0) * np.log(xs)
                       - np.asarray(eta.log_density_exponent(xs), dtype=float))
        if v[-1] > 0.0 and v[-1] >= 0.5 * v[len(v) // 2]:
            return Verdict.INFINITE
    return Verdict.INCONCLUSIVE


def pair_report(nu, eta, generators, cfg=None) -> TailReport:
    """Tail report for ``eta`` relative to ``nu`` with one verdict per
    generator descriptor."""
    cfg = cfg or QuadratureConfig()
    report = classify(eta)
    report.gamma_over_phi_limit = growth_ratio_limit(eta, nu)
    for gen in generators:
        desc = gen.descriptor()
        key = tuple(sorted(desc.items()))
        if desc["type"] == "kl":
            verdict = kl_ball_verdict(nu, eta, cfg)
        elif desc["type"] == "alpha":
            verdict = alpha_ball_verdict(nu, eta, desc["alpha"])
        else:
            verdict = fphi_ball_verdict(nu, eta, desc["theta"], cfg)
        report.verdicts[key] = verdict
    return report


def verdict_matrix(nu, etas, generators, cfg=None):
    """One :class:`TailReport` per alternative, in input order."""
    return [pair_report(nu, eta, generators, cfg) for eta in etas]


class TailSpliceModel(DistributionModel):
    """Model equal to the nominal below a splice point and to a rescaled
    alternative above it; mass balances by construction."""

    def __init__(self, nu, eta, splice, log_scale):
        self.nu = nu
        self.eta = eta
        self.splice = float(splice)
        self.log_scale = float(log_scale)
        self.support_min = nu.support_min

    def __repr__(self):
        return (f"TailSpliceModel(nu={self.nu!r}, eta={self.eta!r}, "
                f"splice={self.splice:.6g})")

    def density(self, x):
        return self._density_from_exponent(x)

    def log_density_exponent(self, x):
        arr = self._check_in_support(x)
        out = np.empty_like(arr)
        below = arr <= self.splice
        out[below] = np.asarray(self.nu.log_density_exponent(arr[below]), dtype=float)
        if (~below).any():
            out[~below] = np.asarray(self.eta.log_density_exponent(arr[~below]),
                                     dtype=float) - self.log_scale
        return self._scalar_like(x, out)

    def cdf(self, x):
        arr, m = self._valid_mask(x)
        xc = np.maximum(arr, self.support_min)
        below = np.asarray(self.nu.cdf(np.minimum(xc, self.splice)), dtype=float)
        scale = math.exp(self.log_scale)
        above = np.asarray(self.nu.cdf(self.splice), dtype=float) + scale * (
            np.asarray(self.eta.cdf(np.maximum(xc, self.splice)), dtype=float)
            - np.asarray(self.eta.cdf(self.splice), dtype=float))
        out = np.where(xc <= self.splice, below, above)
        return self._scalar_like(x, np.where(m, out, 0.0))

    def survival(self, x):
        arr, m = self._valid_mask(x)
        xc = np.maximum(arr, self.support_min)
        scale = math.exp(self.log_scale)
        out = np.where(xc <= self.splice,
                       np.asarray(self.nu.survival(np.minimum(xc, self.splice)),
                                  dtype=float),
                       scale * np.asarray(self.eta.survival(np.maximum(xc, self.splice)),
                                          dtype=float))
        return self._scalar_like(x, np.where(m, out, 1.0))

    @property
    def tail_class(self):
        return self.eta.tail_class

    @property
    def phi_growth(self):
        return self.eta.phi_growth

    @property
    def poly_degree(self):
        return self.eta.poly_degree

    def breakpoints(self):
        return (self.splice,)

    def left_edge_growth(self):
        return self.nu.left_edge_growth()


@dataclass
class ShrinkResult:
    splice: float
    tail_scale: float
    model: DistributionModel
    achieved: float


def shrink_to_radius(nu, eta, gen, kappa, cfg=None) -> ShrinkResult:
    """Shrink a finitely-divergent alternative into a ball of radius kappa.

    Keeps the nominal's density below a splice point M and the alternative's
    tail (rescaled to preserve mass) above it; M is pushed out by geometric
    search then refined by bisection until the divergence drops to kappa,
    so the output has the alternative's tail behavior at any radius.
    """
    cfg = cfg or QuadratureConfig()
    kappa = float(kappa)
    if kappa <= 0.0:
        raise ValueError("radius must be positive")

    base = divergence(gen, eta, nu, cfg)
    if base.status is not IntegralStatus.CONVERGED:
        raise ValueError(
            "shrink_to_radius requires a finite starting divergence, got "
            f"status {base.status.value} ({base.detail})")
    if base.value <= kappa:
        return ShrinkResult(0.0, 1.0, eta, base.value)

    # heavier-tail precondition: f/g -> 0
    x6 = max(1e6, 1e3 * (eta.support_min + 1.0), 1e3 * (nu.support_min + 1.0))
    xs = np.array([x6 / 100.0, x6 / 10.0, x6])
    log_fg = np.asarray(eta.log_density_exponent(xs), dtype=float) \
        - np.asarray(nu.log_density_exponent(xs), dtype=float)
    if not (np.all(np.diff(log_fg) < 0.0) and log_fg[-1] < -5.0):
        raise ValueError("shrink_to_radius requires the alternative to have "
                         "strictly heavier tails than the nominal")

    def tail_divergence(m):
        log_c = math.log(max(float(nu.survival(m)), 1e-320)) \
            - math.log(max(float(eta.survival(m)), 1e-320))

        def integrand(x):
            x = np.maximum(np.asarray(x, dtype=float), m)
            phi = np.asarray(nu.log_density_exponent(x), dtype=float)
            gamma = np.asarray(eta.log_density_exponent(x), dtype=float)
            return gen.ratio_integrand(log_c + phi - gamma, phi)

        return integrate_semi_infinite(integrand, m, cfg).value, log_c

    lo = max(eta.support_min, nu.support_min, 1.0)
    hi = lo
    d_hi, _ = tail_divergence(hi)
    steps = 0
    while d_hi > kappa:
        lo = hi
        hi *= 2.0
        d_hi, _ = tail_divergence(hi)
        steps += 1
        if steps > 200:
            raise ValueError("geometric search for the splice point failed")

    for _ in range(60):
        if hi - lo <= 1e-3 * max(1.0, hi):
            break
        mid = 0.5 * (lo + hi)
        d_mid, _ = tail_divergence(mid)
        if d_mid <= kappa:
            hi = mid
        else:
            lo = mid

    achieved, log_c = tail_divergence(hi)
    model = TailSpliceModel(nu, eta, hi, log_c)
    check = divergence(gen, model, nu, cfg)
    if not (check.status is IntegralStatus.CONVERGED and check.value <= kappa * (1 + 1e-6)):
        raise ValueError(
            f"splice verification failed: divergence {check.value!r} "
            f"(status {check.status.value}) exceeds radius {kappa}")
    return ShrinkResult(hi, math.exp(log_c), model, check.value)


def i_c_diagnostic(nu, gen: FPhiDivergence, alpha1, alpha2, c, cfg=None):
    """Semi-infinite integral certifying a finite worst case.

    Integrates, from ``c`` upward, the tail-weight curvature against the
    nominal density evaluated at the rescaled slope.  ``c`` is raised
    automatically until the slope argument clears the nominal's support;
    returns ``(IntegralResult, c_used)``.
    """
    cfg = cfg or QuadratureConfig()
    if not isinstance(gen, FPhiDivergence):
        raise UnsupportedFamilyError("the diagnostic is defined for the "
                                     "tail-adaptive generator only")
    alpha1 = float(alpha1)
    alpha2 = float(alpha2)
    if alpha2 <= 0.0:
        raise ValueError("alpha2 must be positive")

    z_min = alpha1 + alpha2 * (nu.support_min + 1e-9)
    if z_min <= gen.f_prime_at_log(gen.log_ybar):
        c_floor = gen.log_ybar
    else:
        c_floor = float(gen.log_f_prime_inverse(z_min))
    c_used = max(float(c), c_floor + 1e-9 * (1.0 + abs(c_floor)))

    tw = gen.tail_weight
    log_a2 = math.log(alpha2)

    def integrand(y):
        y = np.maximum(np.asarray(y, dtype=float), c_used)
        log_w = tw.log_value(y)
        r1 = tw.ratio_prime(y)
        curv = r1 + tw.ratio_second(y)
        # slope argument z = (value (1 + r1) - alpha1) / alpha2 in log space
        with np.errstate(over="ignore", under="ignore"):
            shrink = alpha1 * np.exp(-log_w) / (1.0 + r1)
        log_z = log_w + np.log1p(r1) + np.log1p(-np.minimum(shrink, 1.0 - 1e-15)) \
            - log_a2
        phi_at = np.asarray(nu.log_density_exponent_at_log(log_z), dtype=float)
        with np.errstate(over="ignore", under="ignore"):
            scale = np.exp(y + 2.0 * log_w + np.log1p(r1) - phi_at)
        return curv * scale

    result = integrate_semi_infinite(integrand, c_used, cfg)
    return result, c_used
