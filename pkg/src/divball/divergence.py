"""Divergence generators and the divergence functional.

Three generator families are provided:

* :class:`KLDivergence` -- ``F(y) = y log y``;
* :class:`AlphaDivergence` -- ``F(y) = (y**alpha - 1) / (alpha (alpha-1))``
  with ``alpha > 1``;
* :class:`FPhiDivergence` -- the tail-adaptive generator built from a class
  (ii) model's concave surrogate: KL-like up to a splice point ``ybar`` and
  ``a * y * inverse_surrogate(log y)**theta + b`` beyond it, glued so the
  generator stays continuously differentiable.

Every generator is immutable after construction and evaluates in a
vectorized, underflow-aware way; ``ratio_integrand`` computes
``F(g/f) * f`` directly from log-ratios so the divergence integral never
forms the (frequently over/underflowing) density ratio itself.
"""

import math
from dataclasses import dataclass

import numpy as np

from .distributions import PhiFamily
from .errors import RootBracketError
from .quadrature import (IntegralResult, IntegralStatus, QuadratureConfig,
                         integrate_semi_infinite)

__all__ = [
    "DivergenceGenerator",
    "KLDivergence",
    "AlphaDivergence",
    "FPhiDivergence",
    "TailWeight",
    "fphi_coefficients",
    "divergence",
]


def fphi_coefficients(phi: PhiFamily, theta, ybar):
    """Splice coefficients (a, b) making the tail-adaptive generator C^1.

    ``a`` matches the derivative of ``y log y`` at the splice point,
    ``b`` matches the value; ``log(ybar)`` must be a valid argument for the
    surrogate inverse, i.e. at least ``phi(x_bar)``.
    """
    ybar = float(ybar)
    theta = float(theta)
    if ybar < 1.0:
        raise ValueError("ybar must be at least 1")
    ly = math.log(ybar)
    phi_at_xbar = float(phi.phi(phi.x_bar))
    if ly < phi_at_xbar - 1e-12:
        raise ValueError(
            f"log(ybar)={ly:.6g} below the surrogate's lower bound "
            f"phi(x_bar)={phi_at_xbar:.6g}")
    inv = float(phi.phi_inverse(ly))
    inv_prime = float(phi.phi_inverse_prime(ly))
    a = (1.0 + ly) / (inv ** theta + theta * inv ** (theta - 1.0) * inv_prime)
    b = ybar * ly - a * ybar * inv ** theta
    return a, b


class TailWeight:
    """Weight ``a * inverse_surrogate(u)**theta`` applied to mass at
    log-ratio ``u`` in the big branch, with closed-form derivatives.

    The derivative identities ``F'(e^u) = value(u) + prime(u)`` and
    ``F''(e^u) e^u = prime(u) + second(u)`` hold above the splice point.
    """

    def __init__(self, a, theta, phi: PhiFamily):
        self.a = float(a)
        self.theta = float(theta)
        self.phi = phi

    def log_value(self, u):
        return math.log(self.a) + self.theta * self.phi.log_phi_inverse(u)

    def value(self, u):
        return np.exp(self.log_value(u))

    def ratio_prime(self, u):
        """prime(u) / value(u)."""
        return self.theta * self.phi.dlog_phi_inverse(u)

    def ratio_second(self, u):
        """second(u) / value(u)."""
        d = self.phi.dlog_phi_inverse(u)
        return self.theta ** 2 * d * d + self.theta * self.phi.d2log_phi_inverse(u)

    def prime(self, u):
        return self.value(u) * self.ratio_prime(u)

    def second(self, u):
        return self.value(u) * self.ratio_second(u)


class DivergenceGenerator:
    """Common interface: F, F', inverse of F', and stable integrands."""

    kind: str

    #: value of F at ratio 0 (continuous extension)
    f_at_zero: float = 0.0

    def f_value(self, y):
        raise NotImplementedError

    def f_prime(self, y):
        raise NotImplementedError

    def f_prime_at_log(self, u):
        """F'(exp(u)) computed without materializing exp(u)."""
        raise NotImplementedError

    def log_f_prime_inverse(self, z):
        raise NotImplementedError

    def f_prime_inverse(self, z):
        with np.errstate(over="ignore"):
            out = np.exp(self.log_f_prime_inverse(z))
        return out

    def inverse_breakpoints(self, alpha1, alpha2):
        """x-values where ``(F')^{-1}(alpha1 + alpha2 x)`` loses smoothness
        (clamp corners, splice points); quadrature seeds panel edges there."""
        return ()

    def ratio_integrand(self, log_ratio, phi_val):
        """F(exp(log_ratio)) * exp(-phi_val), stable for extreme ratios.

        ``log_ratio = -inf`` encodes a vanishing ratio and contributes
        F(0) * f.
        """
        raise NotImplementedError

    def descriptor(self):
        raise NotImplementedError


class KLDivergence(DivergenceGenerator):
    """F(y) = y log y, the relative-entropy generator."""

    kind = "kl"

    def f_value(self, y):
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(y > 0.0, y * np.log(np.where(y > 0.0, y, 1.0)), 0.0)
        return out if out.ndim else float(out)

    def f_prime(self, y):
        y = np.asarray(y, dtype=float)
        out = np.log(y) + 1.0
        return out if out.ndim else float(out)

    def f_prime_at_log(self, u):
        u = np.asarray(u, dtype=float)
        out = u + 1.0
        return out if out.ndim else float(out)

    def log_f_prime_inverse(self, z):
        z = np.asarray(z, dtype=float)
        out = z - 1.0
        return out if out.ndim else float(out)

    def ratio_integrand(self, log_ratio, phi_val):
        lr = np.asarray(log_ratio, dtype=float)
        phi_val = np.asarray(phi_val, dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            prod = lr * np.exp(lr - phi_val)
        return np.where(np.isneginf(lr), 0.0, prod)

    def descriptor(self):
        return {"type": "kl"}


class AlphaDivergence(DivergenceGenerator):
    """Polynomial generator F(y) = (y**alpha - 1) / (alpha (alpha - 1)).

    Restricted to alpha > 1 so that F grows superlinearly.  The inverse of
    F' is clamped at zero: arguments <= 0 map to ratio 0.
    """

    kind = "alpha"

    def __init__(self, alpha):
        alpha = float(alpha)
        if alpha <= 1.0:
            raise ValueError("alpha must exceed 1")
        self.alpha = alpha
        self.f_at_zero = -1.0 / (alpha * (alpha - 1.0))

    def f_value(self, y):
        y = np.asarray(y, dtype=float)
        a = self.alpha
        out = (y ** a - 1.0) / (a * (a - 1.0))
        return out if out.ndim else float(out)

    def f_prime(self, y):
        y = np.asarray(y, dtype=float)
        out = y ** (self.alpha - 1.0) / (self.alpha - 1.0)
        return out if out.ndim else float(out)

    def f_prime_at_log(self, u):
        u = np.asarray(u, dtype=float)
        with np.errstate(over="ignore"):
            out = np.exp((self.alpha - 1.0) * u) / (self.alpha - 1.0)
        return out if out.ndim else float(out)

    def log_f_prime_inverse(self, z):
        z = np.asarray(z, dtype=float)
        a = self.alpha
        with np.errstate(divide="ignore"):
            out = np.where(z > 0.0, np.log(np.maximum((a - 1.0) * z, 1e-300)) / (a - 1.0),
                           -np.inf)
        return out if out.ndim else float(out)

    def inverse_breakpoints(self, alpha1, alpha2):
        if alpha2 > 0.0 and alpha1 < 0.0:
            return (-alpha1 / alpha2,)
        return ()

    def ratio_integrand(self, log_ratio, phi_val):
        lr = np.asarray(log_ratio, dtype=float)
        phi_val = np.asarray(phi_val, dtype=float)
        a = self.alpha
        with np.errstate(over="ignore"):
            big = np.exp(np.where(np.isneginf(lr), -np.inf, a * lr - phi_val))
            base = np.exp(-phi_val)
        return (big - base) / (a * (a - 1.0))

    def descriptor(self):
        return {"type": "alpha", "alpha": self.alpha}


class FPhiDivergence(DivergenceGenerator):
    """Tail-adaptive generator for a class (ii) nominal model.

    Parameters
    ----------
    phi : PhiFamily
        Concave surrogate of the nominal's log-density exponent.
    theta : float
        Moment order targeted by the uncertainty ball; must exceed 1.
        ``theta = 1`` is accepted only with ``allow_kl_limit=True`` and is
        meant for the algebraic check that a linear surrogate with
        ``theta = 1`` reproduces the KL generator.
    ybar : float, optional
        Splice point between the KL-like branch and the tail branch.
        Defaults to e; must satisfy ``log(ybar) >= phi(x_bar)``.
    """

    kind = "fphi"

    def __init__(self, phi: PhiFamily, theta, ybar=math.e, *, allow_kl_limit=False):
        theta = float(theta)
        if theta <= 1.0 and not (allow_kl_limit and theta == 1.0):
            raise ValueError("theta must exceed 1")
        self.phi = phi
        self.theta = theta
        self.ybar = float(ybar)
        self.log_ybar = math.log(self.ybar)
        self.a, self.b = fphi_coefficients(phi, theta, self.ybar)
        self.tail_weight = TailWeight(self.a, theta, phi)
        # F'( ybar ) from either branch
        self._slope_at_splice = 1.0 + self.log_ybar

    def _big_f_value(self, y):
        u = np.log(y)
        return self.a * np.exp(u + self.theta * self.phi.log_phi_inverse(u)) + self.b

    def f_value(self, y):
        y = np.asarray(y, dtype=float)
        out = np.zeros_like(y)
        small = (y > 0.0) & (y <= self.ybar)
        big = y > self.ybar
        if small.any():
            ys = y[small]
            out[small] = ys * np.log(ys)
        if big.any():
            out[big] = self._big_f_value(y[big])
        return out if out.ndim else float(out)

    def f_prime(self, y):
        y = np.asarray(y, dtype=float)
        out = np.full_like(y, np.nan)
        small = (y > 0.0) & (y <= self.ybar)
        big = y > self.ybar
        if small.any():
            out[small] = np.log(y[small]) + 1.0
        if big.any():
            u = np.log(y[big])
            tw = self.tail_weight
            out[big] = tw.value(u) * (1.0 + tw.ratio_prime(u))
        return out if out.ndim else float(out)

    def f_prime_at_log(self, u):
        u = np.asarray(u, dtype=float)
        scalar = u.ndim == 0
        u1 = np.atleast_1d(u)
        out = np.where(u1 <= self.log_ybar, u1 + 1.0, 0.0)
        big = u1 > self.log_ybar
        if big.any():
            out[big] = self._slope_big(u1[big])
        return float(out[0]) if scalar else out

    def _slope_big(self, u):
        tw = self.tail_weight
        return tw.value(u) * (1.0 + tw.ratio_prime(u))

    def _slope_big_prime(self, u):
        tw = self.tail_weight
        return tw.value(u) * (tw.ratio_prime(u) + tw.ratio_second(u))

    def _invert_slope(self, z):
        """Solve value(u) + prime(u) = z for u >= log(ybar), vectorized.

        The slope is strictly increasing there, so a doubling bracket plus
        safeguarded Newton converges; non-convergence raises with the last
        bracket.
        """
        z = np.atleast_1d(np.asarray(z, dtype=float))
        lo = np.full_like(z, self.log_ybar)
        hi = lo + np.maximum(1.0, np.abs(lo))
        for _ in range(200):
            need = self._slope_big(hi) < z
            if not need.any():
                break
            hi = np.where(need, lo + 2.0 * (hi - lo), hi)
        else:
            bad = int(np.argmax(self._slope_big(hi) < z))
            raise RootBracketError("bracket expansion for the slope inverse failed",
                                   lo=float(lo[bad]), hi=float(hi[bad]),
                                   f_lo=float(self._slope_big(lo[bad])),
                                   f_hi=float(self._slope_big(hi[bad])))
        u = 0.5 * (lo + hi)
        target_tol = 1e-13 * (np.abs(z) + 1.0)
        for _ in range(120):
            h = self._slope_big(u)
            resid = h - z
            done = np.abs(resid) <= target_tol
            if done.all():
                break
            lo = np.where(resid < 0.0, u, lo)
            hi = np.where(resid > 0.0, u, hi)
            hp = self._slope_big_prime(u)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = np.where(hp > 0.0, resid / np.where(hp > 0.0, hp, 1.0), 0.0)
            u_new = u - step
            inside = (u_new > lo) & (u_new < hi)
            u = np.where(done, u, np.where(inside, u_new, 0.5 * (lo + hi)))
        else:
            bad = int(np.argmax(np.abs(self._slope_big(u) - z) > target_tol))
            raise RootBracketError("slope inverse did not converge",
                                   lo=float(lo[bad]), hi=float(hi[bad]),
                                   f_lo=float(self._slope_big(lo[bad]) - z[bad]),
                                   f_hi=float(self._slope_big(hi[bad]) - z[bad]))
        return u

    def log_f_prime_inverse(self, z):
        z = np.asarray(z, dtype=float)
        scalar = z.ndim == 0
        z1 = np.atleast_1d(z)
        out = np.empty_like(z1)
        small = z1 <= self._slope_at_splice
        out[small] = z1[small] - 1.0
        if (~small).any():
            out[~small] = self._invert_slope(z1[~small])
        return float(out[0]) if scalar else out

    def inverse_breakpoints(self, alpha1, alpha2):
        # the generator is C^1 but not C^2 at the splice, so the inverse
        # slope map has a derivative kink where a1 + a2 x crosses F'(ybar)
        if alpha2 > 0.0:
            return ((self._slope_at_splice - alpha1) / alpha2,)
        return ()

    def ratio_integrand(self, log_ratio, phi_val):
        lr = np.asarray(log_ratio, dtype=float)
        phi_val = np.asarray(phi_val, dtype=float)
        out = np.zeros_like(lr)
        finite = ~np.isneginf(lr)
        small = finite & (lr <= self.log_ybar)
        big = finite & (lr > self.log_ybar)
        with np.errstate(over="ignore"):
            if small.any():
                out[small] = lr[small] * np.exp(lr[small] - phi_val[small])
            if big.any():
                u = lr[big]
                out[big] = self.a * np.exp(
                    u + self.theta * self.phi.log_phi_inverse(u) - phi_val[big]) \
                    + self.b * np.exp(-phi_val[big])
        return out

    def descriptor(self):
        return {"type": "fphi", "theta": self.theta, "ybar": self.ybar}


def divergence(gen: DivergenceGenerator, eta, nu, cfg=None) -> IntegralResult:
    """D_F(eta | nu) = integral of F(g/f) f over the nominal support.

    The ratio ``g/f`` is only ever formed in log space.  A support mismatch
    (mass of ``eta`` where ``nu`` has none) is an infinite divergence and is
    returned as a diverged result with a distinct reason, not raised.

    When the alternative's support starts strictly inside the nominal's, the
    integrand jumps there; the head piece is the exact constant
    ``F(0) * cdf_nu(support edge)`` and only the smooth part is quadratured.
    """
    cfg = cfg or QuadratureConfig()
    if eta.support_min < nu.support_min - 1e-12:
        return IntegralResult(float("inf"), float("inf"), IntegralStatus.DIVERGED,
                              0, "support mismatch: alternative has mass below "
                                 "the nominal support")

    lo = nu.support_min
    eta_lo = eta.support_min

    head = 0.0
    start = lo
    if eta_lo > lo:
        head = gen.f_at_zero * float(nu.cdf(eta_lo))
        start = eta_lo

    def integrand(x):
        x = np.asarray(x, dtype=float)
        xc = np.maximum(x, start)
        phi_val = np.asarray(nu.log_density_exponent(xc), dtype=float)
        gamma = np.asarray(eta.log_density_exponent(xc), dtype=float)
        return gen.ratio_integrand(phi_val - gamma, phi_val)

    breaks = tuple(b for m in (eta, nu) for b in m.breakpoints() if b > start)
    res = integrate_semi_infinite(integrand, start, cfg, breakpoints=breaks)
    res.value = res.value + head
    return res
