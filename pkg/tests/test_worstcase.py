import math

import numpy as np
import pytest

from divball.distributions import (Exponential, GeneralizedLognormal, Pareto,
                                   TruncatedAbove, Weibull)
from divball.divergence import (AlphaDivergence, FPhiDivergence, KLDivergence,
                                divergence)
from divball.errors import InfiniteWorstCaseError, UnsupportedFamilyError
from divball.quadrature import QuadratureConfig, integrate_semi_infinite
from divball.worstcase import (SolverConfig, WorstCaseProblem, kl_tilt_oracle,
                               asymptotic_equivalent, solve, solve_for_mean,
                               worst_case_density)

CFG = SolverConfig()
QUAD = CFG.quad

LOGN = GeneralizedLognormal(2.0, 1.0, 0.0)
KAPPA_HALF_RATE = math.log(0.5) + 2.0 - 1.0  # radius reaching the half-rate tilt


class TestWorstCaseDensity:
    def test_kl_identity_multipliers_recover_nominal(self):
        nu = Exponential(1.0)
        xs = np.linspace(0.0, 8.0, 40)
        got = worst_case_density(KLDivergence(), nu, 1.0, 0.0, xs)
        assert got == pytest.approx(nu.density(xs), rel=1e-12)

    def test_kl_tilting_form(self):
        nu = Exponential(1.0)
        a1, a2 = 0.7, 0.25
        xs = np.linspace(0.0, 20.0, 50)
        expected = math.exp(a1 - 1.0) * np.exp(-(1.0 - a2) * xs)
        got = worst_case_density(KLDivergence(), nu, a1, a2, xs)
        assert got == pytest.approx(expected, rel=1e-12)

    def test_alpha_two_clamped_linear_form(self):
        nu = Exponential(1.0)
        xs = np.linspace(0.0, 5.0, 30)
        got = worst_case_density(AlphaDivergence(2.0), nu, -1.0, 1.0, xs)
        expected = np.maximum(xs - 1.0, 0.0) * nu.density(xs)
        assert got == pytest.approx(expected, rel=1e-12, abs=1e-300)

    def test_zero_below_support(self, case_nominal):
        gen = FPhiDivergence(case_nominal.phi_triple(), 2.0)
        assert worst_case_density(gen, case_nominal, 0.5, 0.01, 1.0) == 0.0


class TestSolveKL:
    def test_matches_tilt_oracle_exactly_at_half_rate(self):
        sol = solve(WorstCaseProblem(Exponential(1.0), KLDivergence(),
                                     KAPPA_HALF_RATE), CFG)
        assert sol.worst_mean == pytest.approx(2.0, abs=1e-4)
        # tilted rate appears as 1 - alpha2
        assert 1.0 - sol.alpha2 == pytest.approx(0.5, abs=1e-6)

    @pytest.mark.parametrize("kappa", [0.01, 0.1, KAPPA_HALF_RATE])
    def test_matches_tilt_oracle_across_radii(self, kappa):
        oracle_mean, _ = kl_tilt_oracle(Exponential(1.0), kappa)
        sol = solve(WorstCaseProblem(Exponential(1.0), KLDivergence(), kappa), CFG)
        assert sol.worst_mean == pytest.approx(oracle_mean, rel=1e-4)

    def test_tiny_radius_recovers_nominal_mean(self):
        sol = solve(WorstCaseProblem(Exponential(1.0), KLDivergence(), 1e-8), CFG)
        assert abs(sol.worst_mean - 1.0) <= 1e-3

    def test_refuses_heavy_tailed_nominals(self, case_nominal):
        for nominal in (case_nominal, LOGN, Pareto(2.0, 1.0)):
            with pytest.raises(InfiniteWorstCaseError, match="worst case infinite"):
                solve(WorstCaseProblem(nominal, KLDivergence(), 0.1), CFG)


class TestSolveFeasibility:
    @pytest.mark.parametrize("gen_builder,nominal", [
        (lambda nu: KLDivergence(), Exponential(1.0)),
        (lambda nu: AlphaDivergence(2.0), Exponential(1.0)),
        (lambda nu: AlphaDivergence(2.0), Pareto(4.0, 1.0)),
        (lambda nu: FPhiDivergence(nu.phi_triple(), 2.0), LOGN),
    ])
    def test_constraints_hold_at_solution(self, gen_builder, nominal):
        gen = gen_builder(nominal)
        problem = WorstCaseProblem(nominal, gen, 0.05)
        sol = solve(problem, CFG)
        assert abs(sol.normalization_residual) <= 1e-6
        assert sol.achieved_divergence == pytest.approx(0.05, rel=1e-6)
        assert sol.alpha2 > 0.0
        # independent recomputation of the divergence at the multipliers
        recomputed = divergence(
            gen, _FrozenWorstCase(gen, nominal, sol.alpha1, sol.alpha2),
            nominal, QUAD)
        assert recomputed.converged
        assert recomputed.value == pytest.approx(0.05, rel=1e-5)

    def test_worst_mean_exceeds_nominal_and_grows_with_radius(self, case_nominal):
        gen = FPhiDivergence(case_nominal.phi_triple(), 1.5)
        nominal_mean = case_nominal.moment(1.0, QUAD).value
        means = []
        for kappa in (0.006, 0.007, 0.00788):
            sol = solve(WorstCaseProblem(case_nominal, gen, kappa), CFG)
            means.append(sol.worst_mean)
            assert sol.worst_mean >= nominal_mean
        assert means[0] < means[1] < means[2]

    def test_fphi_requires_class_ii_nominal(self):
        gen = FPhiDivergence(LOGN.phi_triple(), 2.0)
        with pytest.raises(UnsupportedFamilyError):
            solve(WorstCaseProblem(Exponential(1.0), gen, 0.01), CFG)

    def test_alpha_at_tail_boundary_surfaces_divergence(self):
        # tilting a degree-4 tail by the conjugate power of alpha = 1.5
        # leaves exactly a harmonic mean integrand: the supremum is infinite
        with pytest.raises(InfiniteWorstCaseError):
            solve(WorstCaseProblem(Pareto(3.0, 1.0), AlphaDivergence(1.5),
                                   0.05), CFG)


class _FrozenWorstCase:
    """Density wrapper for the extremal model at fixed multipliers."""

    def __init__(self, gen, nu, a1, a2):
        self.gen = gen
        self.nu = nu
        self.a1 = a1
        self.a2 = a2
        self.support_min = nu.support_min

    def density(self, x):
        return worst_case_density(self.gen, self.nu, self.a1, self.a2, x)

    def log_density_exponent(self, x):
        x = np.asarray(x, dtype=float)
        lr = np.asarray(self.gen.log_f_prime_inverse(self.a1 + self.a2 * x),
                        dtype=float)
        return np.asarray(self.nu.log_density_exponent(x), dtype=float) - lr

    def breakpoints(self):
        pts = list(self.nu.breakpoints()) \
            + list(self.gen.inverse_breakpoints(self.a1, self.a2))
        return tuple(p for p in pts if p > self.support_min)


class TestSolveForMean:
    def test_reaches_target_and_radius_roundtrips(self, case_nominal):
        gen = AlphaDivergence(2.0)
        nominal_mean = case_nominal.moment(1.0, QUAD).value
        target = 1.10 * nominal_mean
        sol = solve_for_mean(case_nominal, gen, target, CFG)
        assert sol.worst_mean == pytest.approx(target, rel=1e-6)
        # solving the ball of the achieved radius reproduces the mean
        back = solve(WorstCaseProblem(case_nominal, gen,
                                      sol.achieved_divergence), CFG)
        assert back.worst_mean == pytest.approx(target, rel=1e-5)

    def test_rejects_target_below_nominal(self, case_nominal):
        with pytest.raises(ValueError):
            solve_for_mean(case_nominal, AlphaDivergence(2.0), 1.0, CFG)


class TestTiltOracle:
    def test_half_rate_value(self):
        mean, rate = kl_tilt_oracle(Exponential(1.0), KAPPA_HALF_RATE)
        assert rate == pytest.approx(0.5, rel=1e-12)
        assert mean == pytest.approx(2.0, rel=1e-12)

    def test_zero_radius_is_identity(self):
        mean, rate = kl_tilt_oracle(Exponential(2.0), 0.0)
        assert mean == 0.5
        assert rate == 2.0

    def test_scale_equivariance(self):
        mean, _ = kl_tilt_oracle(Exponential(2.0), KAPPA_HALF_RATE)
        assert mean == pytest.approx(1.0, rel=1e-12)

    def test_exponential_only(self):
        with pytest.raises(UnsupportedFamilyError):
            kl_tilt_oracle(LOGN, 0.1)


class TestAsymptoticEquivalent:
    def test_positive_wherever_defined(self, case_nominal):
        gen = FPhiDivergence(case_nominal.phi_triple(), 2.0)
        vals = asymptotic_equivalent(gen, case_nominal, 0.5, 1.0,
                                     np.array([1e3, 1e4, 1e5]))
        assert np.all(vals > 0.0)

    def test_lognormal_ratio_approaches_a_constant(self):
        # The exact extremal density and the closed form stay a bounded
        # factor apart; the factor drifts toward exp(-1), not 1 (the slope
        # correction inside the inverse shifts the exponent by one unit).
        gen = FPhiDivergence(LOGN.phi_triple(), 2.0)
        xs = np.array([1e3, 1e4, 1e5, 1e6])
        exact = worst_case_density(gen, LOGN, 0.5, 1.0, xs)
        approx_ = asymptotic_equivalent(gen, LOGN, 0.5, 1.0, xs)
        ratio = exact / approx_
        assert np.all(np.diff(ratio) < 0.0)
        assert 0.3 < ratio[-1] < 0.5

    def test_weibull_constant_variants_disagree(self):
        w = Weibull(0.4015, 0.6821)
        gen = FPhiDivergence(w.phi_triple(), 2.0)
        xs = np.array([1e5, 1e6])
        a = asymptotic_equivalent(gen, w, 0.5, 1.0, xs,
                                  weibull_constant="scale_power_theta")
        b = asymptotic_equivalent(gen, w, 0.5, 1.0, xs, weibull_constant="scale")
        assert np.all(np.abs(np.log(a) - np.log(b)) > 0.1)

    def test_rejects_unsupported_nominal(self):
        gen = FPhiDivergence(LOGN.phi_triple(), 2.0)
        with pytest.raises(UnsupportedFamilyError):
            asymptotic_equivalent(gen, GeneralizedLognormal(3.0, 1.0, 0.0),
                                  0.5, 1.0, 1e4)

    def test_rejects_too_small_x(self):
        gen = FPhiDivergence(LOGN.phi_triple(), 2.0)
        with pytest.raises(ValueError):
            asymptotic_equivalent(gen, LOGN, 0.0, 1e-6, 1.0)


class TestStationarity:
    def test_projected_bumps_do_not_move_the_mean(self, case_nominal):
        """Mass- and radius-preserving perturbations leave the mean flat.

        Feasible first-order directions satisfy integral(delta) = 0 and
        integral(F'(g/f) delta) = 0; at a true optimizer any such direction
        has zero mean derivative.  Built from random Gaussian bump triples
        projected onto the two constraints.
        """
        gen = FPhiDivergence(case_nominal.phi_triple(), 2.0)
        sol = solve(WorstCaseProblem(case_nominal, gen, 0.007), CFG)
        lo = case_nominal.support_min
        rng = np.random.default_rng(7)

        def moments(center, width):
            def bump(x):
                return np.exp(-0.5 * ((x - center) / width) ** 2)

            def fprime_weight(x):
                x = np.maximum(np.asarray(x, dtype=float), lo)
                lr = gen.log_f_prime_inverse(sol.alpha1 + sol.alpha2 * x)
                return gen.f_prime_at_log(np.asarray(lr, dtype=float)) * bump(x)

            m0 = integrate_semi_infinite(bump, lo, QUAD).value
            m1 = integrate_semi_infinite(lambda x: x * bump(x), lo, QUAD).value
            mf = integrate_semi_infinite(fprime_weight, lo, QUAD).value
            return np.array([m0, mf, m1])

        for _ in range(5):
            centers = lo + rng.uniform(1.0, 60.0, size=3)
            widths = rng.uniform(0.5, 4.0, size=3)
            cols = [moments(c, w) for c, w in zip(centers, widths)]
            a = np.array([[cols[1][0], cols[2][0]],
                          [cols[1][1], cols[2][1]]])
            rhs = -np.array([cols[0][0], cols[0][1]])
            c2, c3 = np.linalg.solve(a, rhs)
            mean_shift = cols[0][2] + c2 * cols[1][2] + c3 * cols[2][2]
            scale = abs(cols[0][2]) + abs(c2 * cols[1][2]) + abs(c3 * cols[2][2])
            assert abs(mean_shift) <= 1e-6 * max(scale, 1e-12)
