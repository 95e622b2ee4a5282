import numpy as np
import pytest

from divball.distributions import Weibull
from divball.quadrature import (IntegralStatus, QuadratureConfig,
                                integrate_interval, integrate_semi_infinite)

CFG = QuadratureConfig()


class TestIntegrateInterval:
    def test_constant(self):
        res = integrate_interval(lambda x: np.ones_like(x), 0.0, 1.0, CFG)
        assert res.converged
        assert res.value == pytest.approx(1.0, abs=1e-12)

    def test_gamma_two(self):
        res = integrate_interval(lambda x: x * np.exp(-x), 0.0, 50.0, CFG)
        assert res.converged
        assert res.value == pytest.approx(1.0, abs=1e-10)

    def test_weibull_density_normalizes_despite_endpoint_singularity(self):
        w = Weibull(0.4015, 0.6821)
        res = integrate_interval(w.density, 0.0, 2000.0, CFG)
        assert res.converged
        # tail beyond the cutoff is ~3e-10
        assert res.value == pytest.approx(1.0, abs=1e-8)

    def test_error_estimate_honored_when_converged(self):
        res = integrate_interval(lambda x: np.sin(x) ** 2, 0.0, 7.0, CFG)
        assert res.converged
        assert res.error_estimate <= max(CFG.abs_tol, CFG.rel_tol * abs(res.value))

    def test_invalid_bounds(self):
        with pytest.raises(ValueError):
            integrate_interval(lambda x: x, 1.0, 0.0, CFG)

    def test_nan_integrand_is_flagged_not_silent(self):
        def bad(x):
            out = np.ones_like(x)
            out[x > 0.5] = np.nan
            return out

        res = integrate_interval(bad, 0.0, 1.0, CFG)
        assert res.status is IntegralStatus.INCONCLUSIVE
        assert "NaN" in res.detail

    def test_evaluation_count_reported(self):
        res = integrate_interval(lambda x: np.exp(-x), 0.0, 1.0, CFG)
        assert res.evaluations >= 15
        assert res.evaluations % 15 == 0


class TestIntegrateSemiInfinite:
    def test_exponential(self):
        res = integrate_semi_infinite(lambda x: np.exp(-x), 0.0, CFG)
        assert res.converged
        assert res.value == pytest.approx(1.0, abs=1e-9)

    def test_inverse_square(self):
        res = integrate_semi_infinite(lambda x: 1.0 / (1.0 + x) ** 2, 0.0, CFG)
        assert res.converged
        assert res.value == pytest.approx(1.0, rel=1e-8)

    def test_harmonic_tail_diverges(self):
        res = integrate_semi_infinite(lambda x: 1.0 / (1.0 + x), 0.0, CFG)
        assert res.status is IntegralStatus.DIVERGED
        assert res.value == np.inf

    def test_nonzero_lower_limit(self):
        res = integrate_semi_infinite(lambda x: np.exp(-(x - 3.0)), 3.0, CFG)
        assert res.converged
        assert res.value == pytest.approx(1.0, abs=1e-9)

    def test_agrees_with_large_cutoff_interval(self):
        fn = lambda x: np.exp(-0.5 * x) * (1.0 + np.sin(x) ** 2)
        semi = integrate_semi_infinite(fn, 0.0, CFG)
        finite = integrate_interval(fn, 0.0, 120.0, CFG)
        assert semi.converged and finite.converged
        assert semi.value == pytest.approx(
            finite.value, abs=10 * (semi.error_estimate + finite.error_estimate) + 1e-12)

    def test_monotone_partials_for_nonnegative_integrand(self):
        fn = lambda x: 1.0 / (1.0 + x) ** 3
        cuts = [10.0, 100.0, 1000.0, 10000.0]
        partials = []
        total = 0.0
        lo = 0.0
        for hi in cuts:
            total += integrate_interval(fn, lo, hi, CFG).value
            partials.append(total)
            lo = hi
        assert all(b >= a for a, b in zip(partials, partials[1:]))


class TestLinearity:
    def test_linearity_on_random_smooth_integrands(self):
        rng = np.random.default_rng(42)
        for _ in range(10):
            c1, c2 = rng.uniform(-3.0, 3.0, size=2)
            w1, w2 = rng.uniform(0.5, 2.5, size=2)

            f = lambda x: np.exp(-w1 * x)
            g = lambda x: x * np.exp(-w2 * x)
            combo = lambda x: c1 * f(x) + c2 * g(x)

            rf = integrate_semi_infinite(f, 0.0, CFG)
            rg = integrate_semi_infinite(g, 0.0, CFG)
            rc = integrate_semi_infinite(combo, 0.0, CFG)
            assert rc.converged
            budget = 10 * (abs(c1) * rf.error_estimate + abs(c2) * rg.error_estimate
                           + rc.error_estimate) + 1e-12
            assert rc.value == pytest.approx(c1 * rf.value + c2 * rg.value, abs=budget)


class TestConfigValidation:
    def test_rejects_nonpositive_tolerances(self):
        with pytest.raises(ValueError):
            QuadratureConfig(abs_tol=0.0)
        with pytest.raises(ValueError):
            QuadratureConfig(rel_tol=-1.0)

    def test_rejects_unsorted_grid(self):
        with pytest.raises(ValueError):
            QuadratureConfig(tail_cutoff_grid=(10.0, 5.0))
