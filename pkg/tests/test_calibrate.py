import math

import pytest

from divball.calibrate import (CalibrationSpec, cross_radius, figure1_sweep,
                               margin_table, radius_for_margin)
from divball.distributions import Exponential, GeneralizedLognormal
from divball.divergence import AlphaDivergence, FPhiDivergence
from divball.errors import CalibrationError
from divball.worstcase import SolverConfig, solve_for_mean

CFG = SolverConfig()


class TestRadiusForMargin:
    def test_zero_margin_is_degenerate(self):
        assert radius_for_margin(Exponential(1.0), AlphaDivergence(2.0),
                                 0.0, CFG) == 0.0

    def test_exponential_kl_doubling_margin(self):
        from divball.divergence import KLDivergence
        kappa = radius_for_margin(Exponential(1.0), KLDivergence(), 1.0, CFG)
        # doubling the mean of a unit exponential tilts the rate to 1/2
        assert kappa == pytest.approx(math.log(0.5) + 1.0, rel=1e-5)

    def test_alpha_margin_on_case_nominal(self, case_nominal):
        kappa = radius_for_margin(case_nominal, AlphaDivergence(2.0), 0.10, CFG)
        assert 0.0 < kappa < 0.05


class TestCrossRadius:
    def test_self_consistency(self, case_nominal):
        """A generator measures its own worst case back to the input radius."""
        gen = FPhiDivergence(case_nominal.phi_triple(), 1.5)
        mean = case_nominal.moment(1.0, CFG.quad).value
        sol = solve_for_mean(case_nominal, gen, 1.05 * mean, CFG)
        kappa = cross_radius(case_nominal, sol, gen, CFG)
        assert kappa == pytest.approx(sol.achieved_divergence, rel=1e-5)

    def test_positive_for_distinct_models(self, case_nominal):
        mean = case_nominal.moment(1.0, CFG.quad).value
        src = solve_for_mean(case_nominal, AlphaDivergence(2.0),
                             1.05 * mean, CFG)
        gen = FPhiDivergence(case_nominal.phi_triple(), 1.5)
        assert cross_radius(case_nominal, src, gen, CFG) > 0.0


class TestMarginTableSmall:
    def test_single_cell_against_reference_pipeline(self, case_nominal):
        spec = CalibrationSpec(case_nominal, margin=0.10,
                               alpha_grid=(1.5,), theta_grid=(1.1,))
        table = margin_table(spec, CFG)
        cell = table.cell(1.1, 1.5)
        assert cell.error == ""
        # reproduced with an independent scalar-quadrature prototype
        assert cell.excess == pytest.approx(0.1220, abs=0.02)
        assert cell.excess > 0.0
        assert table.nominal_mean == pytest.approx(24.1715, abs=0.05)

    def test_cell_error_isolation(self):
        # a light-tailed nominal cannot carry the tail-adaptive generator,
        # so every cell fails but the table still comes back
        spec = CalibrationSpec(Exponential(1.0), margin=0.10,
                               alpha_grid=(2.0,), theta_grid=(1.5,))
        table = margin_table(spec, CFG)
        cell = table.cell(1.5, 2.0)
        assert cell.error != ""
        assert math.isnan(cell.excess)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            CalibrationSpec(Exponential(1.0), margin=0.0)
        with pytest.raises(ValueError):
            CalibrationSpec(Exponential(1.0), alpha_grid=(1.0, 2.0))
        with pytest.raises(ValueError):
            CalibrationSpec(Exponential(1.0), theta_grid=())


class TestSweepSmall:
    def test_three_point_curve_monotone(self, case_nominal):
        records = figure1_sweep(case_nominal, [1.5], (0.006, 0.00788), 3, CFG)
        assert len(records) == 3
        assert all(r.error == "" for r in records)
        means = [r.worst_mean for r in records]
        assert means[0] < means[1] < means[2]

    def test_threaded_run_matches_serial(self, case_nominal):
        serial = figure1_sweep(case_nominal, [1.5], (0.006, 0.0079), 3, CFG,
                               threads=1)
        threaded = figure1_sweep(case_nominal, [1.5], (0.006, 0.0079), 3, CFG,
                                 threads=3)
        for a, b in zip(serial, threaded):
            assert a.worst_mean == pytest.approx(b.worst_mean, rel=1e-12)

    def test_rejects_bad_range(self, case_nominal):
        with pytest.raises(ValueError):
            figure1_sweep(case_nominal, [1.5], (0.01, 0.006), 3, CFG)
