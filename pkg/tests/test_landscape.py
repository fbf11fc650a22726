import unittest

import numpy as np

from fracns.errors import ParameterError, UsageError
from fracns.modules.landscape import (
    ComparisonLevels,
    LandscapeCurve,
    check_landscape,
    comparison_levels,
    constant_shift_identity,
    energy_curve,
    epsilon_sweep,
    frozen_levels,
    frozen_monotonicity_check,
    resolution_stability,
)
from fracns.modules.spectral import Grid
from tests.helpers import (
    ETA,
    S,
    autonomous,
    contained,
    options,
    pure_power,
    two_bump_spec,
)

MASSES = [0.5, 1.0, 1.5, 2.0]


class TestEnergyCurve(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.ctx = contained()
        cls.curve = energy_curve(cls.ctx, MASSES, options(), threads=2)

    def test_every_point_converged(self):
        self.assertEqual(self.curve.masses, MASSES)
        for r in self.curve.results:
            self.assertTrue(r.converged, r.status)
            self.assertLess(abs(r.pohozaev_rel), 1e-3)

    def test_landscape_properties_hold(self):
        pairs = [(0.5, 0.5), (0.5, 1.5), (1.0, 1.0)]
        report = check_landscape(self.curve, pairs, thetas=[1.0, 2.0, 1.5])
        self.assertTrue(report.passed, report.failures)
        self.assertGreater(report.meta["C_emp"], 0.0)
        self.assertTrue(report["strict(1,1)"].passed)
        self.assertTrue(report["scaling(2,1)"].passed)
        self.assertTrue(report["scaling_competitor(2,2)"].passed)
        self.assertTrue(report["below_linear_level(0.5)"].passed)

    def test_energy_superlinear_in_mass(self):
        # with η split off the level scales like a^{4/3} for s = 1/2, q = 5/2
        e1 = self.curve.energy_at(1.0) - ETA / 2
        e2 = self.curve.energy_at(2.0) - ETA
        self.assertAlmostEqual(e2 / e1, 2 ** (4 / 3), delta=1e-3)

    def test_unity_scaling_is_trivial(self):
        report = check_landscape(self.curve, [], thetas=[1.0])
        for a in MASSES:
            self.assertEqual(report[f"scaling(1,{a:g})"].witness, 0.0)

    def test_missing_mass_and_bad_theta(self):
        with self.assertRaises(UsageError):
            check_landscape(self.curve, [(0.5, 0.7)], [])
        with self.assertRaises(ParameterError):
            check_landscape(self.curve, [], [0.5])

    def test_rows(self):
        rows = self.curve.rows
        self.assertEqual([row["mass"] for row in rows], MASSES)
        self.assertEqual(
            set(rows[0]),
            {"mass", "energy", "lambda", "pohozaev_rel", "pohozaev_virial", "converged"},
        )

    def test_warm_start_agrees(self):
        warm = energy_curve(self.ctx, MASSES[:2], options(), warm_start=True)
        self.assertEqual(warm.warm_started, [False, True])
        for a in MASSES[:2]:
            self.assertAlmostEqual(
                warm.energy_at(a), self.curve.energy_at(a), delta=1e-9
            )

    def test_rejects_bad_masses(self):
        with self.assertRaises(ParameterError):
            energy_curve(self.ctx, [1.0, 0.5], options())
        with self.assertRaises(ParameterError):
            energy_curve(self.ctx, [0.0, 1.0], options())

    def test_curve_requires_increasing_masses(self):
        with self.assertRaises(ParameterError):
            LandscapeCurve(masses=[1.0, 1.0], energies=[0.0, 0.0], results=[None, None])


class TestResolution(unittest.TestCase):
    def test_refinement_is_stable(self):
        ctx = autonomous(box_length=64, points=256)
        check = resolution_stability(ctx, 1.0, options())
        self.assertEqual(check.fine.u.grid.points, (512,))
        self.assertLess(check.relative_change, 1e-6)

    def test_factor_must_be_power_of_two(self):
        with self.assertRaises(ParameterError):
            resolution_stability(autonomous(), 1.0, options(), factor=3)


class TestComparisonLevels(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.grid = Grid.uniform(1, 128, 256)
        cls.spec = two_bump_spec()
        cls.levels = comparison_levels(
            cls.spec, pure_power(), S, cls.grid, 1.0, 0.5, options(), threads=2
        )

    def test_ordering(self):
        report = self.levels.report()
        self.assertTrue(report.passed, report.failures)
        self.assertGreater(self.levels.rho0, 0.0)
        self.assertGreater(self.levels.eps_gap, 0.0)

    def test_equal_centers_share_one_solve(self):
        results = self.levels.results
        self.assertIs(results["center_0"], results["center_1"])
        self.assertEqual(self.levels.E_ai_a[0], self.levels.E_ai_a[1])

    def test_dict(self):
        d = self.levels.dict
        self.assertEqual(set(d["levels"]), {"infinity", "eps", "center_0", "center_1"})
        self.assertEqual(d["eps"], 0.5)

    def test_flat_weight_collapses_the_levels(self):
        spec = two_bump_spec(centers=((0.0,),), h_peak=1.0, v_depth=0.0)
        infinity, centers = frozen_levels(spec, pure_power(), S, self.grid, 1.0, options())
        self.assertIs(infinity, centers[0])
        levels = ComparisonLevels(
            E_eps_a=infinity.energy,
            E_ai_a=[centers[0].energy],
            E_inf_a=infinity.energy,
            a=1.0,
            eps=1.0,
        )
        report = levels.report()
        self.assertFalse(report["levels.center_below_infinity[0]"].passed)
        self.assertTrue(report["levels.infinity_negative"].passed)


class TestEpsilonSweep(unittest.TestCase):
    def test_gap_shrinks_with_eps(self):
        spec = two_bump_spec(centers=((0.0,),))
        grid = Grid.uniform(1, 128, 256)
        sweep, trend = epsilon_sweep(
            spec, pure_power(), S, [grid, grid], 1.0, [0.5, 0.25], options()
        )
        self.assertEqual(len(sweep), 2)
        self.assertTrue(trend.passed, trend.failures)
        self.assertLess(sweep[1].E_eps_a, sweep[0].E_eps_a)

    def test_argument_checks(self):
        spec = two_bump_spec(centers=((0.0,),))
        grid = Grid.uniform(1, 128, 256)
        with self.assertRaises(ParameterError):
            epsilon_sweep(spec, pure_power(), S, [grid, grid], 1.0, [0.25, 0.5], options())
        with self.assertRaises(ParameterError):
            epsilon_sweep(spec, pure_power(), S, [grid], 1.0, [0.5, 0.25], options())


class TestFrozenProblems(unittest.TestCase):
    def setUp(self):
        self.grid = Grid.uniform(1, 128, 256)

    def check(self, *coefficients):
        return frozen_monotonicity_check(
            *coefficients, pure_power(), S, self.grid, 1.0, options()
        )

    def test_larger_weight_lowers_the_level(self):
        report = self.check(1.0, 0.0, 2.0, 0.0)
        self.assertTrue(report.passed, report.failures)
        self.assertGreater(report.meta["margin"], 0.0)

    def test_deeper_potential_shifts_by_a_constant(self):
        report = self.check(1.0, 0.0, 1.0, -1.0)
        self.assertTrue(report.passed, report.failures)
        self.assertAlmostEqual(report.meta["margin"], 0.5, delta=1e-8)

    def test_identical_coefficients(self):
        report = self.check(1.5, -0.5, 1.5, -0.5)
        self.assertTrue(report["ordering"].passed)
        self.assertEqual(report.meta["margin"], 0.0)

    def test_rejects_unordered_coefficients(self):
        with self.assertRaises(ParameterError):
            self.check(2.0, 0.0, 1.0, 0.0)
        with self.assertRaises(ParameterError):
            self.check(1.0, -1.0, 2.0, 0.0)

    def test_constant_shift_identity(self):
        report = constant_shift_identity(
            2.0, -1.0, pure_power(), S, self.grid, 1.0, options()
        )
        self.assertTrue(report.passed, report.failures)
        self.assertAlmostEqual(
            report.meta["E_shifted"], report.meta["E_plain"] - 0.5, delta=1e-8
        )
        self.assertTrue(np.isfinite(report["constant_shift"].witness))


if __name__ == "__main__":
    unittest.main()
