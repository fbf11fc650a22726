import unittest

import numpy as np
import numpy.testing as npt

from fracns.enum import SolveStatus
from fracns.errors import (
    ConfigError,
    DegenerateInputError,
    GridMismatchError,
    ParameterError,
)
from fracns.modules.localization import (
    RegionGeometry,
    TruncationMap,
    barycenter,
    choose_geometry,
    core_membership,
    distinctness,
    field_width,
    multiplicity_experiment,
    region_membership,
    required_box_length,
)
from fracns.modules.optimizer import SolveResult
from fracns.modules.spectral import Grid
from tests.helpers import S, gaussian, options, pure_power, two_bump_spec


def result_for(u) -> SolveResult:
    return SolveResult(
        u=u,
        energy=-1.0,
        lam=-1.0,
        mass=1.0,
        iterations=1,
        converged=True,
        grad_norm=0.0,
        status=SolveStatus.CONVERGED,
    )


class TestTruncationMap(unittest.TestCase):
    def test_identity_inside_and_radial_outside(self):
        chi = TruncationMap(2.0)
        npt.assert_allclose(chi(np.array([1.5, -0.5]))[0], [1.5, -0.5])
        npt.assert_allclose(chi(np.array([5.0, -7.0]))[0], [2.0, -2.0])
        x, y = chi(np.array(3.0), np.array(4.0))
        npt.assert_allclose([x, y], [1.2, 1.6])

    def test_rejects_nonpositive_radius(self):
        with self.assertRaises(ParameterError):
            TruncationMap(0.0)


class TestBarycenter(unittest.TestCase):
    def setUp(self):
        self.grid = Grid.uniform(1, 64.0, 256)
        self.chi = TruncationMap(10.0)

    def test_symmetric_field_sits_at_the_origin(self):
        self.assertAlmostEqual(barycenter(gaussian(self.grid), 0.5, self.chi)[0], 0.0)

    def test_follows_a_translated_bump(self):
        u = gaussian(self.grid, 1.0, 6.0)
        self.assertAlmostEqual(barycenter(u, 0.5, self.chi)[0], 3.0, places=10)

    def test_scale_invariant(self):
        u = gaussian(self.grid, 1.0, 6.0)
        self.assertAlmostEqual(
            barycenter(u * 3.7, 0.5, self.chi)[0], barycenter(u, 0.5, self.chi)[0]
        )

    def test_clamped_to_the_truncation_radius(self):
        u = gaussian(self.grid, 1.0, 24.0)
        self.assertAlmostEqual(barycenter(u, 1.0, TruncationMap(4.0))[0], 4.0)

    def test_zero_field(self):
        with self.assertRaises(DegenerateInputError):
            barycenter(self.grid.zeros(), 0.5, self.chi)

    def test_two_dimensional(self):
        grid = Grid.uniform(2, 32.0, 64)
        u = gaussian(grid, 1.0, (4.0, -2.0))
        npt.assert_allclose(barycenter(u, 0.5, self.chi), (2.0, -1.0), atol=1e-10)


class TestGeometry(unittest.TestCase):
    def test_two_centers(self):
        geom = choose_geometry([(0.0,), (8.0,)])
        self.assertEqual(geom.k, 2)
        self.assertAlmostEqual(geom.rho_bar, 8 / 3)
        self.assertAlmostEqual(geom.r_bar, 8 + 16 / 3)
        self.assertEqual(geom.chi.radius, geom.r_bar)

    def test_single_center_uses_the_default_radius(self):
        geom = choose_geometry([(0.0,)], default_rho=1.5)
        self.assertEqual((geom.rho_bar, geom.r_bar), (1.5, 3.0))

    def test_rejects_duplicates_and_overlaps(self):
        with self.assertRaises(ParameterError):
            choose_geometry([(1.0,), (1.0,)])
        with self.assertRaises(ParameterError):
            RegionGeometry(((0.0,), (2.0,)), rho_bar=1.0, r_bar=10.0)
        with self.assertRaises(ParameterError):
            RegionGeometry(((0.0,), (8.0,)), rho_bar=1.0, r_bar=8.5)

    def test_box_length(self):
        self.assertEqual(required_box_length([(0.0,), (8.0,)], 0.05, 8.0), 512.0)
        self.assertEqual(required_box_length([(0.0,)], 1.0, 1.0), 16.0)
        with self.assertRaises(ParameterError):
            required_box_length([(0.0,)], 0.0, 1.0)

    def test_field_width(self):
        grid = Grid.uniform(1, 64.0, 256)
        self.assertAlmostEqual(field_width(gaussian(grid, 2.0)), np.sqrt(2.0), places=8)
        self.assertAlmostEqual(
            field_width(gaussian(grid, 2.0, 20.0)), np.sqrt(2.0), places=8
        )


class TestMembership(unittest.TestCase):
    def setUp(self):
        self.grid = Grid.uniform(1, 128.0, 512)
        self.geom = choose_geometry([(0.0,), (8.0,)])
        self.eps = 0.5

    def test_bumps_at_the_scaled_centers(self):
        for i, center in enumerate((0.0, 16.0)):
            u = gaussian(self.grid, 1.0, center)
            self.assertEqual(region_membership(u, self.eps, self.geom), i)
            self.assertEqual(core_membership(u, self.eps, self.geom), i)

    def test_between_regions(self):
        u = gaussian(self.grid, 1.0, 8.0)
        self.assertIsNone(region_membership(u, self.eps, self.geom))

    def test_region_but_not_core(self):
        u = gaussian(self.grid, 1.0, 4.0)
        self.assertEqual(region_membership(u, self.eps, self.geom), 0)
        self.assertIsNone(core_membership(u, self.eps, self.geom))

    def test_distinctness(self):
        first = result_for(gaussian(self.grid, 1.0, 0.0))
        second = result_for(gaussian(self.grid, 1.0, 16.0))
        near = result_for(gaussian(self.grid, 1.0, 1e-6))
        stray = result_for(gaussian(self.grid, 1.0, 8.0))
        self.assertTrue(distinctness(first, second, self.geom, self.eps))
        self.assertFalse(distinctness(first, near, self.geom, self.eps))
        self.assertTrue(distinctness(first, stray, self.geom, self.eps))
        self.assertFalse(distinctness(stray, stray, self.geom, self.eps))

    def test_distinctness_needs_one_grid(self):
        other = result_for(gaussian(Grid.uniform(1, 128.0, 256)))
        with self.assertRaises(GridMismatchError):
            distinctness(result_for(gaussian(self.grid)), other, self.geom, self.eps)


class TestMultiplicity(unittest.TestCase):
    grid = Grid.uniform(1, 128, 256)

    def test_two_regions(self):
        report = multiplicity_experiment(
            two_bump_spec(), pure_power(), S, self.grid, 1.0, 0.2, options(), threads=2
        )
        self.assertTrue(report.success, report.failed_criteria)
        self.assertEqual(report.k_found, 2)
        self.assertEqual([e.region for e in report.entries], [0, 1])
        for entry in report.entries:
            self.assertTrue(entry.seed_core)
            self.assertTrue(entry.core)
            self.assertLess(entry.result.energy, entry.level)
            self.assertLessEqual(entry.result.lam, report.lambda_bound + 1e-6)
            self.assertLess(entry.result.energy, entry.boundary_probe)
        self.assertEqual(report.summary["k_requested"], 2)
        self.assertAlmostEqual(report.dict["regions"][1]["seed_offset"][0], 40.0)

    def test_single_region(self):
        report = multiplicity_experiment(
            two_bump_spec(centers=((0.0,),)),
            pure_power(),
            S,
            self.grid,
            1.0,
            0.2,
            options(),
        )
        self.assertTrue(report.success, report.failed_criteria)
        self.assertEqual(report.k_found, 1)

    def test_center_outside_the_box(self):
        spec = two_bump_spec(centers=((0.0,), (20.0,)))
        with self.assertRaises(ConfigError) as caught:
            multiplicity_experiment(spec, pure_power(), S, self.grid, 1.0, 0.2, options())
        self.assertEqual(caught.exception.path, "potential.centers[1]")


if __name__ == "__main__":
    unittest.main()
