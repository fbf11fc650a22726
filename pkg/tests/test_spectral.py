import unittest

import numpy as np
import numpy.testing as npt

from fracns.errors import DilationRangeError, GridMismatchError, ParameterError
from fracns.modules.spectral import (
    Field,
    Grid,
    boundary_mass_fraction,
    dilate,
    frac_laplacian,
    from_spectral,
    hs_seminorm_sq,
    inner,
    mass,
    resample,
    stretch,
    to_spectral,
    translate,
)
from tests.helpers import gaussian, smooth_random


def dense_frac_laplacian(values: np.ndarray, box_length: float, s: float) -> np.ndarray:
    n = len(values)
    j = np.arange(n)
    dft = np.exp(-2j * np.pi * np.outer(j, j) / n)
    k = 2 * np.pi * np.where(j <= n // 2, j, j - n) / box_length
    # the Nyquist wavenumber is ±πn/L, its modulus is what enters |k|^{2s}
    operator = np.linalg.inv(dft) @ np.diag(np.abs(k) ** (2 * s)) @ dft
    return (operator @ values).real


class TestGrid(unittest.TestCase):
    def test_nodes_and_spacing(self):
        grid = Grid.uniform(1, 8.0, 8)
        npt.assert_allclose(grid.axes[0], np.arange(-4.0, 4.0))
        self.assertEqual(grid.cell_volume, 1.0)
        self.assertEqual(grid.axes[0][4], 0.0)

    def test_rejects_bad_point_counts(self):
        for n in (4, 12, 100):
            with self.assertRaises(ParameterError):
                Grid.uniform(1, 10.0, n)

    def test_rejects_nonpositive_box(self):
        with self.assertRaises(ParameterError):
            Grid.uniform(1, 0.0, 16)

    def test_field_must_be_finite(self):
        grid = Grid.uniform(1, 10.0, 8)
        with self.assertRaises(ParameterError):
            Field(grid, [np.nan] + [0.0] * 7)

    def test_field_size_must_match(self):
        with self.assertRaises(GridMismatchError):
            Field(Grid.uniform(1, 10.0, 8), np.zeros(16))


class TestFracLaplacian(unittest.TestCase):
    def test_matches_dense_dft_oracle(self):
        rng = np.random.default_rng(1)
        grid = Grid.uniform(1, 3.0, 8)
        for s in (0.25, 0.5, 0.75, 1.0):
            u = Field(grid, rng.normal(size=8))
            expected = dense_frac_laplacian(u.values, 3.0, s)
            npt.assert_allclose(frac_laplacian(u, s).values, expected, atol=1e-10)

    def test_cosine_is_an_eigenfunction(self):
        grid = Grid.uniform(1, 2 * np.pi, 32)
        u = grid.sample(lambda x: np.cos(3 * x))
        for s in (0.3, 0.5, 0.9):
            npt.assert_allclose(
                frac_laplacian(u, s).values, 3 ** (2 * s) * u.values, atol=1e-12
            )

    def test_order_one_is_minus_second_derivative(self):
        grid = Grid.uniform(1, 2 * np.pi, 64)
        u = grid.sample(lambda x: np.sin(2 * x) + 0.5 * np.cos(5 * x))
        expected = 4 * np.sin(2 * grid.axes[0]) + 12.5 * np.cos(5 * grid.axes[0])
        npt.assert_allclose(frac_laplacian(u, 1.0).values, expected, atol=1e-10)

    def test_self_adjoint_and_nonnegative(self):
        rng = np.random.default_rng(7)
        grid = Grid.uniform(1, 5.0, 16)
        for _ in range(100):
            u = Field(grid, rng.normal(size=16))
            v = Field(grid, rng.normal(size=16))
            s = rng.uniform(0.05, 1.0)
            lhs = inner(frac_laplacian(u, s), v)
            rhs = inner(u, frac_laplacian(v, s))
            self.assertAlmostEqual(lhs, rhs, delta=1e-10 * (1 + abs(lhs)))
            self.assertGreaterEqual(hs_seminorm_sq(u, s), 0.0)
            npt.assert_allclose(hs_seminorm_sq(u, s), inner(frac_laplacian(u, s), u))

    def test_rejects_invalid_order(self):
        u = Grid.uniform(1, 5.0, 8).zeros()
        for s in (0.0, -0.5, 1.5):
            with self.assertRaises(ParameterError):
                frac_laplacian(u, s)

    def test_two_dimensional_product_mode(self):
        grid = Grid.uniform(2, 2 * np.pi, 16)
        u = grid.sample(lambda x, y: np.cos(x) * np.sin(2 * y))
        npt.assert_allclose(
            frac_laplacian(u, 0.5).values, np.sqrt(5) * u.values, atol=1e-12
        )


class TestQuadratures(unittest.TestCase):
    def test_mass_of_constant(self):
        grid = Grid.uniform(1, 10.0, 32)
        self.assertAlmostEqual(mass(grid.sample(lambda x: np.ones_like(x))), 10.0)

    def test_inner_needs_same_grid(self):
        a = Grid.uniform(1, 10.0, 16).zeros()
        b = Grid.uniform(1, 10.0, 32).zeros()
        with self.assertRaises(GridMismatchError):
            inner(a, b)

    def test_spectral_roundtrip(self):
        u = smooth_random(Grid.uniform(1, 10.0, 32), np.random.default_rng(3))
        coeffs = to_spectral(u)
        self.assertTrue(coeffs.conjugate_symmetric())
        npt.assert_allclose(from_spectral(coeffs).values, u.values, atol=1e-14)

    def test_boundary_mass_fraction(self):
        grid = Grid.uniform(1, 64.0, 256)
        self.assertLess(boundary_mass_fraction(gaussian(grid, 2.0)), 1e-12)
        constant = grid.sample(lambda x: np.ones_like(x))
        self.assertAlmostEqual(boundary_mass_fraction(constant), 1 / 8, delta=1e-2)


class TestTranslate(unittest.TestCase):
    def test_whole_cells_match_roll(self):
        grid = Grid.uniform(1, 16.0, 64)
        u = gaussian(grid, 1.5)
        npt.assert_allclose(
            translate(u, 3 * grid.spacing[0]).values, np.roll(u.values, 3), atol=1e-13
        )

    def test_fractional_shift_of_smooth_field(self):
        grid = Grid.uniform(1, 40.0, 128)
        u = gaussian(grid, 2.0)
        shifted = translate(u, 1.37)
        npt.assert_allclose(shifted.values, gaussian(grid, 2.0, 1.37).values, atol=1e-12)

    def test_unitary_on_random_fields(self):
        rng = np.random.default_rng(11)
        grid = Grid.uniform(1, 10.0, 16)
        for _ in range(20):
            u = Field(grid, rng.normal(size=16))
            self.assertAlmostEqual(mass(translate(u, rng.uniform(-3, 3))), mass(u))

    def test_two_dimensional_shift(self):
        grid = Grid.uniform(2, 32.0, 64)
        u = gaussian(grid, 1.5)
        shifted = translate(u, (2.5, -1.0))
        npt.assert_allclose(
            shifted.values, gaussian(grid, 1.5, (2.5, -1.0)).values, atol=1e-12
        )


class TestDilation(unittest.TestCase):
    def setUp(self):
        self.grid = Grid.uniform(1, 64.0, 256)
        self.u = gaussian(self.grid, 2.0)

    def test_preserves_mass(self):
        for tau in (-0.5, -0.1, 0.2, 0.7):
            dilated, defect = dilate(self.u, tau)
            self.assertLess(defect, 1e-10)
            self.assertAlmostEqual(mass(dilated), mass(self.u), delta=1e-10)

    def test_matches_analytic_rescaling(self):
        tau = 0.4
        dilated, _ = dilate(self.u, tau)
        width = 2.0 * np.exp(-tau)
        expected = np.exp(tau / 2) * gaussian(self.grid, width).values
        npt.assert_allclose(dilated.values, expected, atol=1e-10)

    def test_strong_compression(self):
        grid = Grid.uniform(1, 64.0, 1024)
        u = gaussian(grid, 2.0)
        for tau in (1.0, 2.0):
            with self.subTest(tau=tau):
                dilated, defect = dilate(u, tau)
                self.assertLess(defect, 1e-10)
                self.assertAlmostEqual(mass(dilated), mass(u), delta=1e-10)
                width = 2.0 * np.exp(-tau)
                expected = np.exp(tau / 2) * gaussian(grid, width).values
                npt.assert_allclose(dilated.values, expected, atol=1e-10)

    def test_compression_has_no_periodic_copies(self):
        grid = Grid.uniform(1, 64.0, 1024)
        dilated, _ = dilate(gaussian(grid, 2.0), 2.0)
        far = np.abs(grid.axes[0]) > 8.0
        self.assertLess(float(np.max(np.abs(dilated.values[far]))), 1e-12)

    def test_zero_is_identity(self):
        dilated, defect = dilate(self.u, 0.0)
        npt.assert_array_equal(dilated.values, self.u.values)
        self.assertEqual(defect, 0.0)

    def test_range_guard(self):
        with self.assertRaises(DilationRangeError):
            dilate(self.u, 3.5)
        with self.assertRaises(DilationRangeError):
            dilate(self.u, 1.0, tau_max=0.5)

    def test_stretch_scales_mass(self):
        for t in (0.7, 1.5):
            stretched, defect = stretch(self.u, t)
            self.assertLess(defect, 1e-10)
            self.assertAlmostEqual(mass(stretched), t * mass(self.u), delta=1e-9)

    def test_stretch_rejects_nonpositive_factor(self):
        with self.assertRaises(ParameterError):
            stretch(self.u, 0.0)


class TestResample(unittest.TestCase):
    def test_refinement_matches_direct_sampling(self):
        coarse = Grid.uniform(1, 40.0, 128)
        fine = Grid.uniform(1, 40.0, 512)
        npt.assert_allclose(
            resample(gaussian(coarse, 2.0), fine).values,
            gaussian(fine, 2.0).values,
            atol=1e-12,
        )

    def test_up_then_down_is_identity(self):
        grid = Grid.uniform(1, 10.0, 32)
        u = smooth_random(grid, np.random.default_rng(5))
        back = resample(resample(u, Grid.uniform(1, 10.0, 128)), grid)
        npt.assert_allclose(back.values, u.values, atol=1e-13)

    def test_needs_same_box(self):
        with self.assertRaises(GridMismatchError):
            resample(Grid.uniform(1, 10.0, 32).zeros(), Grid.uniform(1, 20.0, 64))


if __name__ == "__main__":
    unittest.main()
