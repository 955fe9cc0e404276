import numpy as np
from django.test import SimpleTestCase

from surfaces.exceptions import DomainError
from surfaces.grid_fields import (
    Grid2, Partial, ScalarField2D, Vec3Field2D, derivative, diff, laplace0, make_grid, resample, sample_at,
)


def quadratic(X1, X2):
    return X1 ** 2 + 3.0 * X1 * X2 - X2 ** 2 + 2.0 * X1 - 1.0


class GridTests(SimpleTestCase):
    def test_spacing_and_layout(self):
        grid = make_grid((0.0, 2.0, -1.0, 1.0), 5, 9)
        self.assertAlmostEqual(grid.h1, 0.5)
        self.assertAlmostEqual(grid.h2, 0.25)
        self.assertEqual(grid.shape, (9, 5))
        X1, X2 = grid.mesh()
        self.assertAlmostEqual(X1[0, 1] - X1[0, 0], grid.h1)
        self.assertAlmostEqual(X2[1, 0] - X2[0, 0], grid.h2)

    def test_rejects_bad_grids(self):
        with self.assertRaises(DomainError):
            make_grid((0.0, 1.0, 0.0, 1.0), 2, 5)
        with self.assertRaises(DomainError):
            make_grid((1.0, 0.0, 0.0, 1.0), 5, 5)
        with self.assertRaises(DomainError):
            make_grid((0.0, 1.0, 0.0, 1.0), 5, 5, eps=0)

    def test_header_round_trip(self):
        grid = make_grid((-0.5, 0.5, -0.25, 0.75), 7, 11, 1, -1)
        self.assertEqual(Grid2.from_header(grid.header()), grid)
        self.assertEqual(grid.transposed().transposed(), grid)
        scaled = grid.scaled(2.0)
        self.assertEqual((scaled.n1, scaled.n2), (7, 11))
        self.assertAlmostEqual(scaled.x2_max, 1.5)


class FieldTests(SimpleTestCase):
    def setUp(self):
        self.grid = make_grid((-1.0, 1.0, -0.5, 1.5), 9, 13)

    def test_values_are_read_only(self):
        field = ScalarField2D.constant(self.grid, 1.0)
        with self.assertRaises(ValueError):
            field.values[0, 0] = 2.0

    def test_rejects_non_finite_values(self):
        values = np.zeros(self.grid.shape)
        values[3, 2] = np.nan
        with self.assertRaises(DomainError) as ctx:
            ScalarField2D(self.grid, values)
        self.assertEqual(ctx.exception.node, (2, 3))

    def test_flat_values_are_x1_fastest(self):
        field = ScalarField2D.from_function(self.grid, lambda X1, X2: X1 + 10.0 * X2)
        flat = field.flat()
        self.assertAlmostEqual(flat[1] - flat[0], self.grid.h1)
        reshaped = ScalarField2D(self.grid, flat)
        np.testing.assert_array_equal(reshaped.values, field.values)

    def test_vector_components(self):
        values = np.zeros(self.grid.shape + (3,))
        values[..., 2] = 4.0
        field = Vec3Field2D(self.grid, values)
        self.assertTrue(np.all(field.component(2).values == 4.0))


class DerivativeTests(SimpleTestCase):
    def setUp(self):
        self.grid = make_grid((-1.0, 1.0, -0.5, 1.5), 9, 13)
        self.field = ScalarField2D.from_function(self.grid, quadratic)
        self.X1, self.X2 = self.grid.mesh()

    def test_exact_on_quadratics(self):
        np.testing.assert_allclose(diff(self.field, Partial.D1).values, 2.0 * self.X1 + 3.0 * self.X2 + 2.0,
                                   atol=1e-11)
        np.testing.assert_allclose(diff(self.field, 'd2').values, 3.0 * self.X1 - 2.0 * self.X2, atol=1e-11)
        np.testing.assert_allclose(diff(self.field, Partial.D11).values, 2.0, atol=1e-9)
        np.testing.assert_allclose(diff(self.field, Partial.D22).values, -2.0, atol=1e-9)
        np.testing.assert_allclose(diff(self.field, Partial.D12).values, 3.0, atol=1e-10)

    def test_laplacian_uses_grid_signature(self):
        np.testing.assert_allclose(laplace0(self.field).values, 0.0, atol=1e-9)
        lorentz = make_grid((-1.0, 1.0, -0.5, 1.5), 9, 13, 1, -1)
        field = ScalarField2D.from_function(lorentz, quadratic)
        np.testing.assert_allclose(laplace0(field).values, 4.0, atol=1e-9)

    def test_second_order_convergence(self):
        errors = []
        for n in (17, 33, 65):
            grid = make_grid((0.0, 1.0, 0.0, 1.0), n, n)
            X1, X2 = grid.mesh()
            values = np.sin(2.0 * X1) * np.cos(X2)
            errors.append(np.max(np.abs(derivative(values, grid, Partial.D12) + 2.0 * np.cos(2.0 * X1) * np.sin(X2))))
        self.assertGreater(errors[0] / errors[1], 3.0)
        self.assertGreater(errors[1] / errors[2], 3.0)

    def test_fourth_order_is_exact_on_quartics(self):
        grid = make_grid((-1.0, 1.0, 0.0, 1.5), 9, 11)
        X1, X2 = grid.mesh()
        values = X1 ** 4 - 2.0 * X1 ** 2 * X2 ** 2 + X1 * X2 ** 3 + X1 - 1.0
        expected = {
            Partial.D1: 4.0 * X1 ** 3 - 4.0 * X1 * X2 ** 2 + X2 ** 3 + 1.0,
            Partial.D2: -4.0 * X1 ** 2 * X2 + 3.0 * X1 * X2 ** 2,
            Partial.D11: 12.0 * X1 ** 2 - 4.0 * X2 ** 2,
            Partial.D22: -4.0 * X1 ** 2 + 6.0 * X1 * X2,
            Partial.D12: -8.0 * X1 * X2 + 3.0 * X2 ** 2,
        }
        for which, exact in expected.items():
            np.testing.assert_allclose(derivative(values, grid, which, order=4), exact, atol=1e-8, err_msg=which.value)

    def test_fourth_order_convergence_reaches_the_edges(self):
        errors = []
        for n in (17, 33):
            grid = make_grid((0.0, 1.0, 0.0, 1.0), n, n)
            X1, X2 = grid.mesh()
            values = np.sin(2.0 * X1) * np.cos(X2)
            errors.append(np.max(np.abs(derivative(values, grid, Partial.D11, order=4)
                                        + 4.0 * np.sin(2.0 * X1) * np.cos(X2))))
        self.assertGreater(errors[0] / errors[1], 12.0)

    def test_fourth_order_needs_six_nodes(self):
        grid = make_grid((0.0, 1.0, 0.0, 1.0), 5, 5)
        with self.assertRaises(DomainError):
            derivative(np.zeros(grid.shape), grid, Partial.D11, order=4)
        with self.assertRaises(DomainError):
            derivative(np.zeros(grid.shape), grid, Partial.D1, order=3)

    def test_vector_values_ride_along(self):
        stacked = np.stack([self.field.values, 2.0 * self.field.values, np.zeros(self.grid.shape)], axis=-1)
        out = derivative(stacked, self.grid, Partial.D1)
        self.assertEqual(out.shape, self.grid.shape + (3,))
        np.testing.assert_allclose(out[..., 1], 2.0 * out[..., 0], atol=1e-12)


class SamplingTests(SimpleTestCase):
    def setUp(self):
        self.grid = make_grid((0.0, 2.0, 0.0, 1.0), 11, 6)
        self.field = ScalarField2D.from_function(self.grid, lambda X1, X2: 1.0 + 2.0 * X1 - X2 + 0.5 * X1 * X2)

    def test_bilinear_is_exact_on_bilinear_data(self):
        p1 = np.array([0.13, 1.77, 2.0])
        p2 = np.array([0.91, 0.05, 0.5])
        np.testing.assert_allclose(sample_at(self.field.values, self.grid, p1, p2),
                                   1.0 + 2.0 * p1 - p2 + 0.5 * p1 * p2, atol=1e-12)

    def test_resample_with_mapping(self):
        target = make_grid((0.0, 1.0, 0.0, 0.5), 5, 5)
        out = resample(self.field, target, lambda X1, X2: (2.0 * X1, 2.0 * X2))
        X1, X2 = target.mesh()
        np.testing.assert_allclose(out.values, 1.0 + 4.0 * X1 - 2.0 * X2 + 2.0 * X1 * X2, atol=1e-12)

    def test_points_outside_are_rejected(self):
        with self.assertRaises(DomainError):
            sample_at(self.field.values, self.grid, np.array([2.5]), np.array([0.5]))
