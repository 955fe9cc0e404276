import numpy as np
from django.test import SimpleTestCase

from surfaces.blaschke import (
    MetricField, ResidualReport, commutator_identity, complex_, connection_form_defect, constant_structure,
    cubic_invariants, eigen, family, gaussian_curvature, levi_civita, liouville, lemma_frame_defect,
    sphere_definite, sphere_indefinite, verify,
)
from surfaces.exceptions import DomainError
from surfaces.grid_fields import ScalarField2D, make_grid
from surfaces.soliton_eqs import (
    LiouvilleMixed, SphereLambda, SphereLambda1, reduced_equation, residual, solve_elliptic,
)
from surfaces.variable_maps import INVERSE, EigenCase, companion_eigenvalue, lambda_psi


def random_u(grid, seed, amplitude=0.3):
    c = np.random.default_rng(seed).uniform(-1.0, 1.0, 5)
    return ScalarField2D.from_function(
        grid,
        lambda X1, X2: amplitude * (c[0] * np.sin(2.0 * X1 + c[1]) * np.cos(X2) + c[2] * X1 * X2
                                    + c[3] * np.cos(3.0 * X2 + c[4])),
    )


class ConstantStructureTests(SimpleTestCase):
    def test_flat_structure_has_no_defects(self):
        grid = make_grid((0.0, 1.0, 0.0, 1.0), 9, 9)
        s = constant_structure(grid, np.eye(2), np.zeros((2, 2, 2)), np.zeros((2, 2)))
        self.assertLessEqual(max(verify(s).as_dict().values()), 1e-14)
        np.testing.assert_allclose(gaussian_curvature(s).values, 0.0, atol=1e-14)
        self.assertEqual(s.consistency_defect(), 0.0)

    def test_degenerate_metric_is_rejected(self):
        grid = make_grid((0.0, 1.0, 0.0, 1.0), 5, 5)
        with self.assertRaises(DomainError):
            MetricField.general(grid, np.zeros(grid.shape + (2, 2)))

    def test_worst_names_the_largest_residual(self):
        report = ResidualReport(1e-3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 5e-2, 0.0)
        self.assertEqual(report.worst(), ('egregium', 5e-2))


class SphereStructureTests(SimpleTestCase):
    def test_round_sphere_solution_verifies(self):
        grid = make_grid((-0.5, 0.5, -0.5, 0.5), 17, 17)
        s = sphere_definite(ScalarField2D.constant(grid, 0.0), -2.0)
        for name, value in verify(s).as_dict().items():
            self.assertLessEqual(value, 1e-10, name)

    def test_indefinite_constant_solution_verifies(self):
        grid = make_grid((-0.5, 0.5, -0.5, 0.5), 17, 17, 1, -1)
        s = sphere_indefinite(ScalarField2D.constant(grid, 0.0), -2.0, alpha=1)
        for name, value in verify(s).as_dict().items():
            self.assertLessEqual(value, 1e-10, name)

    def test_cubic_form_norm(self):
        grid = make_grid((-0.5, 0.5, -0.5, 0.5), 17, 17, 1, -1)
        u = random_u(grid, 3)
        _, J, hCC = cubic_invariants(sphere_definite(u, 1.0))
        np.testing.assert_allclose(hCC.values, 16.0 * np.exp(6.0 * u.values), rtol=1e-12)
        np.testing.assert_allclose(J.values, 2.0 * np.exp(6.0 * u.values), rtol=1e-12)
        _, _, hCC = cubic_invariants(sphere_indefinite(u, 1.0, alpha=-1))
        np.testing.assert_allclose(hCC.values, -16.0 * np.exp(6.0 * u.values), rtol=1e-12)

    def test_egregium_defect_is_the_sphere_equation_residual(self):
        cases = (
            ((1, 1), lambda u: sphere_definite(u, -1.5), SphereLambda(H=-1.5)),
            ((1, -1), lambda u: sphere_indefinite(u, 0.5, alpha=1), SphereLambda1(H=0.5, alpha=1)),
        )
        for (eps, eta), build, eq in cases:
            grid = make_grid((-0.5, 0.5, -0.5, 0.5), 65, 65, eps, eta)
            for seed in range(20):
                u = random_u(grid, seed)
                s = build(u)
                J = cubic_invariants(s)[1].values
                defect = gaussian_curvature(s).values - s.shape.H.values - J
                expected = np.exp(2.0 * u.values) * residual(eq, u).values
                np.testing.assert_allclose(defect, expected, atol=1e-6, err_msg=f"{eq.tag} seed {seed}")

    def test_algebraic_equations_hold_for_any_u(self):
        grid = make_grid((-0.5, 0.5, -0.5, 0.5), 33, 33)
        report = verify(sphere_definite(random_u(grid, 11), 2.0))
        for name in ('codazzi_S', 'ricci', 'r1_symmetry', 'apolarity', 'proj_flat'):
            self.assertLessEqual(getattr(report, name), 1e-12, name)

    def test_alpha_must_be_a_sign(self):
        grid = make_grid((0.0, 1.0, 0.0, 1.0), 5, 5, 1, -1)
        with self.assertRaises(DomainError):
            sphere_indefinite(ScalarField2D.constant(grid, 0.0), 1.0, alpha=2)


class CommutatorTests(SimpleTestCase):
    def test_random_structures(self):
        grid = make_grid((-0.5, 0.5, -0.5, 0.5), 21, 21)
        builders = (
            lambda u, angle: sphere_definite(u, -1.0),
            lambda u, angle: sphere_indefinite(u, -1.0, alpha=-1),
            lambda u, angle: liouville(u, -1.0),
            lambda u, angle: family(u, angle, eps=-1),
            lambda u, angle: family(u, 0.2 * angle, kind='indefinite'),
        )
        rng = np.random.default_rng(17)
        for seed in range(10):
            s = builders[seed % len(builders)](random_u(grid, seed), rng.uniform(-1.0, 1.0))
            self.assertLessEqual(commutator_identity(s), 1e-12, f"{s.case_tag} seed {seed}")

    def test_liouville_structure(self):
        grid = make_grid((-0.5, 0.5, -0.5, 0.5), 21, 21)
        s = liouville(random_u(grid, 5), -1.0)
        self.assertLessEqual(commutator_identity(s), 1e-12)
        np.testing.assert_allclose(cubic_invariants(s)[2].values, 0.0, atol=1e-12)

    def test_liouville_egregium_is_the_mixed_equation_residual(self):
        grid = make_grid((0.0, 1.0, 0.0, 1.0), 33, 33)
        u = random_u(grid, 8)
        s = liouville(u, -1.0)
        defect = gaussian_curvature(s).values - s.shape.H.values - cubic_invariants(s)[1].values
        expected = np.exp(u.values) * residual(LiouvilleMixed(H=-1.0), u).values
        np.testing.assert_allclose(defect, expected, atol=1e-9)


class FamilyTests(SimpleTestCase):
    def setUp(self):
        self.grid = make_grid((-0.5, 0.5, -0.5, 0.5), 17, 17)
        self.u = random_u(self.grid, 2)

    def test_definite_period(self):
        a = family(self.u, 0.4)
        b = family(self.u, 0.4 + 2.0 * np.pi / 3.0)
        np.testing.assert_allclose(a.K.values, b.K.values, atol=1e-12)

    def test_angle_zero_is_the_sphere(self):
        np.testing.assert_array_equal(family(self.u, 0.0).K.values, sphere_definite(self.u, 0.0).K.values)
        np.testing.assert_array_equal(family(self.u, 0.0, kind='indefinite').K.values,
                                      sphere_indefinite(self.u, 0.0).K.values)

    def test_cubic_form_norm_does_not_depend_on_angle(self):
        for kind in ('definite', 'indefinite'):
            for eps in (1, -1):
                reference = cubic_invariants(family(self.u, 0.0, kind=kind))[2].values
                rotated = cubic_invariants(family(self.u, 0.7, eps=eps, kind=kind))[2].values
                np.testing.assert_allclose(rotated, reference, rtol=1e-10)

    def test_rejects(self):
        with self.assertRaises(DomainError):
            family(self.u, 0.1, kind='parabolic')
        with self.assertRaises(DomainError):
            family(self.u, 0.1, eps=0)


class FrameTests(SimpleTestCase):
    def test_normal_form_in_the_frame(self):
        grid = make_grid((-0.5, 0.5, -0.5, 0.5), 33, 33)
        u = random_u(grid, 4)
        self.assertLessEqual(lemma_frame_defect(sphere_definite(u, 1.0)), 1e-9)
        self.assertLessEqual(lemma_frame_defect(sphere_indefinite(u, 1.0, alpha=-1)), 1e-9)

    def test_connection_form(self):
        for eps, eta in ((1, 1), (1, -1)):
            grid = make_grid((-0.5, 0.5, -0.5, 0.5), 65, 65, eps, eta)
            u = random_u(grid, 6)
            s = sphere_definite(u, 1.0) if eta == 1 else sphere_indefinite(u, 1.0)
            self.assertLess(connection_form_defect(s), 1e-3)

    def test_chart_and_general_christoffel_agree(self):
        grid = make_grid((-0.5, 0.5, -0.5, 0.5), 65, 65)
        metric = MetricField.conformal(random_u(grid, 9))
        chart = levi_civita(metric).values[1:-1, 1:-1]
        general = levi_civita(metric, use_chart=False).values[1:-1, 1:-1]
        np.testing.assert_allclose(general, chart, atol=1e-3)

    def test_frame_checks_need_a_sphere(self):
        grid = make_grid((-0.5, 0.5, -0.5, 0.5), 9, 9)
        with self.assertRaises(DomainError):
            lemma_frame_defect(liouville(ScalarField2D.constant(grid, 0.0), -1.0))


class EigenStructureTests(SimpleTestCase):
    def kink_structure(self, n, scale=1.0):
        grid = make_grid((-1.0, -0.2, 0.0, 0.8), n, n)
        case = EigenCase.from_tau(-1.0)
        psi = ScalarField2D.from_function(grid, lambda X1, X2: 4.0 * np.arctan(np.exp(X1)))
        lam = ScalarField2D(grid, scale * lambda_psi(case, INVERSE, psi).values)
        return eigen(lam, companion_eigenvalue(case, lam))

    def solved_eigenvalue(self):
        """λ for τ = −1 from a Newton solve of the reduced sine-Gordon equation, kink boundary data."""
        grid = make_grid((-2.0, -1.6, 0.0, 0.4), 65, 65)
        case = EigenCase.from_tau(-1.0)
        X1, X2 = grid.mesh()
        bump = np.sin(np.pi * (X1 + 2.0) / 0.4) * np.sin(np.pi * X2 / 0.4)
        init = ScalarField2D(grid, 4.0 * np.arctan(np.exp(X1)) + 0.05 * bump)
        solution = solve_elliptic(reduced_equation(case), init)
        self.assertGreater(solution.iterations, 0)
        return case, lambda_psi(case, INVERSE, solution.field)

    def test_solved_eigenvalue_gives_a_compatible_structure(self):
        case, lam = self.solved_eigenvalue()
        for name, value in verify(eigen(lam, companion_eigenvalue(case, lam))).as_dict().items():
            self.assertLessEqual(value, 1e-4, name)

    def test_shifted_eigenvalue_breaks_gauss(self):
        case, lam = self.solved_eigenvalue()
        exact = verify(eigen(lam, companion_eigenvalue(case, lam))).gauss
        shifted = ScalarField2D(lam.grid, lam.values + 0.05)
        broken = verify(eigen(shifted, companion_eigenvalue(case, shifted))).gauss
        self.assertGreater(broken, 10.0 * exact)

    def test_kink_gauss_residual_converges(self):
        coarse = verify(self.kink_structure(33)).gauss
        fine = verify(self.kink_structure(65)).gauss
        self.assertLess(fine, 1e-2)
        self.assertGreater(coarse / fine, 3.0)

    def test_metric_and_shape_operator_commute(self):
        report = verify(self.kink_structure(33))
        self.assertLessEqual(report.ricci, 1e-12)

    def test_eigenvalues_must_be_ordered(self):
        grid = make_grid((0.0, 1.0, 0.0, 1.0), 5, 5)
        with self.assertRaises(DomainError):
            eigen(ScalarField2D.constant(grid, 1.0), ScalarField2D.constant(grid, 0.0))
        with self.assertRaises(DomainError):
            eigen(ScalarField2D.constant(grid, 1.0), ScalarField2D.constant(grid, 1.0))


class ComplexStructureTests(SimpleTestCase):
    def test_shape_operator(self):
        grid = make_grid((0.0, 1.0, 0.0, 1.0), 9, 9)
        a = ScalarField2D.constant(grid, 0.5)
        b = ScalarField2D.constant(grid, 2.0)
        s = complex_(a, b)
        np.testing.assert_allclose(s.shape.tau.values, 0.25 + 4.0)
        np.testing.assert_allclose(s.metric.h12.values, 0.5)
        np.testing.assert_allclose(s.metric.h11.values, 0.0)

    def test_b_must_not_vanish(self):
        grid = make_grid((0.0, 1.0, 0.0, 1.0), 9, 9)
        with self.assertRaises(DomainError):
            complex_(ScalarField2D.constant(grid, 0.5), ScalarField2D.constant(grid, 0.0))
