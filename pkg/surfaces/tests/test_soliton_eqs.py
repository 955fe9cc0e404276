import numpy as np
from django.test import SimpleTestCase

from surfaces.exceptions import CellDivergence, DomainError, NonConvergence
from surfaces.grid_fields import ScalarField2D, make_grid, sample_at
from surfaces.immersion import GroupElement
from surfaces.soliton_eqs import (
    EQUATION_TAGS, ComplexGaussSystem, ConstantTauReduced, CoshGordonMixed, GaussSystem, LinearDegenerate,
    LiouvilleMixed, SineGordon, SinhGordon, SphereLambda, Tzitzeica, equation_from_tag, reduced_equation, residual,
    solve_cauchy, solve_elliptic, solve_goursat,
)
from surfaces.variable_maps import EigenCase


def kink(X1, X2, v=0.3):
    gamma = 1.0 / np.sqrt(1.0 - v ** 2)
    return 4.0 * np.arctan(np.exp(gamma * (X1 - v * X2)))


def kink_rate(X1, X2, v=0.3):
    gamma = 1.0 / np.sqrt(1.0 - v ** 2)
    e = np.exp(gamma * (X1 - v * X2))
    return -4.0 * gamma * v * e / (1.0 + e ** 2)


def ratios(errors):
    return [errors[k] / errors[k + 1] for k in range(len(errors) - 1)]


class EquationTagTests(SimpleTestCase):
    def test_every_tag_builds(self):
        for tag in EQUATION_TAGS:
            self.assertEqual(equation_from_tag(tag, H=-1.0, tau=2.0).tag, tag)

    def test_parameters_are_passed(self):
        self.assertEqual(equation_from_tag('tzitzeica', eps_t=-1), Tzitzeica(eps_t=-1))
        self.assertEqual(equation_from_tag('sphere-lambda', H=3.0), SphereLambda(H=3.0))
        self.assertEqual(equation_from_tag('constant-tau', tau=-2.0), ConstantTauReduced(tau=-2.0))
        self.assertEqual(equation_from_tag('gauss-system', alpha=-1), GaussSystem(alpha_g=-1))

    def test_unknown_tag(self):
        with self.assertRaises(DomainError):
            equation_from_tag('kdv')

    def test_parameter_validation(self):
        with self.assertRaises(DomainError):
            Tzitzeica(eps_t=2)
        with self.assertRaises(DomainError):
            SphereLambda(H=float('nan'))

    def test_reduced_equations(self):
        self.assertEqual(reduced_equation(EigenCase.from_tau(2.0)), SinhGordon())
        self.assertEqual(reduced_equation(EigenCase.from_tau(0.0)), LinearDegenerate(sign=1))
        self.assertEqual(reduced_equation(EigenCase.from_tau(-1.0)), SineGordon())


class ResidualTests(SimpleTestCase):
    def test_trivial_solutions(self):
        grid = make_grid((0.0, 1.0, 0.0, 1.0), 9, 9)
        zero = ScalarField2D.constant(grid, 0.0)
        self.assertTrue(np.all(residual(SinhGordon(), zero).values == 0.0))
        self.assertTrue(np.all(residual(Tzitzeica(eps_t=-1), zero).values == 0.0))
        self.assertTrue(np.all(residual(SphereLambda(H=-2.0), zero).values == 0.0))

    def test_liouville_exact_solution(self):
        errors = []
        for n in (17, 33):
            grid = make_grid((1.0, 2.0, 1.0, 2.0), n, n)
            u = ScalarField2D.from_function(grid, lambda X1, X2: np.log((X1 + X2) ** 2 / 2.0))
            errors.append(np.max(np.abs(residual(LiouvilleMixed(H=-1.0), u).values)))
        self.assertLess(errors[1], 1e-3)
        self.assertGreater(errors[0] / errors[1], 3.0)

    def test_moving_kink_solves_sine_gordon(self):
        grid = make_grid((-2.0, 2.0, -1.0, 1.0), 65, 65, 1, -1)
        psi = ScalarField2D.from_function(grid, kink)
        self.assertLess(np.max(np.abs(residual(SineGordon(), psi).values[1:-1, 1:-1])), 1e-2)

    def test_sphere_lambda_residual_is_ao2_invariant(self):
        eq = SphereLambda(H=-2.0)

        def psi(X1, X2):
            return 0.3 * np.sin(X1 + 0.5 * X2) * np.cos(X2)

        wide = make_grid((-1.0, 1.0, -1.0, 1.0), 257, 257)
        r = residual(eq, ScalarField2D.from_function(wide, psi)).values
        grid = make_grid((-0.5, 0.5, -0.5, 0.5), 65, 65)
        X1, X2 = grid.mesh()
        for g in (GroupElement('AO2', angle=0.7, a=0.1, b=-0.05), GroupElement('AO2', angle=2.0, eps=-1)):
            P1, P2 = g.apply(X1, X2)
            moved = residual(eq, ScalarField2D(grid, psi(P1, P2))).values
            np.testing.assert_allclose(moved[1:-1, 1:-1], sample_at(r, wide, P1, P2)[1:-1, 1:-1], atol=2e-3)
        unmoved = residual(eq, ScalarField2D.from_function(grid, psi)).values
        self.assertGreater(np.max(np.abs(unmoved - moved)), 1e-2)

    def test_arity_is_checked(self):
        grid = make_grid((0.0, 1.0, 0.0, 1.0), 5, 5)
        one = ScalarField2D.constant(grid, 1.0)
        with self.assertRaises(DomainError):
            residual(GaussSystem(), one)
        with self.assertRaises(DomainError):
            residual(SinhGordon(), one, one)

    def test_gauss_system_rejects_umbilic_points(self):
        grid = make_grid((0.0, 1.0, 0.0, 1.0), 5, 5)
        one = ScalarField2D.constant(grid, 1.0)
        with self.assertRaises(DomainError):
            residual(GaussSystem(), one, one)

    def test_gauss_system_cross_term_is_small_for_constant_product(self):
        grid = make_grid((0.0, 1.0, 0.0, 1.0), 33, 33)
        lam = ScalarField2D.from_function(grid, lambda X1, X2: -1.0 - 0.2 * np.sin(X1 + 2.0 * X2))
        mu = ScalarField2D(grid, -2.0 / lam.values)
        r_cross = residual(GaussSystem(), lam, mu)[2]
        self.assertLess(np.max(np.abs(r_cross.values)), 1e-3)

    def test_complex_system_returns_two_residuals(self):
        grid = make_grid((0.0, 1.0, 0.0, 1.0), 9, 9)
        a = ScalarField2D.constant(grid, 0.0)
        b = ScalarField2D.constant(grid, 1.0)
        out = residual(ComplexGaussSystem(), a, b)
        self.assertEqual(len(out), 2)
        np.testing.assert_allclose(out[0].values, 1.0)

    def test_constant_tau_range(self):
        grid = make_grid((0.0, 1.0, 0.0, 1.0), 5, 5)
        with self.assertRaises(DomainError):
            residual(ConstantTauReduced(tau=1.0), ScalarField2D.constant(grid, 1.5))


class EllipticSolverTests(SimpleTestCase):
    @staticmethod
    def manufactured(n):
        grid = make_grid((0.0, 1.0, 0.0, 1.0), n, n)
        X1, X2 = grid.mesh()
        exact = 0.3 * np.sin(np.pi * X1) * np.sin(np.pi * X2)
        eq = Tzitzeica(eps_t=-1)
        source = ScalarField2D(grid, -2.0 * np.pi ** 2 * exact - eq.rhs(exact))
        init = ScalarField2D.constant(grid, 0.0)
        return eq, init, source, exact

    def test_manufactured_solution_converges_at_second_order(self):
        errors = []
        for n in (33, 65, 129):
            eq, init, source, exact = self.manufactured(n)
            solution = solve_elliptic(eq, init, source=source)
            self.assertLess(solution.residual_norm, 1e-10)
            errors.append(np.max(np.abs(solution.field.values - exact)))
        for ratio in ratios(errors):
            self.assertGreaterEqual(ratio, 3.5)
            self.assertLessEqual(ratio, 4.5)

    def test_exact_solution_needs_no_iterations(self):
        grid = make_grid((0.0, 1.0, 0.0, 1.0), 9, 9)
        solution = solve_elliptic(Tzitzeica(eps_t=-1), ScalarField2D.constant(grid, 0.0))
        self.assertEqual(solution.iterations, 0)

    def test_iteration_cap_raises(self):
        eq, init, source, _ = self.manufactured(17)
        with self.assertRaises(NonConvergence) as ctx:
            solve_elliptic(eq, init, source=source, tol=1e-30, max_iter=1)
        self.assertEqual(ctx.exception.iterations, 1)

    def test_rejects_mismatched_boundary(self):
        grid = make_grid((0.0, 1.0, 0.0, 1.0), 9, 9)
        with self.assertRaises(DomainError):
            solve_elliptic(SinhGordon(), ScalarField2D.constant(grid, 0.0), boundary=ScalarField2D.constant(grid, 1.0))

    def test_rejects_mixed_and_indefinite_problems(self):
        grid = make_grid((0.0, 1.0, 0.0, 1.0), 9, 9)
        with self.assertRaises(DomainError):
            solve_elliptic(LiouvilleMixed(), ScalarField2D.constant(grid, 0.0))
        lorentz = make_grid((0.0, 1.0, 0.0, 1.0), 9, 9, 1, -1)
        with self.assertRaises(DomainError):
            solve_elliptic(SinhGordon(), ScalarField2D.constant(lorentz, 0.0))


class GoursatSolverTests(SimpleTestCase):
    def test_liouville_converges_at_second_order(self):
        errors = []
        for n in (33, 65, 129):
            grid = make_grid((1.0, 2.0, 1.0, 2.0), n, n)
            X1, X2 = grid.mesh()
            exact = np.log((X1 + X2) ** 2 / 2.0)
            solution = solve_goursat(LiouvilleMixed(H=-1.0), grid, exact[0, :], exact[:, 0])
            errors.append(np.max(np.abs(solution.field.values - exact)))
        for ratio in ratios(errors):
            self.assertGreaterEqual(ratio, 3.5)
            self.assertLessEqual(ratio, 4.5)

    def test_cosh_gordon_converges_at_second_order(self):
        def edges(grid):
            return 0.2 * np.sin(grid.x1), 0.2 * np.sin(grid.x2)

        fine = make_grid((0.0, 1.0, 0.0, 1.0), 257, 257)
        reference = solve_goursat(CoshGordonMixed(), fine, *edges(fine)).field.values
        errors = []
        for n in (33, 65):
            grid = make_grid((0.0, 1.0, 0.0, 1.0), n, n)
            step = (fine.n1 - 1) // (n - 1)
            solution = solve_goursat(CoshGordonMixed(), grid, *edges(grid))
            errors.append(np.max(np.abs(solution.field.values - reference[::step, ::step])))
        self.assertGreaterEqual(ratios(errors)[0], 3.5)
        self.assertLess(errors[1], 1e-4)

    def test_zero_rhs_is_sum_of_edges(self):
        grid = make_grid((0.0, 1.0, 0.0, 1.0), 9, 7)
        bottom = np.sin(grid.x1)
        left = np.cos(grid.x2) - 1.0
        solution = solve_goursat(None, grid, bottom, left)
        np.testing.assert_allclose(solution.field.values, bottom[None, :] + left[:, None], atol=1e-12)

    def test_corner_mismatch(self):
        grid = make_grid((0.0, 1.0, 0.0, 1.0), 5, 5)
        with self.assertRaises(DomainError):
            solve_goursat(None, grid, np.zeros(5), np.ones(5))

    def test_cell_iteration_cap(self):
        grid = make_grid((0.0, 1.0, 0.0, 1.0), 5, 5)
        with self.assertRaises(CellDivergence):
            solve_goursat(LiouvilleMixed(H=-1.0), grid, np.zeros(5), np.zeros(5), cell_tol=0.0, max_steps=3)


class CauchySolverTests(SimpleTestCase):
    def test_kink_converges_at_second_order(self):
        errors = []
        for n in (33, 65, 129):
            grid = make_grid((-4.0, 4.0, 0.0, 1.0), n, n, 1, -1)
            X1, X2 = grid.mesh()
            exact = kink(X1, X2)
            solution = solve_cauchy(SineGordon(), grid, exact[0], kink_rate(X1, X2)[0],
                                    side_data=ScalarField2D(grid, exact))
            errors.append(np.max(np.abs(solution.field.values - exact)))
        for ratio in ratios(errors):
            self.assertGreaterEqual(ratio, 3.5)
            self.assertLessEqual(ratio, 4.5)

    def test_zero_data_stays_zero(self):
        grid = make_grid((-1.0, 1.0, 0.0, 1.0), 17, 17, 1, -1)
        solution = solve_cauchy(SinhGordon(), grid, np.zeros(17), np.zeros(17))
        self.assertTrue(np.all(solution.field.values == 0.0))
        self.assertEqual(solution.residual_norm, 0.0)

    def test_manufactured_source_converges_at_second_order(self):
        def exact(X1, X2):
            return 0.2 * np.sin(X1) * np.cos(2.0 * X2)

        errors = []
        for n in (33, 65, 129):
            grid = make_grid((-1.0, 1.0, 0.0, 1.0), n, n, 1, -1)
            X1, X2 = grid.mesh()
            psi = exact(X1, X2)
            # ∂1²ψ − ∂2²ψ = 3ψ for this ψ
            source = ScalarField2D(grid, 3.0 * psi - np.sin(psi))
            solution = solve_cauchy(SineGordon(), grid, psi[0], np.zeros(n), source=source,
                                    side_data=ScalarField2D(grid, psi))
            errors.append(np.max(np.abs(solution.field.values - psi)))
        for ratio in ratios(errors):
            self.assertGreaterEqual(ratio, 3.5)
        self.assertLess(errors[-1], 1e-4)

    def test_cfl_condition(self):
        grid = make_grid((0.0, 1.0, 0.0, 4.0), 9, 9, 1, -1)
        with self.assertRaises(DomainError):
            solve_cauchy(SineGordon(), grid, np.zeros(9), np.zeros(9))

    def test_needs_lorentz_signature(self):
        grid = make_grid((0.0, 1.0, 0.0, 1.0), 9, 9)
        with self.assertRaises(DomainError):
            solve_cauchy(SineGordon(), grid, np.zeros(9), np.zeros(9))
