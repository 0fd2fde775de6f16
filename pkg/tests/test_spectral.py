import math
import unittest

import numpy as np
from scipy.optimize import brentq

from sbds.rate_field import RateField
from sbds.regions import Region
from sbds.spectral import (DECAY, Grid, discretize, evolve_density,
                           extrapolated_eigenvalue, mass_and_alpha,
                           principal_eigenpair, psi_integral, resolvent_apply,
                           transcendental_well_eigenvalue)
from sbds.errors import (GridTooSmallError, NoPositiveEigenvalueError,
                         ShiftInsideSpectrumError)


def solve(field, extent, nodes):
    grid = Grid(field.dim, extent, nodes)
    matrix = discretize(field, grid)
    return matrix, principal_eigenpair(matrix, grid, field.max_rate(),
                                       field.support_radius())


class TestGrid(unittest.TestCase):
    def test_line_grid(self):
        grid = Grid(1, 10.0, 100)
        self.assertEqual(len(grid), 99)
        self.assertAlmostEqual(grid.spacing, 0.2)
        self.assertAlmostEqual(grid.coords[0], -9.8)
        self.assertAlmostEqual(float(np.sum(grid.weights)), 19.8)

    def test_radial_weights_are_shell_volumes(self):
        """
        The cells tile the ball of radius R - h/2 exactly.
        """
        grid = Grid(3, 5.0, 50)
        outer = grid.upper[-1]
        self.assertAlmostEqual(float(np.sum(grid.weights)),
                               4.0 / 3.0 * math.pi * outer ** 3, places=9)
        self.assertEqual(grid.lower[0], 0.0)

    def test_bad_grid(self):
        with self.assertRaises(ValueError):
            Grid(1, 0.0, 100)
        with self.assertRaises(ValueError):
            Grid(2, 1.0, 3)


class TestDiscretize(unittest.TestCase):
    def test_grid_must_contain_support(self):
        with self.assertRaises(GridTooSmallError):
            discretize(RateField.square_well(1, 1.0, 2.0), Grid(1, 2.0, 100))

    def test_decay_closure_needs_three_dimensions(self):
        with self.assertRaises(ValueError):
            discretize(RateField.square_well(1, 1.0, 1.0), Grid(1, 5.0, 100),
                       outer=DECAY)

    def test_weighted_symmetry(self):
        """
        <f, Ag>_w = <Af, g>_w for any f, g.
        """
        grid = Grid(3, 6.0, 120)
        matrix = discretize(RateField.smooth_bump(3, 2.0, 1.5), grid)
        rng = np.random.default_rng(7)
        f, g = rng.random(len(grid)), rng.random(len(grid))
        left = grid.inner(f, matrix.apply(g))
        right = grid.inner(matrix.apply(f), g)
        scale = grid.norm(f) * grid.norm(matrix.apply(g))
        self.assertAlmostEqual(left, right, delta=1e-10 * scale)

    def test_parabola_on_the_line(self):
        grid = Grid(1, 10.0, 200)
        matrix = discretize(RateField.square_well(1, 0.0, 1.0), grid)
        af = matrix.apply(grid.coords ** 2)
        # the last nodes feel the Dirichlet edge
        np.testing.assert_allclose(af[1:-1], 1.0, rtol=1e-9)

    def test_radial_parabola(self):
        for dim in (2, 3):
            grid = Grid(dim, 8.0, 160)
            matrix = discretize(RateField.square_well(dim, 0.0, 1.0), grid)
            af = matrix.apply(grid.coords ** 2)
            np.testing.assert_allclose(af[:-1], float(dim), rtol=1e-9)

    def test_gaussian_on_a_well(self):
        """
        Against central differences plus the rate averaged over each cell,
        so that the nodes at x = +-a see half the well.
        """
        beta, a = 1.5, 1.0
        grid = Grid(1, 5.0, 200)
        h = grid.spacing
        matrix = discretize(RateField.square_well(1, beta, a), grid)

        x = grid.coords
        f = np.exp(-x ** 2)
        padded = np.concatenate(([0.0], f, [0.0]))
        second = (padded[2:] - 2.0 * f + padded[:-2]) / h ** 2
        overlap = np.clip(np.minimum(x + 0.5 * h, a) - np.maximum(x - 0.5 * h, -a),
                          0.0, h) / h
        expected = 0.5 * second + beta * overlap * f

        self.assertAlmostEqual(overlap[np.argmin(np.abs(x - a))], 0.5)
        np.testing.assert_allclose(matrix.apply(f), expected, rtol=1e-9, atol=1e-12)


class TestPrincipalEigenpair(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.field = RateField.square_well(1, 1.0, 1.0)
        cls.matrix, cls.spectral = solve(cls.field, 20.0, 4000)

    def test_well_eigenvalue(self):
        exact = transcendental_well_eigenvalue(1.0, 1.0)
        # the grid value carries the h^2 error of the stencil
        self.assertAlmostEqual(self.spectral.lambda0, exact, delta=1e-5)
        self.assertAlmostEqual(extrapolated_eigenvalue(self.field, self.spectral),
                               exact, delta=1e-6)

    def test_refinement_is_second_order(self):
        values = [solve(self.field, 20.0, n)[1].lambda0 for n in (1000, 2000)]
        values.append(self.spectral.lambda0)
        ratio = (values[0] - values[1]) / (values[1] - values[2])
        self.assertAlmostEqual(ratio, 4.0, delta=0.5)

    def test_extent_drift(self):
        """
        Once R >= a + 8 / sqrt(2 lambda0) the Dirichlet edge moves lambda0
        by less than half a percent.
        """
        lam = self.spectral.lambda0
        extent = 1.0 + 8.0 / math.sqrt(2.0 * lam)
        h = self.spectral.grid.spacing
        for scale in (1.0, 2.0):
            R = scale * extent
            _, spectral = solve(self.field, R, int(round(2.0 * R / h)))
            self.assertLess(abs(spectral.lambda0 / lam - 1.0), 5e-3)

    def test_transcendental_root(self):
        lam = transcendental_well_eigenvalue(1.0, 1.0)
        k = math.sqrt(2.0 * (1.0 - lam))
        self.assertAlmostEqual(k * math.tan(k), math.sqrt(2.0 * lam), places=9)
        self.assertTrue(0.0 < lam < 1.0)

    def test_psi_positive_and_normalized(self):
        grid = self.spectral.grid
        self.assertTrue(np.all(self.spectral.psi > 0))
        self.assertAlmostEqual(grid.norm(self.spectral.psi), 1.0, places=10)

    def test_eigen_residual(self):
        psi = self.spectral.psi
        residual = self.matrix.apply(psi) - self.spectral.lambda0 * psi
        self.assertLess(self.spectral.grid.norm(residual), 1e-8)

    def test_tail_slope(self):
        kappa = self.spectral.kappa
        self.assertAlmostEqual(self.spectral.tail_slope / -kappa, 1.0, delta=0.01)

    def test_gap_positive(self):
        self.assertGreater(self.spectral.gap, 0.0)

    def test_psi_at_matches_grid_and_tail(self):
        spectral = self.spectral
        self.assertAlmostEqual(spectral.psi_at(0.0), float(np.max(spectral.psi)),
                               places=6)
        self.assertAlmostEqual(spectral.psi_at(0.5), spectral.psi_at(-0.5), places=10)
        # the tail law continues the grid values across tail_start
        r = spectral.tail_start
        inside = float(np.interp(r - 0.01, spectral.grid.coords, spectral.psi))
        self.assertAlmostEqual(spectral.psi_at(r + 0.01) / inside, 1.0, delta=0.05)
        self.assertEqual(spectral.psi_at(np.array([[1.0], [2.0]])).shape, (2,))

    def test_radial_well_eigenvalue(self):
        """
        In 3-D, u = r psi solves the 1-D problem with u(0) = 0, so lambda0
        is the root of k cot(k a) = -sqrt(2 lambda), k = sqrt(2 (beta - lambda)).
        """
        beta, a = 2.0, 1.0

        def mismatch(lam):
            k = math.sqrt(2.0 * (beta - lam))
            return k / math.tan(k * a) + math.sqrt(2.0 * lam)

        exact = brentq(mismatch, 1e-9, beta - math.pi ** 2 / 8.0)
        _, spectral = solve(RateField.square_well(3, beta, a), 20.0, 2000)
        self.assertAlmostEqual(spectral.lambda0, exact, delta=1e-3)

    def test_no_positive_eigenvalue(self):
        with self.assertRaises(NoPositiveEigenvalueError) as cm:
            solve(RateField.square_well(1, 0.0, 1.0), 10.0, 200)
        self.assertIn('NoPositiveEigenvalue', str(cm.exception))

        # beta a^2 below pi^2 / 8 is subcritical in 3-D
        with self.assertRaises(NoPositiveEigenvalueError):
            solve(RateField.square_well(3, 0.5, 1.0), 10.0, 500)


class TestEvolution(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.matrix, cls.spectral = solve(RateField.smooth_bump(1, 2.0, 1.5),
                                         15.0, 1500)

    def test_projection_grows_at_lambda0(self):
        grid = self.spectral.grid
        psi = self.spectral.psi
        g0 = np.exp(-grid.coords ** 2)
        start = grid.inner(psi, g0)
        for t in (1.0, 3.0, 10.0):
            rho = evolve_density(self.matrix, g0, t, 0.01)
            expected = math.exp(self.spectral.lambda0 * t) * start
            self.assertAlmostEqual(grid.inner(psi, rho) / expected, 1.0,
                                   delta=1e-3 * t)

    def test_zero_time(self):
        g0 = np.ones(len(self.spectral.grid))
        np.testing.assert_array_equal(evolve_density(self.matrix, g0, 0.0, 0.1), g0)

    def test_time_step_is_second_order(self):
        grid = self.spectral.grid
        g0 = np.exp(-0.25 * grid.coords ** 2)
        rho = [evolve_density(self.matrix, g0, 2.0, dt) for dt in (0.1, 0.05, 0.025)]
        ratio = grid.norm(rho[0] - rho[1]) / grid.norm(rho[1] - rho[2])
        self.assertAlmostEqual(ratio, 4.0, delta=0.5)

    def test_mass_is_conserved_without_branching(self):
        grid = Grid(1, 20.0, 2000)
        matrix = discretize(RateField.square_well(1, 0.0, 1.0), grid)
        g0 = np.exp(-grid.coords ** 2)
        rho = evolve_density(matrix, g0, 2.0, 0.01)
        self.assertAlmostEqual(np.sum(grid.weights * rho) / np.sum(grid.weights * g0),
                               1.0, delta=1e-6)

    def test_density_settles_on_psi(self):
        """
        rho(t) / (exp(lambda0 t) <psi, g0> psi) -> 1 wherever psi > 1e-6.
        """
        matrix, spectral = solve(RateField.square_well(1, 1.0, 1.0), 30.0, 3000)
        grid, psi = spectral.grid, spectral.psi
        g0 = np.exp(-grid.coords ** 2)
        start = grid.inner(psi, g0)
        bulk = psi > 1e-6

        deviations = []
        for t in (10.0, 20.0, 40.0):
            rho = evolve_density(matrix, g0, t, 0.02)
            limit = math.exp(spectral.lambda0 * t) * start * psi
            deviations.append(float(np.max(np.abs(rho[bulk] / limit[bulk] - 1.0))))

        self.assertLess(deviations[2], deviations[1])
        self.assertLess(deviations[1], deviations[0])
        self.assertLess(deviations[2], 1e-2)

    def test_resolvent_of_psi(self):
        lam, psi = self.spectral.lambda0, self.spectral.psi
        u = resolvent_apply(self.matrix, 2.0 * lam, psi, lam)
        np.testing.assert_allclose(lam * u, psi, atol=1e-7)

    def test_resolvent_solves_the_system(self):
        grid = self.spectral.grid
        g = np.exp(-np.abs(grid.coords))
        mu = 2.0 * self.spectral.lambda0
        u = resolvent_apply(self.matrix, mu, g, self.spectral.lambda0)
        np.testing.assert_allclose(mu * u - self.matrix.apply(u), g, atol=1e-9)
        self.assertTrue(np.all(u >= 0))

    def test_resolvent_inside_spectrum(self):
        g = np.ones(len(self.spectral.grid))
        with self.assertRaises(ShiftInsideSpectrumError):
            resolvent_apply(self.matrix, self.spectral.lambda0, g,
                            self.spectral.lambda0)
        with self.assertRaises(ShiftInsideSpectrumError):
            resolvent_apply(self.matrix, 0.5 * self.spectral.lambda0, g)


class TestDomainFractions(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        _, cls.line = solve(RateField.square_well(1, 1.0, 1.0), 20.0, 2000)
        _, cls.space = solve(RateField.square_well(3, 2.0, 1.0), 20.0, 1000)

    def test_everything(self):
        self.assertEqual(mass_and_alpha(self.line, Region.everything(1)), 1.0)
        self.assertEqual(mass_and_alpha(self.space, Region.everything(3)), 1.0)

    def test_symmetric_half_line(self):
        alpha = mass_and_alpha(self.line, Region.interval(0.0, np.inf))
        self.assertAlmostEqual(alpha, 0.5, places=8)

    def test_partition_adds_up(self):
        parts = [Region.interval(-np.inf, -1.0), Region.interval(-1.0, 1.0),
                 Region.interval(1.0, np.inf)]
        total = sum(mass_and_alpha(self.line, region) for region in parts)
        self.assertAlmostEqual(total, 1.0, places=10)

    def test_mass_is_psi_integral(self):
        self.assertAlmostEqual(psi_integral(self.line, None), self.line.mass)
        self.assertGreater(self.line.mass, 0.0)

    def test_radial_balls(self):
        small = mass_and_alpha(self.space, Region.ball([0.0, 0.0, 0.0], 1.0))
        large = mass_and_alpha(self.space, Region.ball([0.0, 0.0, 0.0], 3.0))
        self.assertTrue(0.0 < small < large < 1.0)

    def test_radial_half_space(self):
        half = Region.box([0.0, -np.inf, -np.inf], [np.inf, np.inf, np.inf])
        self.assertAlmostEqual(mass_and_alpha(self.space, half), 0.5, delta=0.02)
