import copy
import unittest
from types import SimpleNamespace

import numpy as np

from sbds import analysis
from sbds.analysis import (FAIL, NOT_SUPERCRITICAL, PASS, UNDEFINED,
                           TheoremReport, dichotomy_check, domain_fraction_check,
                           front_speed_check, gate, growth_rate_fit,
                           limit_moment_check, martingale_check,
                           moving_window_check, render_table)
from sbds.config import McSpec
from sbds.mc_engine import (FINITE, GROWING, UNCLASSIFIED, EnsembleStats,
                            run_ensemble)
from sbds.moments import compute_f
from sbds.rate_field import RateField
from sbds.regions import Region
from sbds.spectral import Grid, discretize, principal_eigenpair
from sbds.errors import VelocityTooFastError


TIMES = np.arange(1.0, 9.0)


class TestGate(unittest.TestCase):
    def test_gate(self):
        self.assertEqual(gate(1.0, 1.2, 0.1), PASS)
        self.assertEqual(gate(1.0, 1.4, 0.1), FAIL)
        self.assertEqual(gate(1.0, 1.4, 0.1, tolerance=0.5), PASS)
        self.assertEqual(gate(1.0, 1.4, 0.1, z=5.0), PASS)

    def test_report(self):
        report = TheoremReport('check', 'x', 1.0, 1.1, 0.05, PASS, 10, 5.0)
        self.assertTrue(report.passed)
        self.assertTrue(report.gated)
        self.assertEqual(report.to_dict()['estimate'], 1.1)
        skipped = TheoremReport('check', 'x', 1.0, 1.0, 0.1, NOT_SUPERCRITICAL, 1, 1.0)
        self.assertFalse(skipped.gated)


class TestSyntheticChecks(unittest.TestCase):
    def test_growth_rate_exact(self):
        counts = np.array([(1 + i % 3) * np.exp(0.5 * TIMES) for i in range(12)])
        stats = synthetic_stats(counts)
        report = growth_rate_fit(stats, SimpleNamespace(lambda0=0.5), tolerance=1e-9)
        self.assertAlmostEqual(report.estimate, 0.5, places=10)
        self.assertGreater(report.stderr, 0.0)
        self.assertEqual(report.status, PASS)

    def test_growth_rate_wrong_prediction(self):
        rng = np.random.default_rng(4)
        counts = np.exp(0.5 * TIMES)[None, :] * rng.uniform(0.5, 1.5, (200, 1))
        report = growth_rate_fit(synthetic_stats(counts), SimpleNamespace(lambda0=0.8))
        self.assertEqual(report.status, FAIL)

    def test_no_branching(self):
        stats = synthetic_stats(np.ones((20, TIMES.size)), classes=FINITE)
        report = growth_rate_fit(stats)
        self.assertEqual(report.status, PASS)
        self.assertEqual(report.estimate, 0.0)

        moment = limit_moment_check(stats, None, None, 2)
        self.assertEqual(moment.status, NOT_SUPERCRITICAL)
        self.assertEqual(moment.estimate, 1.0)

        self.assertEqual(front_speed_check(stats, None).status, NOT_SUPERCRITICAL)
        self.assertEqual(martingale_check(stats).status, NOT_SUPERCRITICAL)

        dichotomy = dichotomy_check(stats)
        self.assertEqual(dichotomy.status, NOT_SUPERCRITICAL)
        self.assertEqual(dichotomy.estimate, 1.0)

    def test_domain_fraction_of_everything(self):
        counts = np.full((10, TIMES.size), 7.0)
        stats = synthetic_stats(counts, regions={'all': counts.copy()})
        report = domain_fraction_check(stats, None, 'all', Region.everything(1))
        self.assertEqual(report.predicted, 1.0)
        self.assertEqual(report.estimate, 1.0)
        self.assertEqual(report.status, PASS)

    def test_front_band(self):
        b = 0.5
        counts = np.full((50, TIMES.size), 10.0)
        radius = np.tile(b * TIMES, (50, 1))
        probes = np.ones_like(radius)
        stats = synthetic_stats(counts, radius=radius, probes=probes)
        report = front_speed_check(stats, SimpleNamespace(front_speed=b))
        self.assertEqual(report.estimate, 1.0)
        self.assertEqual(report.status, PASS)

        stats.radius = np.tile(2.0 * b * TIMES, (50, 1))
        self.assertEqual(front_speed_check(stats, SimpleNamespace(front_speed=b)).status,
                         FAIL)

    def test_martingale_flat(self):
        rng = np.random.default_rng(9)
        values = np.tile(rng.uniform(0.5, 1.5, (100, 1)), (1, TIMES.size))
        stats = synthetic_stats(np.ones((100, TIMES.size)), martingale=values)
        report = martingale_check(stats)
        self.assertEqual(report.status, PASS)
        self.assertAlmostEqual(report.estimate, report.predicted)

    def test_too_many_unclassified(self):
        classes = np.array([[GROWING] * 90 + [UNCLASSIFIED] * 10])
        stats = synthetic_stats(np.ones((100, TIMES.size)), classes=classes)
        report = dichotomy_check(stats)
        self.assertEqual(report.status, FAIL)
        self.assertAlmostEqual(report.details['fractions']['unclassified'], 0.1)

    def test_finite_fraction_growing_in_one_dimension(self):
        """
        In dim 1 every replica eventually grows: a finite fraction that
        rises with the horizon fails the check.
        """
        classes = np.array([[GROWING] * 100, [FINITE] * 50 + [GROWING] * 50])
        stats = synthetic_stats(np.ones((100, TIMES.size)), classes=classes,
                                horizons=[4.0, 8.0])
        self.assertEqual(dichotomy_check(stats).status, FAIL)

    def test_finite_fraction_must_shrink_in_one_dimension(self):
        counts = np.full((100, TIMES.size), 2.0)
        flat = np.array([[FINITE] * 20 + [GROWING] * 80] * 2)
        stats = synthetic_stats(counts, classes=flat, horizons=[4.0, 8.0])
        self.assertEqual(dichotomy_check(stats).status, FAIL)

        shrinking = np.array([[FINITE] * 50 + [GROWING] * 50,
                              [FINITE] * 10 + [GROWING] * 90])
        stats = synthetic_stats(counts, classes=shrinking, horizons=[4.0, 8.0])
        self.assertEqual(dichotomy_check(stats).status, PASS)

        stats = synthetic_stats(counts, horizons=[4.0, 8.0])
        report = dichotomy_check(stats)
        self.assertEqual(report.status, PASS)
        self.assertEqual(report.estimate, 0.0)

    def test_finite_fraction_must_be_positive_in_three_dimensions(self):
        counts = np.full((100, TIMES.size), 2.0)
        stats = synthetic_stats(counts, x0=(0.0, 0.0, 0.0))
        self.assertEqual(dichotomy_check(stats).status, FAIL)

        stats = synthetic_stats(counts, x0=(0.0, 0.0, 0.0), horizons=[4.0, 8.0])
        self.assertEqual(dichotomy_check(stats).status, FAIL)

        stable = np.array([[FINITE] * 30 + [GROWING] * 70] * 2)
        stats = synthetic_stats(counts, classes=stable, x0=(0.0, 0.0, 0.0),
                                horizons=[4.0, 8.0])
        report = dichotomy_check(stats)
        self.assertEqual(report.status, PASS)
        self.assertAlmostEqual(report.estimate, 0.3)
        self.assertEqual(report.details['dim'], 3)

    def test_render_table(self):
        reports = [TheoremReport('growth_rate_fit', 'slope', 0.5, 0.49, 0.01, PASS, 10, 8.0),
                   TheoremReport('front_speed_check', 'band', 0.95, 0.5, 0.05, FAIL, 10, 8.0)]
        table = render_table(reports)
        lines = table.splitlines()
        self.assertEqual(len(lines), 4)
        self.assertTrue(lines[0].startswith('check'))
        self.assertIn('growth_rate_fit', table)
        self.assertTrue(lines[3].endswith('fail'))


class TestEnsembleChecks(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        field = RateField.square_well(1, 1.0, 1.0)
        grid = Grid(1, 20.0, 2000)
        cls.spectral = principal_eigenpair(discretize(field, grid), grid, 1.0, 1.0)
        cls.table = compute_f(cls.spectral, field, 2)
        mc = McSpec(replicas=300, t_end=5.0, obs_interval=1.0, cap=10 ** 5,
                    seed=2015, x0=[0.0], return_bound=1e-3, horizons=[2.5, 5.0])
        cls.regions = {'right': Region.interval(0.0, np.inf),
                       'all': Region.everything(1)}
        windows = {'still': (Region.everything(1), [0.0])}
        cls.stats = run_ensemble(field, mc, cls.regions, windows, cls.spectral,
                                 0.85 * cls.spectral.front_speed)

    def test_symmetric_half_line(self):
        report = domain_fraction_check(self.stats, self.spectral, 'right',
                                       self.regions['right'])
        self.assertAlmostEqual(report.predicted, 0.5, places=8)
        self.assertEqual(report.status, PASS)

    def test_martingale(self):
        self.assertEqual(martingale_check(self.stats).status, PASS)

    def test_static_window_reduces_to_growth(self):
        report = moving_window_check(self.stats, self.spectral, 'still',
                                     Region.everything(1))
        self.assertAlmostEqual(report.estimate, 1.0, places=10)

    def test_window_too_fast(self):
        with self.assertRaises(VelocityTooFastError):
            moving_window_check(self.stats, self.spectral, 'still',
                                Region.interval(-1.0, 1.0),
                                [self.spectral.front_speed])

    def test_reports_have_positive_errors(self):
        reports = [analysis.growth_rate_fit(self.stats, self.spectral),
                   analysis.mean_count_check(self.stats, self.spectral, 'all',
                                             self.regions['all']),
                   analysis.almost_sure_check(self.stats, self.spectral),
                   analysis.variance_stability_check(self.stats, self.spectral)]
        for report in reports:
            self.assertGreater(report.stderr, 0.0)
            self.assertGreater(report.replicas, 0)

    def test_capped_replicas_leave_counts_ungated(self):
        stats = copy.copy(self.stats)
        stats.counts = self.stats.counts.copy()
        stats.exploded = self.stats.exploded.copy()
        stats.counts[0, -1] = np.nan
        stats.exploded[0] = True

        reports = [limit_moment_check(stats, self.table, self.spectral, 1),
                   analysis.mean_count_check(stats, self.spectral, 'all',
                                             self.regions['all'])]
        for report in reports:
            self.assertEqual(report.status, UNDEFINED)
            self.assertFalse(report.gated)
            self.assertEqual(report.details['cap_hits'], 1)
            self.assertEqual(report.replicas, stats.replicas - 1)


class TestLimitMoments(unittest.TestCase):
    """
    E (N_T exp(-lambda0 T))^n against (int psi)^n f_n(x0) on a real
    ensemble, far enough out for the limit to have settled.
    """
    @classmethod
    def setUpClass(cls):
        field = RateField.square_well(1, 1.0, 1.0)
        grid = Grid(1, 20.0, 2000)
        cls.spectral = principal_eigenpair(discretize(field, grid), grid, 1.0, 1.0)
        cls.table = compute_f(cls.spectral, field, 2)
        t_end = 6.0 / cls.spectral.lambda0
        mc = McSpec(replicas=1500, t_end=t_end, obs_interval=1.0, cap=10 ** 6,
                    seed=7, x0=[0.0], return_bound=1e-3, horizons=[t_end])
        cls.stats = run_ensemble(field, mc, spectral=cls.spectral)

    def test_no_replica_hit_the_cap(self):
        self.assertEqual(self.stats.cap_hits, 0)

    def test_first_two_moments(self):
        for n in (1, 2):
            report = limit_moment_check(self.stats, self.table, self.spectral, n)
            self.assertEqual(report.status, PASS, report.to_dict())
            self.assertGreater(report.predicted, 0.0)

    def test_martingale(self):
        report = martingale_check(self.stats)
        self.assertEqual(report.status, PASS, report.to_dict())


def synthetic_stats(counts, classes=GROWING, regions=None, radius=None,
                    probes=None, martingale=None, horizons=None, x0=(0.0,),
                    exploded=None):
    replicas = counts.shape[0]
    horizons = horizons or [float(TIMES[-1])]
    if isinstance(classes, str):
        classes = np.full((len(horizons), replicas), classes)
    terminal = np.vstack([counts[:, int(np.argmin(np.abs(TIMES - h)))]
                          for h in horizons])
    return EnsembleStats(TIMES, counts, regions or {}, {}, {},
                         radius if radius is not None else np.zeros_like(counts),
                         martingale, probes, horizons, classes, terminal,
                         exploded if exploded is not None else
                         np.zeros(replicas, dtype=bool), seed=0, x0=list(x0))
