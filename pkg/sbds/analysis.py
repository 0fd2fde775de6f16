# Copyright (C) 2015 Ilias Stamatis <stamatis.iliass@gmail.com>
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>.

"""
Verdicts on the asymptotic laws of the particle counts.

Every check compares a statistic of an EnsembleStats against a value
predicted from SpectralData / MomentTable alone, and passes when
|estimate - predicted| <= max(tolerance, z * standard error).
"""

import math
import logging

import numpy as np

from . import config
from .mc_engine import FINITE
from .moments import check_velocity, g_window, xi_moment
from .spectral import mass_and_alpha, psi_integral


PASS = 'pass'
FAIL = 'fail'
NOT_SUPERCRITICAL = 'not_supercritical'
UNDEFINED = 'undefined'

# Unclassified replicas tolerated by the dichotomy check.
UNCLASSIFIED_LIMIT = 0.01

_EPS = np.finfo(float).eps


class TheoremReport:
    """
    One verdict.

    Keyword arguments:
    check     -- name of the check
    statistic -- what is estimated
    predicted -- value predicted from the spectral data
    estimate  -- ensemble estimate
    stderr    -- standard error of the estimate (> 0)
    status    -- PASS, FAIL, NOT_SUPERCRITICAL or UNDEFINED
    replicas  -- number of replicas the estimate used
    horizon   -- observation time of the estimate
    details   -- extra values worth exporting
    series    -- optional (times, mean, stderr, prediction) arrays
    """
    def __init__(self, check, statistic, predicted, estimate, stderr, status,
                 replicas, horizon, details=None, series=None):
        self.check = check
        self.statistic = statistic
        self.predicted = float(predicted)
        self.estimate = float(estimate)
        self.stderr = float(stderr)
        self.status = status
        self.replicas = int(replicas)
        self.horizon = float(horizon)
        self.details = details or {}
        self.series = series

    @property
    def passed(self):
        return self.status == PASS

    @property
    def gated(self):
        """
        Only PASS / FAIL verdicts count towards the exit code.
        """
        return self.status in (PASS, FAIL)

    def to_dict(self):
        return {
            'check': self.check,
            'statistic': self.statistic,
            'predicted': self.predicted,
            'estimate': self.estimate,
            'stderr': self.stderr,
            'status': self.status,
            'replicas': self.replicas,
            'horizon': self.horizon,
            'details': self.details,
        }

    def __str__(self):
        return "{0}: {1} = {2:.6g} +- {3:.2g} (predicted {4:.6g}) [{5}]".format(
                self.check, self.statistic, self.estimate, self.stderr,
                self.predicted, self.status)


def gate(estimate, predicted, stderr, z=config.z, tolerance=config.tolerance):
    """
    The two-sided verdict used by every check.
    """
    ok = abs(estimate - predicted) <= max(tolerance, z * stderr)
    return PASS if ok else FAIL


def standard_error(samples):
    samples = np.asarray(samples, dtype=float)
    if samples.size < 2:
        return _EPS
    return max(float(np.std(samples, ddof=1) / math.sqrt(samples.size)), _EPS)


def _column(stats, t):
    return int(np.argmin(np.abs(stats.times - t)))


def _survivors(stats, column=-1, horizon=-1):
    """
    Replicas classified growing at the horizon and still recorded at the
    column.
    """
    return stats.growing(horizon) & stats.recorded(column)


def growth_rate_fit(stats, spectral=None, z=config.z, tolerance=config.tolerance):
    """
    Least-squares slope of log(mean N_t) over the second half of the
    observation times, against lambda0 (0 without a spectral solve).
    The standard error is the delete-one jackknife over replicas.
    """
    predicted = spectral.lambda0 if spectral is not None else 0.0
    times = stats.times
    complete = np.all(stats.recorded(slice(None)), axis=0)
    window = complete & (times >= 0.5 * times[-1])
    if window.sum() < 2 or stats.replicas < 2:
        logging.warning("growth_rate_fit: too few complete observation times")
        return TheoremReport('growth_rate_fit', 'slope of log mean N_t',
                             predicted, np.nan, _EPS, UNDEFINED, stats.replicas,
                             times[-1])

    t = times[window]
    counts = stats.counts[:, window]
    mean = counts.mean(axis=0)
    slope = float(np.polyfit(t, np.log(mean), 1)[0])

    r = stats.replicas
    jack = (counts.sum(axis=0)[None, :] - counts) / (r - 1)
    slopes = np.polyfit(t, np.log(jack).T, 1)[0]
    stderr = max(math.sqrt((r - 1) / r * np.sum((slopes - slopes.mean()) ** 2)), _EPS)

    series = (t, np.log(mean), counts.std(axis=0, ddof=1) / mean / math.sqrt(r),
              np.log(mean[0]) + predicted * (t - t[0]))
    return TheoremReport('growth_rate_fit', 'slope of log mean N_t', predicted,
                         slope, stderr, gate(slope, predicted, stderr, z, tolerance),
                         r, t[-1], {'window': [float(t[0]), float(t[-1])]},
                         series)


def _capped(check, statistic, predicted, estimate, stderr, stats, details):
    """
    Replicas stopped at the particle cap bias every count statistic
    downwards; the check is reported but left ungated.
    """
    logging.warning("{0}: {1} replicas hit the particle cap, no verdict".format(
            check, stats.cap_hits))
    details = dict(details, cap_hits=stats.cap_hits)
    return TheoremReport(check, statistic, predicted, estimate, stderr, UNDEFINED,
                         stats.replicas - stats.cap_hits, stats.times[-1], details)


def limit_moment_check(stats, table, spectral, n, z=config.z,
                       tolerance=config.tolerance):
    """
    Mean of (N_T exp(-lambda0 T))^n at the final observation time against
    (int psi)^n f_n(x0).
    """
    horizon = stats.times[-1]
    recorded = stats.recorded(-1)
    counts = stats.counts[recorded, -1]

    if spectral is None:
        samples = counts ** n
        return TheoremReport('limit_moment_check', 'E (N_T)^{0}'.format(n), 1.0,
                             samples.mean(), standard_error(samples),
                             NOT_SUPERCRITICAL, counts.size, horizon, {'n': n})

    statistic = 'E (N_T exp(-lambda0 T))^{0}'.format(n)
    samples = (counts * math.exp(-spectral.lambda0 * horizon)) ** n
    predicted = xi_moment(table, spectral, n, stats.x0)
    estimate = float(samples.mean())
    stderr = standard_error(samples)
    if stats.cap_hits:
        return _capped('limit_moment_check', statistic, predicted, estimate,
                       stderr, stats, {'n': n})
    return TheoremReport('limit_moment_check', statistic, predicted, estimate,
                         stderr, gate(estimate, predicted, stderr, z, tolerance),
                         counts.size, horizon, {'n': n})


def domain_fraction_check(stats, spectral, name, region, z=config.z,
                          tolerance=config.tolerance):
    """
    Mean of n_T(U) / N_T over the surviving replicas against alpha(U).
    """
    horizon = stats.times[-1]
    survivors = _survivors(stats)
    ratios = stats.regions[name][survivors, -1] / stats.counts[survivors, -1]
    predicted = 1.0 if region.is_everything else mass_and_alpha(spectral, region)
    if ratios.size == 0:
        return TheoremReport('domain_fraction_check', 'n_T(U) / N_T', predicted,
                             np.nan, _EPS, UNDEFINED, 0, horizon, {'region': name})

    estimate = float(ratios.mean())
    stderr = standard_error(ratios)
    return TheoremReport('domain_fraction_check', 'n_T(U) / N_T', predicted,
                         estimate, stderr, gate(estimate, predicted, stderr, z, tolerance),
                         ratios.size, horizon, {'region': name})


def _ratio_of_means(a, b):
    """
    mean(a) / mean(b) and its delta-method standard error.
    """
    ratio = a.mean() / b.mean()
    if a.size < 2:
        return float(ratio), _EPS
    cov = np.cov(a, b)
    var = (cov[0, 0] - 2.0 * ratio * cov[0, 1] + ratio ** 2 * cov[1, 1]) / a.size
    return float(ratio), max(math.sqrt(max(var, 0.0)) / b.mean(), _EPS)


def moving_window_check(stats, spectral, window, region, velocity=None,
                        z=config.z, tolerance=config.tolerance):
    """
    Ratio of the two estimators of E xi over the surviving replicas,
    mean(n_t(U + tv) / g(t)) / mean(N_t exp(-lambda0 t)), against 1.
    Raises VelocityTooFastError when |v| >= b.
    """
    if velocity is None:
        velocity = stats.velocities[window]
    check_velocity(spectral, velocity)

    survivors = _survivors(stats)
    columns = np.flatnonzero(stats.times > 0)[-3:]
    ratios, errors = [], []
    for column in columns:
        t = stats.times[column]
        normalizer = g_window(spectral, region, velocity, t)
        a = stats.windows[window][survivors, column] / normalizer
        b = stats.counts[survivors, column] * math.exp(-spectral.lambda0 * t)
        if a.size == 0 or normalizer <= 0:
            return TheoremReport('moving_window_check', 'E xi ratio', 1.0, np.nan,
                                 _EPS, UNDEFINED, a.size, t, {'window': window})
        ratio, stderr = _ratio_of_means(a, b)
        ratios.append(ratio)
        errors.append(stderr)

    estimate, stderr = ratios[-1], errors[-1]
    times = stats.times[columns]
    return TheoremReport('moving_window_check', 'E xi ratio', 1.0, estimate, stderr,
                         gate(estimate, 1.0, stderr, z, tolerance),
                         int(survivors.sum()), times[-1],
                         {'window': window,
                          'speed': float(np.linalg.norm(velocity)),
                          'drift': float(max(ratios) - min(ratios))},
                         (times, np.array(ratios), np.array(errors),
                          np.ones(len(ratios))))


def front_speed_check(stats, spectral, delta=config.front_delta,
                      confidence=config.front_confidence, z=config.z):
    """
    Fraction of surviving replicas whose R_t / t lies in [b - delta b,
    b + delta b], with t each replica's latest recorded time in the second
    half of the run. Passes when that fraction, and the fraction of
    replicas covering every probe ball at radius (b - delta b) t, reach
    the confidence level within z standard errors.
    """
    horizon = stats.times[-1]
    if spectral is None:
        return TheoremReport('front_speed_check', 'P(R_t / t in band)', confidence,
                             0.0, _EPS, NOT_SUPERCRITICAL, stats.replicas, horizon)

    b = spectral.front_speed
    survivors = np.flatnonzero(stats.growing())
    late = stats.times >= 0.5 * horizon

    speeds, covered, used = [], [], []
    for i in survivors:
        columns = np.flatnonzero(late & ~np.isnan(stats.radius[i]))
        if columns.size == 0:
            continue
        column = columns[-1]
        speeds.append(stats.radius[i, column] / stats.times[column])
        used.append(stats.times[column])
        if stats.probes is not None:
            covered.append(stats.probes[i, column] >= 1.0)

    if not speeds:
        return TheoremReport('front_speed_check', 'P(R_t / t in band)', confidence,
                             np.nan, _EPS, UNDEFINED, 0, horizon)

    speeds = np.array(speeds)
    inside = (np.abs(speeds - b) <= delta * b).astype(float)
    estimate = float(inside.mean())
    stderr = standard_error(inside)
    ok = estimate >= confidence - z * stderr

    details = {'front_speed': b, 'delta': delta * b,
               'mean_speed': float(speeds.mean()),
               'earliest_time': float(min(used))}
    if covered:
        coverage = np.array(covered, dtype=float)
        details['covered'] = float(coverage.mean())
        ok = ok and coverage.mean() >= confidence - z * standard_error(coverage)

    return TheoremReport('front_speed_check', 'P(R_t / t in band)', confidence,
                         estimate, stderr, PASS if ok else FAIL, speeds.size,
                         horizon, details)


def dichotomy_check(stats, extinction=None, z=config.z):
    """
    Survival classes at the classification horizons. Unclassified
    replicas must stay below UNCLASSIFIED_LIMIT.

    In dim >= 3 the finite fraction at the last horizon must be positive
    (z standard errors clear of 0). Between the first and the last horizon
    it must stay put within 2 standard errors of the two fractions. When a
    feynman_kac ExtinctionTable is given it must also reach M^1(x0), the
    probability that the first particle never branches.

    In dim <= 2 the finite fraction must drop significantly from the first
    to the last horizon, unless it is 0 at both. A single horizon in
    dim <= 2 leaves nothing to compare and only the unclassified limit
    applies.
    """
    classes = stats.classes
    finite = (classes == FINITE).astype(float)
    last = finite[-1]
    fractions = stats.survival_fractions()
    estimate = float(last.mean())
    stderr = standard_error(last)
    horizon = stats.horizons[-1]
    dim = len(stats.x0)
    details = {'fractions': fractions, 'dim': dim}
    logging.info("Survival fractions at t={0:g}: {1}".format(horizon, fractions))

    if np.all(classes == FINITE) and np.nanmax(stats.counts) <= 1:
        # nothing ever branched
        return TheoremReport('dichotomy_check', 'P(finite)', np.nan, estimate,
                             stderr, NOT_SUPERCRITICAL, stats.replicas, horizon,
                             details)

    ok = fractions['unclassified'] < UNCLASSIFIED_LIMIT
    predicted = estimate

    if dim >= 3:
        ok = ok and estimate - z * stderr > 0

    if len(stats.horizons) > 1:
        first = finite[0]
        change = last - first
        change_error = standard_error(change)
        predicted = float(first.mean())
        details['first_horizon'] = stats.horizons[0]
        details['first_finite'] = predicted
        if dim <= 2:
            vanished = predicted == 0 and estimate == 0
            ok = ok and (vanished or change.mean() < -z * change_error)
            stderr = change_error
        else:
            spread = math.hypot(standard_error(first), standard_error(last))
            ok = ok and abs(change.mean()) < 2.0 * spread
            stderr = spread

    if extinction is not None and dim >= 3:
        never_branches = extinction.M_at(1, stats.x0)
        details['never_branches'] = never_branches
        ok = ok and estimate >= never_branches - z * standard_error(last)

    return TheoremReport('dichotomy_check', 'P(finite)', predicted, estimate,
                         stderr, PASS if ok else FAIL, stats.replicas, horizon,
                         details)


def martingale_check(stats, z=config.z, tolerance=config.tolerance):
    """
    The ensemble mean of exp(-lambda0 t) sum psi(X_i(t)) must not move:
    the worst deviation from the first observation time, in units of its
    paired standard error, decides.
    """
    if stats.martingale is None:
        return TheoremReport('martingale_check', 'E M_t', np.nan, np.nan, _EPS,
                             NOT_SUPERCRITICAL, stats.replicas, stats.times[-1])

    complete = np.flatnonzero(np.all(stats.recorded(slice(None)), axis=0))
    values = stats.martingale[:, complete]
    start = values[:, 0]
    worst, worst_column, worst_error = 0.0, 0, _EPS
    for j in range(1, complete.size):
        error = standard_error(values[:, j] - start)
        score = abs(values[:, j].mean() - start.mean()) / error
        if score >= worst:
            worst, worst_column, worst_error = score, j, error

    predicted = float(start.mean())
    estimate = float(values[:, worst_column].mean())
    times = stats.times[complete]
    errors = np.array([standard_error(values[:, j]) for j in range(complete.size)])
    return TheoremReport('martingale_check', 'E M_t', predicted, estimate,
                         worst_error, gate(estimate, predicted, worst_error, z, tolerance),
                         stats.replicas, times[worst_column],
                         {'worst_score': worst},
                         (times, values.mean(axis=0), errors,
                          np.full(complete.size, predicted)))


def variance_stability_check(stats, spectral, z=2.0):
    """
    Variance of N_t exp(-lambda0 t) at the last two classification
    horizons.
    """
    if spectral is None or len(stats.horizons) < 2:
        return TheoremReport('variance_stability_check', 'Var W_t', np.nan,
                             np.nan, _EPS,
                             NOT_SUPERCRITICAL if spectral is None else UNDEFINED,
                             stats.replicas, stats.times[-1])

    variances, errors = [], []
    for t in stats.horizons[-2:]:
        column = _column(stats, t)
        w = stats.counts[stats.recorded(column), column] * math.exp(-spectral.lambda0 * t)
        squares = (w - w.mean()) ** 2
        variances.append(float(np.var(w, ddof=1)) if w.size > 1 else 0.0)
        errors.append(standard_error(squares))

    stderr = math.hypot(*errors)
    return TheoremReport('variance_stability_check', 'Var W_t', variances[0],
                         variances[1], stderr,
                         gate(variances[1], variances[0], stderr, z),
                         stats.replicas, stats.horizons[-1])


def _sup_deviation(w, columns):
    block = w[:, columns]
    return np.max(np.abs(block - block[:, -1:]), axis=1)


def almost_sure_check(stats, spectral, z=config.z):
    """
    Per-replica sup deviation of W_t = N_t exp(-lambda0 t) over the last
    three observation times must not exceed the same statistic over the
    three observation times ending at half horizon.
    """
    horizon = stats.times[-1]
    if spectral is None:
        return TheoremReport('almost_sure_check', 'sup |W_s - W_t|', 0.0, 0.0,
                             _EPS, NOT_SUPERCRITICAL, stats.replicas, horizon)

    half = _column(stats, 0.5 * horizon)
    late = np.arange(stats.times.size)[-3:]
    early = np.arange(max(0, half - 2), half + 1)
    survivors = _survivors(stats)
    if late.size < 2 or early.size < 2 or not survivors.any():
        return TheoremReport('almost_sure_check', 'sup |W_s - W_t|', np.nan, np.nan,
                             _EPS, UNDEFINED, int(survivors.sum()), horizon)

    w = stats.counts[survivors] * np.exp(-spectral.lambda0 * stats.times)[None, :]
    early_dev = _sup_deviation(w, early)
    late_dev = _sup_deviation(w, late)
    difference = late_dev - early_dev
    stderr = standard_error(difference)
    ok = difference.mean() <= z * stderr
    return TheoremReport('almost_sure_check', 'sup |W_s - W_t|',
                         float(early_dev.mean()), float(late_dev.mean()), stderr,
                         PASS if ok else FAIL, int(survivors.sum()), horizon)


def mean_count_check(stats, spectral, name, region, z=config.z,
                     tolerance=config.tolerance):
    """
    mean n_T(U) / (exp(lambda0 T) psi(x0) int_U psi) against 1.
    """
    horizon = stats.times[-1]
    recorded = stats.recorded(-1)
    counts = stats.regions[name][recorded, -1]
    main = math.exp(spectral.lambda0 * horizon) * spectral.psi_at(stats.x0) * \
           (spectral.mass if region.is_everything else psi_integral(spectral, region))
    if main <= 0 or counts.size == 0:
        return TheoremReport('mean_count_check', 'E n_T(U) / main term', 1.0,
                             np.nan, _EPS, UNDEFINED, counts.size, horizon,
                             {'region': name})

    samples = counts / main
    estimate = float(samples.mean())
    stderr = standard_error(samples)
    if stats.cap_hits:
        return _capped('mean_count_check', 'E n_T(U) / main term', 1.0, estimate,
                       stderr, stats, {'region': name})
    return TheoremReport('mean_count_check', 'E n_T(U) / main term', 1.0, estimate,
                         stderr, gate(estimate, 1.0, stderr, z, tolerance),
                         counts.size, horizon, {'region': name})


def render_table(reports):
    """
    The reports as a fixed-width text table.
    """
    rows = [('check', 'statistic', 'predicted', 'estimate', 'stderr', 'status')]
    for report in reports:
        rows.append((report.check, report.statistic,
                     '{0:.6g}'.format(report.predicted),
                     '{0:.6g}'.format(report.estimate),
                     '{0:.2g}'.format(report.stderr), report.status))

    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    lines = ['  '.join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip()
             for row in rows]
    lines.insert(1, '  '.join('-' * width for width in widths))
    return '\n'.join(lines) + '\n'
