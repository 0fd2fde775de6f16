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
Probabilities M^n(x) = P(the population started at x ends with exactly n
particles), dim >= 3.

Two readings of the elliptic system are solved on the radial grid:

paper_literal -- 1/2 Lap M^1 = v and 1/2 Lap M^n = v sum_k M^k M^(n-k),
                 with M^1 -> 1 and M^n -> 0 at infinity, taken at
                 face value.
feynman_kac   -- 1/2 Lap M^1 = v M^1, M^1 -> 1, forced by
                 M^1(x) = E exp(-int v(X_s) ds). Defined for n = 1 only;
                 the rows n >= 2 are NaN.

Far fields are imposed through w = 1 - M^1 (resp. w = M^n) and the decay
closure of a harmonic tail at the outer radius.
"""

import math
import logging

import numpy as np
from scipy import linalg

from . import config
from .analysis import FAIL, PASS, UNDEFINED, TheoremReport, gate, standard_error
from .errors import DimensionTooLowError, MomentOrderError
from .mc_engine import FINITE
from .spectral import DECAY, OperatorMatrix, discretize


PAPER_LITERAL = 'paper_literal'
FEYNMAN_KAC = 'feynman_kac'

VARIANTS = (PAPER_LITERAL, FEYNMAN_KAC)


class ExtinctionTable:
    """
    Keyword arguments:
    variant  -- PAPER_LITERAL or FEYNMAN_KAC
    grid     -- the radial Grid
    profiles -- array (nmax, nodes), row n - 1 holding M^n
    """
    def __init__(self, variant, grid, profiles):
        self.variant = variant
        self.grid = grid
        self.profiles = profiles

    @property
    def nmax(self):
        return self.profiles.shape[0]

    def M(self, n):
        if not 1 <= n <= self.nmax:
            raise MomentOrderError(n, self.nmax)
        return self.profiles[n - 1]

    def defined(self, n):
        return bool(np.all(np.isfinite(self.M(n))))

    def M_at(self, n, x0):
        """
        M^n at the start point x0; the far-field value beyond the grid.
        """
        r = float(np.linalg.norm(np.atleast_1d(x0)))
        far = 1.0 if n == 1 else 0.0
        return float(np.interp(r, self.grid.coords, self.M(n), right=far))


def _laplacian(matrix):
    """
    The 1/2 Laplacian part of an assembled operator.
    """
    zero = np.zeros_like(matrix.rates)
    return OperatorMatrix(matrix.grid, zero, matrix.diag - matrix.rates,
                          matrix.off, matrix.inner, matrix.outer)


def _solve(laplacian, shift, rhs):
    """
    Solves (shift - 1/2 Lap) u = rhs; shift may vary by node. The matrix is
    a symmetric M-matrix, so rhs >= 0 gives u >= 0.
    """
    y = linalg.solveh_banded(laplacian.banded_upper(shift),
                             laplacian.to_symmetric(rhs))
    return laplacian.from_symmetric(y)


def solve_M(field, grid, nmax=config.nmax, variant=FEYNMAN_KAC):
    """
    Solves for M^1..M^nmax on a radial grid. Raises DimensionTooLowError
    for dim <= 2, where a finite limit has probability 0.
    """
    if field.dim <= 2:
        raise DimensionTooLowError(field.dim)
    if variant not in VARIANTS:
        raise ValueError("unknown variant: {0}".format(variant))
    if nmax < 1:
        raise MomentOrderError(nmax, nmax)

    matrix = discretize(field, grid, outer=DECAY)
    laplacian = _laplacian(matrix)
    rates = matrix.rates
    profiles = np.full((nmax, len(grid)), np.nan)

    if variant == FEYNMAN_KAC:
        # (v - 1/2 Lap) w = v with w = 1 - M^1
        profiles[0] = 1.0 - _solve(laplacian, rates, rates)
    else:
        # -1/2 Lap w = v with w = 1 - M^1
        profiles[0] = 1.0 - _solve(laplacian, 0.0, rates)
        for n in range(2, nmax + 1):
            source = np.zeros(len(grid))
            for k in range(1, n):
                source += profiles[k - 1] * profiles[n - k - 1]
            profiles[n - 1] = _solve(laplacian, 0.0, -rates * source)

    logging.info("M^1 ({0}) at r=0: {1:.10g}, at the outer node: {2:.10g}".format(
            variant, profiles[0][0], profiles[0][-1]))
    return ExtinctionTable(variant, grid, profiles)


def finite_fraction(stats, n):
    """
    Indicators of the replicas classified finite with exactly n particles
    at the final horizon.
    """
    finite = stats.classes[-1] == FINITE
    return (finite & (stats.terminal[-1] == n)).astype(float)


def compare_M_to_mc(table, stats, n, z=config.z, tolerance=config.tolerance):
    """
    M^n(x0) against the Monte Carlo fraction of replicas ending finite
    with n particles.
    """
    samples = finite_fraction(stats, n)
    estimate = float(samples.mean())
    stderr = standard_error(samples)
    horizon = stats.horizons[-1]
    statistic = 'P(finite, N = {0})'.format(n)
    details = {'variant': table.variant, 'n': n}

    if n > table.nmax or not table.defined(n):
        return TheoremReport('compare_M_to_mc', statistic, np.nan, estimate, stderr,
                             UNDEFINED, stats.replicas, horizon, details)

    predicted = table.M_at(n, stats.x0)
    return TheoremReport('compare_M_to_mc', statistic, predicted, estimate, stderr,
                         gate(estimate, predicted, stderr, z, tolerance),
                         stats.replicas, horizon, details)


def compare_variants(tables, stats, n, z=config.z, tolerance=config.tolerance):
    """
    Runs compare_M_to_mc for every table and names the variants the data
    is consistent with.
    """
    reports = [compare_M_to_mc(table, stats, n, z, tolerance) for table in tables]
    consistent = [r.details['variant'] for r in reports if r.passed]
    verdict = {
        'n': n,
        'consistent': consistent,
        'reports': [r.to_dict() for r in reports],
    }
    logging.info("M^{0}: data consistent with {1}".format(
            n, ', '.join(consistent) if consistent else 'neither variant'))
    return reports, verdict


def _feynman_kac_paths(field, x0, t_end, paths, rng):
    """
    Along each path, proposal times arrive at rate v_max and the weight is
    multiplied by 1 - v(X) / v_max at each of them, an unbiased estimator
    of exp(-int_0^T v(X_s) ds) with no time step. Returns the weights and
    the positions at T.
    """
    dim = field.dim
    vmax = field.max_rate()
    positions = np.tile(np.asarray(x0, dtype=float).reshape(1, dim), (paths, 1))
    clocks = np.zeros(paths)
    weights = np.ones(paths)
    active = np.arange(paths) if vmax > 0 else np.arange(0)

    while active.size:
        proposals = clocks[active] + rng.exponential(1.0 / vmax, active.size)
        active = active[proposals < t_end]
        proposals = proposals[proposals < t_end]

        elapsed = proposals - clocks[active]
        positions[active] += np.sqrt(elapsed)[:, None] * \
                             rng.standard_normal((active.size, dim))
        clocks[active] = proposals
        weights[active] *= 1.0 - field.eval(positions[active]) / vmax
        active = active[weights[active] > 0]

    positions += np.sqrt(t_end - clocks)[:, None] * rng.standard_normal((paths, dim))
    return weights, positions


def feynman_kac_mc(field, x0, t_end, paths, rng):
    """
    Estimates E exp(-int_0^T v(X_s) ds) for a single Brownian particle
    from x0. Returns (mean, standard error).
    """
    if field.max_rate() == 0:
        return 1.0, 0.0
    weights, _ = _feynman_kac_paths(field, x0, t_end, paths, rng)
    mean = float(weights.mean())
    stderr = float(weights.std(ddof=1) / math.sqrt(paths)) if paths > 1 else 0.0
    return mean, stderr


def feynman_kac_check(table, field, x0, t_end, paths, rng, z=config.z):
    """
    M^1(x0) of a feynman_kac table against the single-particle estimate.
    Cutting the paths at T overestimates M^1 by the weight of paths that
    return to the support later; a path at radius r comes back with
    probability (a / r)^(d - 2), which gives the lower end of the bracket.
    """
    statistic = 'E exp(-int_0^T v(X_s) ds)'
    details = {'paths': paths}
    if table.variant != FEYNMAN_KAC:
        raise ValueError("the single-particle estimate only applies to "
                         "{0}".format(FEYNMAN_KAC))

    predicted = table.M_at(1, x0)
    weights, positions = _feynman_kac_paths(field, x0, t_end, paths, rng)
    radii = np.linalg.norm(positions, axis=1)
    support = field.support_radius()
    returns = np.minimum(1.0, (support / np.maximum(radii, support)) ** (field.dim - 2))
    lower = weights * (1.0 - returns)

    estimate = float(weights.mean())
    stderr = standard_error(weights)
    floor = float(lower.mean()) - z * standard_error(lower)
    details['lower'] = float(lower.mean())
    ok = floor <= predicted <= estimate + z * stderr
    logging.info("M^1(x0)={0:.6g}, single-particle bracket [{1:.6g}, {2:.6g}]"\
                 .format(predicted, details['lower'], estimate))
    return TheoremReport('feynman_kac_check', statistic, predicted, estimate,
                         stderr, PASS if ok else FAIL, paths, t_end, details)
