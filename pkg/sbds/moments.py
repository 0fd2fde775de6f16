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

import math
import logging

import numpy as np
from scipy.special import comb

from . import config
from .errors import MomentOrderError, VelocityTooFastError
from .spectral import discretize, mass_and_alpha, resolvent_apply


class MomentTable:
    """
    The profiles f_1 = psi, f_2, ..., f_nmax on the grid of a SpectralData.
    E(xi^x)^n = (int psi)^n f_n(x).

    Keyword arguments:
    grid    -- the Grid the profiles live on
    profiles -- array of shape (nmax, nodes), row n - 1 holding f_n
    lambda0 -- principal eigenvalue the profiles were built with
    mass    -- int psi
    """
    def __init__(self, grid, profiles, lambda0, mass):
        self.grid = grid
        self.profiles = profiles
        self.lambda0 = lambda0
        self.mass = mass

    @property
    def nmax(self):
        return self.profiles.shape[0]

    def f(self, n):
        if not 1 <= n <= self.nmax:
            raise MomentOrderError(n, self.nmax)
        return self.profiles[n - 1]

    def f_at(self, n, x0):
        """
        f_n interpolated at the start point x0 (0 beyond the grid).
        """
        r = _start_coordinate(self.grid, x0)
        return float(np.interp(r, self.grid.coords, self.f(n), left=0.0,
                               right=0.0))


def compute_f(spectral, field, nmax=config.nmax):
    """
    Builds f_1 = psi and, for n >= 2,
    f_n = (n lambda0 - L)^(-1) sum_{k=1}^{n-1} C(n, k) v f_k f_{n-k}.
    Each f_n costs one resolvent solve at shift n lambda0.
    """
    if nmax < 1:
        raise MomentOrderError(nmax, nmax)

    matrix = discretize(field, spectral.grid)
    rates = matrix.rates
    profiles = np.zeros((nmax, len(spectral.grid)))
    profiles[0] = spectral.psi

    for n in range(2, nmax + 1):
        source = np.zeros(len(spectral.grid))
        for k in range(1, n):
            source += comb(n, k, exact=True) * profiles[k - 1] * profiles[n - k - 1]
        source *= rates
        # n lambda0 > lambda0 whenever lambda0 > 0
        assert n * spectral.lambda0 > spectral.lambda0
        profiles[n - 1] = resolvent_apply(matrix, n * spectral.lambda0, source,
                                          lambda0=spectral.lambda0)
        logging.debug("f_{0} computed, max {1:.6g}".format(n, profiles[n - 1].max()))

    return MomentTable(spectral.grid, profiles, spectral.lambda0, spectral.mass)


def xi_moment(table, spectral, n, x0):
    """
    Returns E(xi^x0)^n = (int psi)^n f_n(x0).
    """
    if not 1 <= n <= table.nmax:
        raise MomentOrderError(n, table.nmax)
    value = spectral.psi_at(x0) if n == 1 else table.f_at(n, x0)
    return float(spectral.mass ** n * value)


def lyapunov_ordered(table, spectral, x0):
    """
    Checks m_2 >= m_1^2 for the moments of xi normalized by the mass of
    survival, m_n = E xi^n / P(xi > 0). Since P(xi > 0) <= 1 and is
    unknown, the check uses the weaker E xi^2 >= (E xi)^2, which every
    distribution satisfies.
    """
    if table.nmax < 2:
        return True
    m1 = xi_moment(table, spectral, 1, x0)
    m2 = xi_moment(table, spectral, 2, x0)
    return m2 >= m1 * m1 * (1.0 - 1e-12)


def check_velocity(spectral, velocity):
    """
    Raises VelocityTooFastError unless |velocity| < b = sqrt(lambda0 / 2).
    """
    speed = float(np.linalg.norm(np.atleast_1d(velocity)))
    if speed >= spectral.front_speed:
        raise VelocityTooFastError(speed, spectral.front_speed)
    return speed


def g_window(spectral, region, velocity, t):
    """
    g(t) = exp(lambda0 t) alpha(U + t v), the normalizer of the number of
    particles in a window moving at constant velocity.
    """
    check_velocity(spectral, velocity)
    offset = t * np.atleast_1d(np.asarray(velocity, dtype=float))
    shifted = region.shifted(offset)
    if shifted.is_bounded and shifted.max_radius() > spectral.grid.extent:
        logging.debug("window at t={0:g} reaches beyond the grid; using "
                      "the tail law".format(t))
    return math.exp(spectral.lambda0 * t) * mass_and_alpha(spectral, shifted)


def g_window_normalized(spectral, region, velocity, t):
    """
    t^((d-1)/2) exp(-(lambda0 - sqrt(2 lambda0) |v|) t) g(t), which stays
    between two positive constants for bounded U.
    """
    speed = check_velocity(spectral, velocity)
    d = spectral.grid.dim
    rate = spectral.lambda0 - spectral.kappa * speed
    return t ** (0.5 * (d - 1)) * math.exp(-rate * t) * \
           g_window(spectral, region, velocity, t)


def _start_coordinate(grid, x0):
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if grid.dim == 1:
        return float(x0[0])
    return float(np.linalg.norm(x0))
