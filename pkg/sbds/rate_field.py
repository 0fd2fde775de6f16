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
Branching intensity v(x) >= 0 with compact support.

Every profile is a function of |x|: even in 1-D, radially symmetric in
higher dimensions.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, InvalidFieldError


SQUARE_WELL = 'square_well'
SMOOTH_BUMP = 'smooth_bump'
TABULATED_RADIAL = 'tabulated_radial'

KINDS = (SQUARE_WELL, SMOOTH_BUMP, TABULATED_RADIAL)

# Gauss-Legendre rule used for cell averages of the continuous profiles.
_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(6)


@dataclass(frozen=True)
class RateField:
    """
    Keyword arguments:
    dim       -- dimension of the space, >= 1
    kind      -- one of KINDS
    amplitude -- beta, the peak rate (1/time); ignored for tabulated profiles
    radius    -- a, the support radius; ignored for tabulated profiles
    nodes     -- strictly increasing radii of a tabulated profile
    values    -- non-negative rates at the nodes of a tabulated profile
    """
    dim: int
    kind: str
    amplitude: float = 0.0
    radius: float = 0.0
    nodes: tuple = ()
    values: tuple = ()

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise InvalidFieldError("dimension must be a positive integer")
        if self.kind not in KINDS:
            raise InvalidFieldError("unknown field kind: {0}".format(self.kind))

        if self.kind == TABULATED_RADIAL:
            nodes = np.asarray(self.nodes, dtype=float)
            values = np.asarray(self.values, dtype=float)
            if nodes.ndim != 1 or nodes.size < 2 or nodes.size != values.size:
                raise InvalidFieldError("tabulated profile needs matching "
                                        "node and value lists of length >= 2")
            if nodes[0] < 0 or np.any(np.diff(nodes) <= 0):
                raise InvalidFieldError("tabulated radii must be non-negative "
                                        "and strictly increasing")
            if np.any(values < 0):
                raise InvalidFieldError("tabulated rates must be non-negative")
        else:
            if self.amplitude < 0:
                raise InvalidFieldError("amplitude must be non-negative")
            if self.radius < 0:
                raise InvalidFieldError("support radius must be non-negative")

    @classmethod
    def square_well(cls, dim, amplitude, radius):
        return cls(dim, SQUARE_WELL, float(amplitude), float(radius))

    @classmethod
    def smooth_bump(cls, dim, amplitude, radius):
        return cls(dim, SMOOTH_BUMP, float(amplitude), float(radius))

    @classmethod
    def tabulated(cls, dim, nodes, values):
        return cls(dim, TABULATED_RADIAL, nodes=tuple(float(r) for r in nodes),
                   values=tuple(float(v) for v in values))

    @classmethod
    def from_csv(cls, path, dim):
        """
        Loads a tabulated radial profile from a two-column CSV file
        (radius, value). Lines starting with '#' and a non-numeric header
        line are skipped.
        """
        try:
            table = np.genfromtxt(path, delimiter=',', comments='#',
                                  invalid_raise=True)
        except (OSError, ValueError) as e:
            raise InvalidFieldError("cannot read profile {0}: {1}".format(path, e))

        table = np.atleast_2d(table)
        table = table[~np.isnan(table).any(axis=1)]
        if table.shape[1] != 2:
            raise InvalidFieldError("profile {0} must have two columns".format(path))
        return cls.tabulated(dim, table[:, 0], table[:, 1])

    @property
    def is_continuous(self):
        if self.kind == SQUARE_WELL:
            return self.max_rate() == 0
        if self.kind == TABULATED_RADIAL:
            return self.values[-1] == 0
        return True

    def max_rate(self):
        """
        Returns v_max = sup v, the thinning bound of the simulator.
        """
        if self.kind == TABULATED_RADIAL:
            return float(max(self.values))
        if self.radius == 0:
            return 0.0
        return float(self.amplitude)

    def support_radius(self):
        """
        Returns the radius a outside of which v vanishes; 0 for v == 0.
        """
        if self.max_rate() == 0:
            return 0.0
        if self.kind != TABULATED_RADIAL:
            return float(self.radius)

        values = np.asarray(self.values)
        last = np.flatnonzero(values > 0)[-1]
        # linear interpolation carries the profile up to the next zero node
        if last + 1 < values.size:
            last += 1
        return float(self.nodes[last])

    def profile(self, r):
        """
        Evaluates the radial profile at radii r >= 0 (vectorized).
        """
        r = np.abs(np.asarray(r, dtype=float))
        if self.kind == SQUARE_WELL:
            return np.where(r <= self.radius, self.amplitude, 0.0) \
                   if self.radius > 0 else np.zeros_like(r)
        if self.kind == SMOOTH_BUMP:
            if self.radius == 0:
                return np.zeros_like(r)
            s = 1.0 - (r / self.radius) ** 2
            return np.where(r <= self.radius, self.amplitude * s * s, 0.0)

        nodes = np.asarray(self.nodes)
        return np.interp(r, nodes, np.asarray(self.values), left=self.values[0],
                         right=0.0)

    def eval(self, x):
        """
        Returns v(x). x is a single point of shape (dim,) or a stack of
        points of shape (n, dim); a 1-D field also accepts plain scalars.
        """
        x = np.asarray(x, dtype=float)
        if self.dim == 1 and x.ndim == 0:
            return float(self.profile(x))
        if x.shape[-1] != self.dim:
            raise DimensionMismatchError(self.dim, x.shape[-1])

        rates = self.profile(np.linalg.norm(x, axis=-1))
        return float(rates) if rates.ndim == 0 else rates

    def cell_average(self, lo, hi):
        """
        Mean of v over grid cells. In 1-D the cells are signed intervals
        [lo, hi]; for dim >= 2 they are spherical shells lo <= r <= hi and
        the mean carries the r^(dim-1) volume weight.
        """
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)

        if self.kind == SQUARE_WELL:
            return self.amplitude * self._well_overlap(lo, hi) \
                   if self.max_rate() > 0 else np.zeros_like(lo)

        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        points = mid[:, None] + half[:, None] * _GAUSS_NODES[None, :]
        rates = self.profile(points)
        if self.dim == 1:
            return rates @ _GAUSS_WEIGHTS / 2.0

        weights = _GAUSS_WEIGHTS[None, :] * np.abs(points) ** (self.dim - 1)
        total = weights.sum(axis=1)
        return np.where(total > 0, (rates * weights).sum(axis=1) / np.where(
                total > 0, total, 1.0), rates[:, 0])

    def _well_overlap(self, lo, hi):
        """
        Exact fraction of each cell lying inside the well.
        """
        a = self.radius
        if self.dim == 1:
            inside = np.clip(np.minimum(hi, a) - np.maximum(lo, -a), 0.0, None)
            return inside / (hi - lo)

        d = self.dim
        inner = np.clip(lo, 0.0, a) ** d
        outer = np.clip(hi, 0.0, a) ** d
        return (outer - inner) / (hi ** d - lo ** d)
