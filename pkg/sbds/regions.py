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

from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.stats import qmc

from .errors import DimensionMismatchError, RegionError


BALL = 'ball'
INTERVAL = 'interval'
BOX = 'box'

SHAPES = (BALL, INTERVAL, BOX)

# Fixed low-discrepancy directions on the sphere for the angular measure of
# boxes in dim >= 2. Seeded, so every run sees the same directions.
_SPHERE_POINTS = 4096


@dataclass(frozen=True)
class Region:
    """
    A ball, an interval (dim 1) or an axis-aligned box.

    Keyword arguments:
    shape  -- one of SHAPES
    center -- ball center; for intervals and boxes the lower corner
    size   -- ball radius as a 1-tuple; for intervals and boxes the upper
              corner. Box corners may be infinite, which is how half-lines,
              half-spaces and the whole space are written.
    """
    shape: str
    center: tuple
    size: tuple

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise RegionError("unknown region shape: {0}".format(self.shape))
        if self.shape == BALL:
            if len(self.size) != 1 or not self.size[0] >= 0:
                raise RegionError("a ball needs a single non-negative radius")
            if not np.all(np.isfinite(self.center)):
                raise RegionError("a ball needs a finite center")
        else:
            if len(self.center) != len(self.size):
                raise RegionError("box corners differ in dimension")
            if np.any(np.asarray(self.size) < np.asarray(self.center)):
                raise RegionError("upper corner below lower corner")
            if self.shape == INTERVAL and len(self.center) != 1:
                raise RegionError("intervals live in dimension 1")

    @classmethod
    def ball(cls, center, radius):
        return cls(BALL, tuple(float(c) for c in np.atleast_1d(center)),
                   (float(radius),))

    @classmethod
    def interval(cls, lo, hi):
        return cls(INTERVAL, (float(lo),), (float(hi),))

    @classmethod
    def box(cls, lower, upper):
        return cls(BOX, tuple(float(c) for c in lower),
                   tuple(float(c) for c in upper))

    @classmethod
    def everything(cls, dim):
        return cls.box([-np.inf] * dim, [np.inf] * dim)

    @property
    def dim(self):
        return len(self.center)

    @property
    def is_bounded(self):
        if self.shape == BALL:
            return True
        return bool(np.all(np.isfinite(self.center + self.size)))

    @property
    def is_everything(self):
        return self.shape != BALL and \
               all(c == -np.inf for c in self.center) and \
               all(c == np.inf for c in self.size)

    def shifted(self, offset):
        """
        Returns the region translated by offset (the U + tv of a window).
        """
        offset = np.atleast_1d(np.asarray(offset, dtype=float))
        if offset.size != self.dim:
            raise DimensionMismatchError(self.dim, offset.size)
        if self.shape == BALL:
            return Region(BALL, tuple(np.asarray(self.center) + offset), self.size)
        return Region(self.shape, tuple(np.asarray(self.center) + offset),
                      tuple(np.asarray(self.size) + offset))

    def contains(self, points):
        """
        Boolean mask of the points (shape (n, dim)) lying in the region.
        Boxes are half-open, [lower, upper), so that adjacent boxes
        partition space without double counting.
        """
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[:, None] if self.dim == 1 else points[None, :]
        if points.shape[-1] != self.dim:
            raise DimensionMismatchError(self.dim, points.shape[-1])

        if self.shape == BALL:
            center = np.asarray(self.center)
            return np.sum((points - center) ** 2, axis=1) <= self.size[0] ** 2

        lower = np.asarray(self.center)
        upper = np.asarray(self.size)
        return np.all((points >= lower) & (points < upper), axis=1)

    def interval_bounds(self):
        """
        The [lo, hi] extent of a 1-D region.
        """
        if self.dim != 1:
            raise DimensionMismatchError(1, self.dim)
        if self.shape == BALL:
            return self.center[0] - self.size[0], self.center[0] + self.size[0]
        return self.center[0], self.size[0]

    def sphere_fraction(self, r):
        """
        Fraction of the sphere |y| = r (dim >= 2) lying in the region,
        vectorized over r.
        """
        r = np.asarray(r, dtype=float)
        if self.is_everything:
            return np.ones_like(r)
        if self.shape == BALL:
            return _ball_sphere_fraction(r, np.linalg.norm(self.center),
                                         self.size[0], self.dim)

        directions = _sphere_directions(self.dim)
        lower = np.asarray(self.center)
        upper = np.asarray(self.size)
        fractions = np.empty(r.size)
        for i, radius in enumerate(r.ravel()):
            points = radius * directions
            inside = np.all((points >= lower) & (points < upper), axis=1)
            fractions[i] = inside.mean()
        return fractions.reshape(r.shape)

    def max_radius(self):
        """
        Largest |y| over the region (inf when unbounded).
        """
        if not self.is_bounded:
            return np.inf
        if self.shape == BALL:
            return float(np.linalg.norm(self.center) + self.size[0])
        corners = np.maximum(np.abs(np.asarray(self.center)),
                             np.abs(np.asarray(self.size)))
        return float(np.linalg.norm(corners))


def parse_region(spec, dim):
    """
    Builds a Region from its configuration dictionary:
    {"shape": "ball", "center": [...], "radius": r},
    {"shape": "interval", "lo": a, "hi": b},
    {"shape": "box", "lower": [...], "upper": [...]}, or
    {"shape": "everything"}. Missing interval/box bounds are infinite.
    """
    try:
        shape = spec['shape']
        if shape == 'everything':
            region = Region.everything(dim)
        elif shape == BALL:
            region = Region.ball(spec.get('center', [0.0] * dim), spec['radius'])
        elif shape == INTERVAL:
            region = Region.interval(spec.get('lo', -np.inf), spec.get('hi', np.inf))
        elif shape == BOX:
            region = Region.box(spec.get('lower', [-np.inf] * dim),
                                spec.get('upper', [np.inf] * dim))
        else:
            raise RegionError("unknown region shape: {0}".format(shape))
    except (KeyError, TypeError, ValueError) as e:
        raise RegionError("malformed region {0}: {1}".format(spec, e))

    if region.dim != dim:
        raise DimensionMismatchError(dim, region.dim)
    return region


def _ball_sphere_fraction(r, s, rho, dim):
    """
    Fraction of the sphere of radius r (centered at the origin) inside a
    ball of radius rho whose center sits at distance s from the origin.
    """
    fraction = np.where(r <= rho - s, 1.0, 0.0)
    if s == 0:
        return fraction

    crossing = (r > abs(rho - s)) & (r < rho + s) & (r > 0)
    rc = np.where(crossing, r, 1.0)
    cos_t = np.clip((rc ** 2 + s ** 2 - rho ** 2) / (2.0 * rc * s), -1.0, 1.0)
    # spherical cap of half-angle t: 1/2 I_{sin^2 t}((d-1)/2, 1/2) for t <= pi/2
    half = 0.5 * special.betainc(0.5 * (dim - 1), 0.5, 1.0 - cos_t ** 2)
    cap = np.where(cos_t >= 0, half, 1.0 - half)
    return np.where(crossing, cap, fraction)


_directions_cache = {}


def _sphere_directions(dim):
    if dim not in _directions_cache:
        sampler = qmc.Sobol(d=dim, scramble=True, seed=dim)
        normals = special.ndtri(sampler.random(_SPHERE_POINTS))
        _directions_cache[dim] = normals / np.linalg.norm(normals, axis=1)[:, None]
    return _directions_cache[dim]
