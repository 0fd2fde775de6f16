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
Discretization of L = 1/2 Laplacian + v and the spectral objects built on it.

The operator is assembled in finite-volume form, so that it is symmetric
with respect to the weighted inner product <f, g>_w = sum(w_i f_i g_i)
where w_i is the volume of the cell around node i. Internally the matrix is
kept in its symmetrized form S = W^(1/2) A W^(-1/2), a plain symmetric
tridiagonal matrix that scipy's banded solvers handle directly.
"""

import math
import logging
from functools import cached_property

import numpy as np
from scipy import integrate, linalg, optimize

from .errors import (GridTooSmallError, NoPositiveEigenvalueError,
                     NonConvergenceError, ShiftInsideSpectrumError)


FULL_LINE = 'full_line'
RADIAL = 'radial'

DIRICHLET = 'dirichlet'
NEUMANN = 'neumann'
DECAY = 'decay'

# Declare the regime sub-critical when the top Rayleigh-Ritz value falls
# below this fraction of max_rate.
POSITIVITY_THRESHOLD = 1e-6

EIGEN_TOLERANCE = 1e-10
EIGEN_MAX_ITERATIONS = 100

# psi at the outer node must be this small relative to its maximum
EDGE_TOLERANCE = 1e-8

# Fraction of the extent beyond which psi is replaced by its tail law.
TAIL_WINDOW_END = 0.8

_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(6)


def sphere_area(dim):
    """
    Area of the unit sphere in R^dim (2 for dim 1: the two points +-1).
    """
    return 2.0 * math.pi ** (dim / 2.0) / math.gamma(dim / 2.0)


class Grid:
    """
    Nodes and cell volumes discretizing R^dim.

    In 1-D the grid covers [-R, R] with n cells of width h = 2R/n; the
    unknowns sit at the n - 1 interior nodes, psi vanishes at +-R. For
    dim >= 2 only radial functions are represented: nodes r_i = i h,
    i = 0..n-1, with h = R/n, and psi vanishes at r = R.
    """
    def __init__(self, dim, extent, nodes):
        """
        Keyword arguments:
        dim    -- dimension of the space
        extent -- R, half-width (1-D) or outer radius of the grid
        nodes  -- n, the number of cells across the extent
        """
        if extent <= 0 or nodes < 4:
            raise ValueError("a grid needs a positive extent and >= 4 cells")

        self.dim = int(dim)
        self.extent = float(extent)
        self.nodes = int(nodes)

        if self.dim == 1:
            self.geometry = FULL_LINE
            self.spacing = 2.0 * self.extent / self.nodes
            self.coords = -self.extent + self.spacing * np.arange(1, self.nodes)
            self.lower = self.coords - 0.5 * self.spacing
            self.upper = self.coords + 0.5 * self.spacing
            self.weights = np.full(self.coords.size, self.spacing)
        else:
            self.geometry = RADIAL
            self.spacing = self.extent / self.nodes
            self.coords = self.spacing * np.arange(self.nodes)
            self.lower = np.maximum(self.coords - 0.5 * self.spacing, 0.0)
            self.upper = self.coords + 0.5 * self.spacing
            # exact shell volumes; the r = 0 cell is the half-cell ball
            self.weights = sphere_area(self.dim) / self.dim * \
                           (self.upper ** self.dim - self.lower ** self.dim)

    def __len__(self):
        return self.coords.size

    def __repr__(self):
        return "Grid(dim={0}, extent={1}, nodes={2})".format(
                self.dim, self.extent, self.nodes)

    @property
    def radii(self):
        return np.abs(self.coords)

    def face_areas(self, faces):
        if self.dim == 1:
            return np.ones_like(faces)
        return sphere_area(self.dim) * faces ** (self.dim - 1)

    def inner(self, f, g):
        """
        Weighted inner product <f, g>_w.
        """
        return float(np.sum(self.weights * f * g))

    def norm(self, f):
        return math.sqrt(self.inner(f, f))

    def sample(self, func):
        """
        Samples a function of the node coordinates.
        """
        return np.asarray(func(self.coords), dtype=float)


class OperatorMatrix:
    """
    Finite-volume discretization of 1/2 Laplacian + v on a Grid.

    Keyword arguments:
    grid  -- the Grid
    rates -- cell averages of v
    diag  -- main diagonal of the symmetrized matrix S
    off   -- off-diagonal of S (length n - 1)
    inner -- boundary tag at the inner edge (r = 0 or -R)
    outer -- boundary tag at the outer edge
    """
    def __init__(self, grid, rates, diag, off, inner, outer):
        self.grid = grid
        self.rates = rates
        self.diag = diag
        self.off = off
        self.inner = inner
        self.outer = outer
        self._sqrt_w = np.sqrt(grid.weights)

    def __len__(self):
        return self.diag.size

    def symmetric_apply(self, phi):
        out = self.diag * phi
        out[:-1] += self.off * phi[1:]
        out[1:] += self.off * phi[:-1]
        return out

    def apply(self, f):
        """
        Returns Af, the discretized (1/2 Laplacian + v) f.
        """
        return self.symmetric_apply(self._sqrt_w * f) / self._sqrt_w

    def to_symmetric(self, f):
        return self._sqrt_w * f

    def from_symmetric(self, phi):
        return phi / self._sqrt_w

    def banded(self, shift, scale=1.0):
        """
        (shift I - scale S) in the (1, 1) banded layout of
        scipy.linalg.solve_banded.
        """
        ab = np.zeros((3, self.diag.size))
        ab[0, 1:] = -scale * self.off
        ab[1, :] = shift - scale * self.diag
        ab[2, :-1] = -scale * self.off
        return ab

    def banded_upper(self, shift):
        """
        (shift I - S) in the upper form of scipy.linalg.solveh_banded.
        """
        ab = np.zeros((2, self.diag.size))
        ab[0, 1:] = -self.off
        ab[1, :] = shift - self.diag
        return ab

    @cached_property
    def ritz_values(self):
        """
        The two largest Rayleigh-Ritz values of the matrix, descending.
        """
        n = self.diag.size
        values = linalg.eigh_tridiagonal(self.diag, self.off, eigvals_only=True,
                                         select='i', select_range=(n - 2, n - 1))
        return float(values[1]), float(values[0])


def discretize(field, grid, outer=DIRICHLET):
    """
    Assembles the weighted-symmetric tridiagonal matrix of 1/2 Laplacian + v.

    Keyword arguments:
    field -- the RateField
    grid  -- a Grid of the same dimension, extending beyond the support
    outer -- DIRICHLET (psi = 0 at the outer edge) or DECAY, the closure
             w'(R) = -(d - 2) w(R) / R of a harmonic tail (dim >= 3)
    """
    if grid.extent <= field.support_radius():
        raise GridTooSmallError(grid.extent, field.support_radius())
    if outer == DECAY and grid.dim < 3:
        raise ValueError("the decay closure needs dim >= 3")

    h = grid.spacing
    faces = grid.upper
    conductance = 0.5 * grid.face_areas(faces) / h

    rates = field.cell_average(grid.lower, grid.upper)
    stiffness = np.zeros(len(grid))

    # interior faces couple node i and i + 1
    stiffness[:-1] += conductance[:-1]
    stiffness[1:] += conductance[:-1]

    if grid.geometry == FULL_LINE:
        inner = DIRICHLET
        stiffness[0] += conductance[0]
    else:
        inner = NEUMANN

    if outer == DIRICHLET:
        stiffness[-1] += conductance[-1]
    else:
        # flux of the harmonic tail c r^(2-d) through the outer face
        d = grid.dim
        r_node, r_face = grid.coords[-1], faces[-1]
        stiffness[-1] += 0.5 * grid.face_areas(r_face) * (d - 2) * \
                         r_node ** (d - 2) / r_face ** (d - 1)

    w = grid.weights
    diag = rates - stiffness / w
    off = conductance[:-1] / np.sqrt(w[:-1] * w[1:])

    logging.debug("Assembled operator on {0} ({1} outer boundary)".format(
            grid, outer))
    return OperatorMatrix(grid, rates, diag, off, inner, outer)


class SpectralData:
    """
    The principal eigenpair (lambda0, psi) and what is derived from it.

    Keyword arguments:
    grid          -- the Grid psi lives on
    lambda0       -- principal eigenvalue
    psi           -- positive eigenvector, <psi, psi>_w = 1
    tail_slope    -- fitted slope of log(r^((d-1)/2) psi) in the tail window
    tail_constant -- C of the tail law psi ~ C r^((1-d)/2) exp(-sqrt(2 lambda0) r)
    gap           -- lambda0 minus the second Rayleigh-Ritz value
    max_rate      -- sup v of the field the data was computed for
    support       -- support radius of the field
    iterations    -- inverse iterations used
    residual      -- final ||A psi - lambda0 psi||_w
    """
    def __init__(self, grid, lambda0, psi, tail_slope, tail_constant, gap,
                 max_rate, support, iterations=0, residual=0.0):
        self.grid = grid
        self.lambda0 = float(lambda0)
        self.psi = psi
        self.tail_slope = float(tail_slope)
        self.tail_constant = float(tail_constant)
        self.gap = float(gap)
        self.max_rate = float(max_rate)
        self.support = float(support)
        self.iterations = iterations
        self.residual = float(residual)

        self.mass = psi_integral(self, None)

    @property
    def kappa(self):
        """
        Exponential decay rate of psi, sqrt(2 lambda0).
        """
        return math.sqrt(2.0 * self.lambda0)

    @property
    def front_speed(self):
        """
        b = sqrt(lambda0 / 2).
        """
        return math.sqrt(0.5 * self.lambda0)

    @property
    def tail_start(self):
        """
        Radius beyond which psi is represented by its tail law: the outer
        edge of the last cell inside TAIL_WINDOW_END * R.
        """
        radii = self.grid.radii
        last = np.flatnonzero(radii <= TAIL_WINDOW_END * self.grid.extent).max()
        return float(radii[last] + 0.5 * self.grid.spacing)

    def tail_law(self, r):
        r = np.asarray(r, dtype=float)
        d = self.grid.dim
        return self.tail_constant * r ** (0.5 * (1 - d)) * np.exp(-self.kappa * r)

    def psi_at(self, points):
        """
        psi at arbitrary points: linear interpolation on the grid, the tail
        law beyond tail_start. Accepts a (n, dim) stack, a single (dim,)
        point, or plain scalars in 1-D.
        """
        points = np.asarray(points, dtype=float)
        dim = self.grid.dim
        single = points.ndim == 0 or (points.ndim == 1 and dim > 1) or \
                 (points.ndim == 1 and points.size == 1)
        if dim == 1:
            x = points.reshape(-1)
            r = np.abs(x)
        else:
            r = np.linalg.norm(points.reshape(-1, dim), axis=1)
            x = r

        values = np.interp(x, self.grid.coords, self.psi)
        far = r > self.tail_start
        if np.any(far):
            values[far] = self.tail_law(r[far])
        return float(values[0]) if single else values

    def header(self):
        """
        The scalar summary exported next to the psi table.
        """
        return {
            'lambda0': self.lambda0,
            'mass': self.mass,
            'tail_slope': self.tail_slope,
            'tail_constant': self.tail_constant,
            'gap': self.gap,
            'front_speed': self.front_speed,
            'max_rate': self.max_rate,
            'support_radius': self.support,
            'iterations': self.iterations,
            'residual': self.residual,
            'grid': {'dim': self.grid.dim, 'extent': self.grid.extent,
                     'nodes': self.grid.nodes},
        }


def principal_eigenpair(matrix, grid=None, max_rate=None, support=None):
    """
    Computes (lambda0, psi) by inverse iteration seeded with a positive
    constant vector, the shift being replaced by the Rayleigh quotient once
    the iterate sits closer to the top Rayleigh-Ritz value than to the
    second one.

    Raises NoPositiveEigenvalueError when the top Rayleigh-Ritz value is
    below POSITIVITY_THRESHOLD * max_rate and NonConvergenceError when the
    residual does not drop below EIGEN_TOLERANCE.
    """
    grid = grid or matrix.grid
    if max_rate is None:
        max_rate = float(np.max(matrix.rates))
    if support is None:
        inside = np.flatnonzero(matrix.rates > 0)
        support = float(grid.upper[inside[-1]]) if inside.size else 0.0

    top, second = matrix.ritz_values
    threshold = POSITIVITY_THRESHOLD * max_rate
    if top < threshold or max_rate == 0:
        raise NoPositiveEigenvalueError(top, threshold)

    phi = matrix.to_symmetric(np.ones(len(grid)))
    phi /= np.linalg.norm(phi)
    # every eigenvalue lies below max_rate, so (sigma - S) starts positive
    sigma = max_rate * (1.0 + 1e-3) + 1e-12
    scale = max(1.0, top)
    residual = np.inf

    for iteration in range(1, EIGEN_MAX_ITERATIONS + 1):
        y = linalg.solve_banded((1, 1), matrix.banded(sigma), phi)
        phi = y / np.linalg.norm(y)
        s_phi = matrix.symmetric_apply(phi)
        mu = float(phi @ s_phi)
        residual = float(np.linalg.norm(s_phi - mu * phi))
        logging.debug("Inverse iteration {0}: mu={1:.15g} residual={2:.3g}"\
                      .format(iteration, mu, residual))

        if residual <= EIGEN_TOLERANCE * scale:
            break
        if abs(mu - top) < 0.25 * (top - second):
            sigma = mu + 1e-10 * scale
    else:
        raise NonConvergenceError(EIGEN_MAX_ITERATIONS, residual)

    if phi.sum() < 0:
        phi = -phi

    # One more step just above the spectrum: (sigma - S) is then a
    # positive definite M-matrix, so the polished iterate is positive at
    # every node, including the far tail where round-off lives.
    try:
        y = linalg.solveh_banded(matrix.banded_upper(mu + 1e-8 * scale),
                                 np.abs(phi))
    except linalg.LinAlgError:
        logging.debug("Skipping the positivity polish step")
    else:
        phi = y / np.linalg.norm(y)
        s_phi = matrix.symmetric_apply(phi)
        mu = float(phi @ s_phi)
        residual = float(np.linalg.norm(s_phi - mu * phi))

    psi = matrix.from_symmetric(phi)
    if np.any(psi <= 0):
        # a sign change means the iteration settled on the wrong eigenpair
        raise NonConvergenceError(iteration, residual)

    if psi[-1] > EDGE_TOLERANCE * psi.max():
        logging.warning("psi at the outer node is {0:.3g} of its maximum; "
                        "consider a larger grid extent".format(
                        psi[-1] / psi.max()))

    slope, constant = _fit_tail(grid, psi, mu, support)
    logging.info("lambda0={0:.12g} gap={1:.6g} tail_slope={2:.6g} "
                 "({3} iterations)".format(mu, mu - second, slope, iteration))

    return SpectralData(grid, mu, psi, slope, constant, mu - second, max_rate,
                        support, iteration, residual)


def _fit_tail(grid, psi, lambda0, support):
    """
    Least-squares fit of log(r^((d-1)/2) psi) on the window
    [a + 2 / sqrt(2 lambda0), 0.8 R]. Returns the free slope and the
    constant C of the tail law with the slope pinned to -sqrt(2 lambda0).
    """
    kappa = math.sqrt(2.0 * lambda0)
    r = grid.coords
    lo = support + 2.0 / kappa
    hi = TAIL_WINDOW_END * grid.extent
    window = (r >= lo) & (r <= hi)
    if window.sum() < 3:
        logging.warning("tail window [{0:.3g}, {1:.3g}] holds too few nodes; "
                        "fitting beyond the support instead".format(lo, hi))
        window = (r > support) & (r <= hi)
    if window.sum() < 3:
        window = r >= 0

    y = np.log(psi[window] * r[window] ** (0.5 * (grid.dim - 1)))
    slope = np.polyfit(r[window], y, 1)[0]
    constant = math.exp(float(np.mean(y + kappa * r[window])))
    return float(slope), constant


def extrapolated_eigenvalue(field, spectral):
    """
    One Richardson step on lambda0: the eigenvalue is solved again on the
    grid with twice the nodes and the two are combined as
    (4 lambda(h/2) - lambda(h)) / 3, cancelling the h^2 term of the
    three-point stencil. Nodes of the coarse grid stay nodes of the fine
    one, so a well edge on a node stays on a node.
    """
    coarse = spectral.grid
    fine = Grid(coarse.dim, coarse.extent, 2 * coarse.nodes)
    refined = principal_eigenpair(discretize(field, fine), fine,
                                  spectral.max_rate, spectral.support)
    value = (4.0 * refined.lambda0 - spectral.lambda0) / 3.0
    logging.info("lambda0(h)={0:.12g} lambda0(h/2)={1:.12g} "
                 "extrapolated={2:.12g}".format(spectral.lambda0,
                                                refined.lambda0, value))
    return value


def resolvent_apply(matrix, mu, g, lambda0=None):
    """
    Returns u solving (mu - A) u = g, the integral of exp(-mu s) P_s g over
    s >= 0. mu must exceed the principal eigenvalue.
    """
    if lambda0 is None:
        lambda0 = matrix.ritz_values[0]
    if mu <= lambda0 + 1e-9 * max(1.0, abs(lambda0)):
        raise ShiftInsideSpectrumError(mu, lambda0)

    # (mu - S) is symmetric positive definite here; Cholesky keeps the
    # M-matrix sign structure, so g >= 0 gives u >= 0
    y = linalg.solveh_banded(matrix.banded_upper(mu), matrix.to_symmetric(g))
    return matrix.from_symmetric(y)


def evolve_density(matrix, g0, t, dt):
    """
    Solves d(rho)/dt = (1/2 Laplacian + v) rho from rho(0) = g0 up to time t
    with the implicit trapezoidal rule (Crank-Nicolson). The step is
    shortened so that a whole number of steps lands on t.
    """
    if t < 0 or dt <= 0:
        raise ValueError("need t >= 0 and dt > 0")

    steps = int(math.ceil(t / dt - 1e-9))
    phi = matrix.to_symmetric(np.asarray(g0, dtype=float))
    if steps == 0:
        return matrix.from_symmetric(phi)

    step = t / steps
    implicit = matrix.banded(1.0, 0.5 * step)
    for _ in range(steps):
        rhs = phi + 0.5 * step * matrix.symmetric_apply(phi)
        phi = linalg.solve_banded((1, 1), implicit, rhs)
    return matrix.from_symmetric(phi)


def psi_integral(spectral, region):
    """
    Integral of psi over a region (None meaning the whole space): grid
    cells inside the tail window, the tail law beyond it.
    """
    grid = spectral.grid
    cut = spectral.tail_start
    cells = grid.radii <= cut

    if grid.dim == 1:
        lo, hi = (-np.inf, np.inf) if region is None else region.interval_bounds()
        overlap = np.clip(np.minimum(hi, grid.upper) - np.maximum(lo, grid.lower),
                          0.0, None)
        inside = float(np.sum(spectral.psi[cells] * overlap[cells]))
        return inside + _line_tail(spectral, lo, hi, cut)

    if region is None or region.is_everything:
        inside = float(np.sum(spectral.psi[cells] * grid.weights[cells]))
        return inside + _radial_tail(spectral, None, cut)

    r_min, r_max = _radial_extent(region)
    cells &= (grid.upper >= r_min) & (grid.lower <= r_max)
    lower, upper = grid.lower[cells], grid.upper[cells]
    half = 0.5 * (upper - lower)
    points = 0.5 * (upper + lower)[:, None] + half[:, None] * _GAUSS_NODES[None, :]
    measure = sphere_area(grid.dim) * points ** (grid.dim - 1) * \
              region.sphere_fraction(points)
    volumes = half * (measure @ _GAUSS_WEIGHTS)
    inside = float(np.sum(spectral.psi[cells] * volumes))
    return inside + _radial_tail(spectral, region, cut)


def mass_and_alpha(spectral, region):
    """
    alpha(U) = int_U psi / int psi, the asymptotic fraction of particles in U.
    """
    if region is not None and region.is_everything:
        return 1.0
    alpha = psi_integral(spectral, region) / spectral.mass
    return float(min(max(alpha, 0.0), 1.0))


def _line_tail(spectral, lo, hi, cut):
    """
    Tail-law mass of [lo, hi] beyond +-cut.
    """
    kappa, c = spectral.kappa, spectral.tail_constant

    def segment(a, b):
        # C exp(-kappa r) integrated over r in [a, b], cut <= a
        if b <= a:
            return 0.0
        upper = 0.0 if b == np.inf else math.exp(-kappa * b)
        return c / kappa * (math.exp(-kappa * a) - upper)

    return segment(max(lo, cut), hi) + segment(max(-hi, cut), -lo)


def _radial_tail(spectral, region, cut):
    dim = spectral.grid.dim
    area = sphere_area(dim)
    if region is None:
        r_min, r_max = cut, np.inf
        fraction = None
    else:
        r_min, r_max = _radial_extent(region)
        r_min = max(r_min, cut)
        fraction = region.sphere_fraction
    if r_max <= r_min:
        return 0.0

    def density(r):
        value = area * r ** (dim - 1) * float(spectral.tail_law(r))
        return value if fraction is None else value * float(fraction(np.array(r)))

    value, _ = integrate.quad(density, r_min, r_max, limit=200)
    return float(value)


def _radial_extent(region):
    """
    The range of |y| over the region.
    """
    if region.shape == 'ball':
        distance = float(np.linalg.norm(region.center))
        return max(0.0, distance - region.size[0]), distance + region.size[0]
    nearest = np.clip(0.0, np.asarray(region.center), np.asarray(region.size))
    return float(np.linalg.norm(nearest)), region.max_radius()


def transcendental_well_eigenvalue(amplitude, radius):
    """
    Principal eigenvalue of 1/2 d^2/dx^2 + beta 1{|x| <= a} on the line:
    the root of k tan(k a) = sqrt(2 lambda) with k = sqrt(2 (beta - lambda)),
    found by bisection on the branch k a < pi / 2.
    """
    beta, a = float(amplitude), float(radius)

    def mismatch(lam):
        k = math.sqrt(2.0 * (beta - lam))
        return k * math.tan(k * a) - math.sqrt(2.0 * lam)

    lower = max(0.0, beta - (math.pi / (2.0 * a)) ** 2 / 2.0)
    span = beta - lower
    return optimize.bisect(mismatch, lower + 1e-13 * span, beta - 1e-13 * span,
                           xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=400)
