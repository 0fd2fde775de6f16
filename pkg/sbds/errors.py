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


class BranchingError(Exception):
    """
    Base exception class.
    All other exceptions should inherit from this class.
    """
    pass


class DimensionMismatchError(BranchingError):
    """
    A point or a region does not live in the dimension of the field.
    """
    def __init__(self, expected, got):
        self.expected = expected
        self.got = got

    def __str__(self):
        return "dimension mismatch: expected {0}, got {1}".format(
                self.expected, self.got)


class InvalidFieldError(BranchingError):
    """
    A rate field was declared with inadmissible parameters.
    """
    pass


class RegionError(BranchingError):
    """
    A region was declared with inadmissible parameters.
    """
    pass


class GridTooSmallError(BranchingError):
    """
    The support of the rate field does not fit strictly inside the grid.
    """
    def __init__(self, extent, support):
        self.extent = extent
        self.support = support

    def __str__(self):
        return "grid extent {0} does not exceed support radius {1}".format(
                self.extent, self.support)


class NoPositiveEigenvalueError(BranchingError):
    """
    The operator has no positive eigenvalue: the process is not
    super-critical.
    """
    def __init__(self, top_value, threshold):
        self.top_value = top_value
        self.threshold = threshold

    def __str__(self):
        return ("NoPositiveEigenvalue: top Rayleigh-Ritz value {0:.6g} "
                "is below {1:.6g}").format(self.top_value, self.threshold)


class NonConvergenceError(BranchingError):
    """
    An iterative solver ran out of iterations.
    """
    def __init__(self, iterations, residual):
        self.iterations = iterations
        self.residual = residual

    def __str__(self):
        return "no convergence after {0} iterations (residual {1:.3g})".format(
                self.iterations, self.residual)


class ShiftInsideSpectrumError(BranchingError):
    """
    A resolvent was requested at a shift that does not lie above the
    principal eigenvalue.
    """
    def __init__(self, mu, lambda0):
        self.mu = mu
        self.lambda0 = lambda0

    def __str__(self):
        return "shift {0:.6g} does not exceed the principal eigenvalue {1:.6g}"\
               .format(self.mu, self.lambda0)


class VelocityTooFastError(BranchingError):
    """
    A window moves at least as fast as the front, b = sqrt(lambda0 / 2).
    """
    def __init__(self, speed, front_speed):
        self.speed = speed
        self.front_speed = front_speed

    def __str__(self):
        return "VelocityTooFast: |v| = {0:.6g} is not below b = {1:.6g}".format(
                self.speed, self.front_speed)


class DimensionTooLowError(BranchingError):
    """
    The number of particles has a finite limit with positive probability
    only in dimension 3 and above.
    """
    def __init__(self, dim):
        self.dim = dim

    def __str__(self):
        return "DimensionTooLow: extinction tables need dim >= 3, got {0}"\
               .format(self.dim)


class MomentOrderError(BranchingError):
    """
    A moment of an order that was not tabulated was requested.
    """
    def __init__(self, n, nmax):
        self.n = n
        self.nmax = nmax

    def __str__(self):
        return "moment order {0} outside 1..{1}".format(self.n, self.nmax)


class TableIOError(BranchingError):
    """
    Failed to read back an exported table.
    """
    pass


class ParseConfigError(Exception):
    """
    Failed to parse the configuration file.
    """
    pass
