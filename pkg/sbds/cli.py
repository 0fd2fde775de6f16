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

import os
import logging
import argparse

import numpy as np

from . import analysis, config, table_io
from .errors import BranchingError, ParseConfigError
from .extinction import (FEYNMAN_KAC, VARIANTS, compare_variants,
                         feynman_kac_check, solve_M)
from .mc_engine import replica_stream, run_ensemble
from .moments import check_velocity, compute_f
from .rate_field import SQUARE_WELL
from .spectral import (discretize, extrapolated_eigenvalue,
                       principal_eigenpair, transcendental_well_eigenvalue)


COMMANDS = ('spectrum', 'simulate', 'verify', 'extinction', 'all')


def build_parser():
    parser = argparse.ArgumentParser(
            prog='sbds', description='Super-critical branching diffusion simulator')
    parser.add_argument('command', choices=COMMANDS)
    parser.add_argument('--config', required=True, metavar='PATH',
                        help='JSON run configuration')
    parser.add_argument('--out', metavar='DIR',
                        help='output directory (overrides the configuration)')
    parser.add_argument('--seed', type=int, help='seed of the replica streams')
    parser.add_argument('--threads', type=int, default=config.threads,
                        help='size of the worker pool')
    parser.add_argument('--format', choices=('csv', 'json'),
                        help='table format (overrides the configuration)')
    parser.add_argument('-v', '--verbose', action='store_true',
                        help='log debugging output')
    parser.add_argument('-q', '--quiet', action='store_true',
                        help='log warnings and errors only')
    return parser


class Run:
    """
    One invocation: the resolved configuration, the output directory and
    the files written so far.
    """
    def __init__(self, cfg, out, fmt, threads):
        self.cfg = cfg
        self.out = out
        self.fmt = fmt
        self.threads = max(1, threads)
        self.paths = []
        self._spectral = None
        self.ensemble = None

    def matches_previous(self, filename):
        """
        True if the output directory holds `filename` from a run of the
        same configuration.
        """
        try:
            manifest = table_io.read_manifest(self.out)
        except BranchingError:
            return False
        return manifest.get('config_hash') == self.cfg.hash and \
               filename in manifest.get('files', {})

    def spectral(self):
        """
        The spectral solve; None when the field is identically 0.
        """
        if self._spectral is None and self.cfg.field.max_rate() > 0:
            if self.matches_previous(table_io.SPECTRAL_HEADER):
                logging.info("Reusing the spectral solve in {0}".format(self.out))
                self._spectral = table_io.load_spectral(self.out)
            else:
                self._spectral = solve_spectrum(self.cfg)
        return self._spectral

    def stats(self):
        if self.ensemble is None:
            if self.matches_previous(table_io.ENSEMBLE_HEADER):
                logging.info("Reusing the ensemble in {0}".format(self.out))
                self.ensemble = table_io.load_ensemble(self.out)
            else:
                cmd_simulate(self)
        return self.ensemble

    def write_manifest(self):
        """
        Records every file of this configuration, old and new.
        """
        paths = list(self.paths)
        try:
            manifest = table_io.read_manifest(self.out)
        except BranchingError:
            manifest = {}
        if manifest.get('config_hash') == self.cfg.hash:
            for name in manifest.get('files', {}):
                path = os.path.join(self.out, name)
                if os.path.exists(path):
                    paths.append(path)

        extra = {}
        if self.ensemble is not None:
            extra['cap_hits'] = self.ensemble.cap_hits
            extra['replicas'] = self.ensemble.replicas
        return table_io.write_manifest(self.out, self.cfg.hash, self.cfg.mc.seed,
                                       paths, extra)


def solve_spectrum(cfg):
    grid = cfg.make_grid()
    matrix = discretize(cfg.field, grid)
    return principal_eigenpair(matrix, grid, cfg.field.max_rate(),
                               cfg.field.support_radius())


def cmd_spectrum(run):
    """
    Solves for (lambda0, psi) and the moment profiles and writes them.
    """
    spectral = run.spectral()
    if spectral is None:
        # raises NoPositiveEigenvalueError
        solve_spectrum(run.cfg)

    run.paths += table_io.export_spectral(spectral, run.out, run.fmt)
    table = compute_f(spectral, run.cfg.field, run.cfg.analysis['nmax'])
    run.paths.append(table_io.export_moments(table, run.out))
    logging.info("lambda0={0:.12g}, int psi={1:.12g}, b={2:.12g}".format(
            spectral.lambda0, spectral.mass, spectral.front_speed))
    return config.EXIT_NORMAL


def resolved_windows(cfg, spectral):
    """
    The configured windows as (region, velocity), each velocity checked
    against the front speed.
    """
    speed = spectral.front_speed if spectral is not None else 0.0
    windows = {}
    for name, window in cfg.windows.items():
        velocity = window.resolve(speed)
        if spectral is not None:
            check_velocity(spectral, velocity)
        windows[name] = (window.region, velocity)
    return windows


def cmd_simulate(run):
    """
    Runs the ensemble and writes its tables.
    """
    cfg = run.cfg
    spectral = run.spectral()
    probe_speed = None
    if spectral is not None:
        probe_speed = (1.0 - cfg.analysis['front_delta']) * spectral.front_speed

    stats = run_ensemble(cfg.field, cfg.mc, cfg.regions,
                         resolved_windows(cfg, spectral), spectral, probe_speed,
                         run.threads)
    run.ensemble = stats
    run.paths += table_io.export_ensemble(stats, run.out, run.fmt)
    return config.EXIT_NORMAL


def collect_reports(run):
    """
    Runs every check that applies to the configuration.
    """
    cfg = run.cfg
    spectral = run.spectral()
    stats = run.stats()
    z = cfg.analysis['z']
    tolerance = cfg.analysis['tolerance']
    reports = []

    field = cfg.field
    if spectral is not None and field.dim == 1 and field.kind == SQUARE_WELL:
        exact = transcendental_well_eigenvalue(field.amplitude, field.radius)
        estimate = extrapolated_eigenvalue(field, spectral)
        slack = config.well_eigenvalue_tolerance
        reports.append(analysis.TheoremReport(
                'well_eigenvalue_check', 'lambda0', exact, estimate,
                np.finfo(float).eps, analysis.gate(estimate, exact, 0.0, z, slack),
                0, 0.0, {'grid_lambda0': spectral.lambda0, 'tolerance': slack}))

    reports.append(analysis.growth_rate_fit(stats, spectral, z, tolerance))
    reports.append(analysis.martingale_check(stats, z, tolerance))

    if spectral is not None:
        table = compute_f(spectral, field, cfg.analysis['nmax'])
        for n in cfg.analysis['moments']:
            reports.append(analysis.limit_moment_check(stats, table, spectral, n,
                                                       z, tolerance))
        reports.append(analysis.variance_stability_check(stats, spectral))
        reports.append(analysis.almost_sure_check(stats, spectral, z))
        for name, region in sorted(cfg.regions.items()):
            reports.append(analysis.domain_fraction_check(stats, spectral, name,
                                                          region, z, tolerance))
            reports.append(analysis.mean_count_check(stats, spectral, name,
                                                     region, z, tolerance))
        for name, window in sorted(cfg.windows.items()):
            reports.append(analysis.moving_window_check(
                    stats, spectral, name, window.region, stats.velocities[name],
                    z, tolerance))
    else:
        reports.append(analysis.limit_moment_check(stats, None, None, 1))

    reports.append(analysis.front_speed_check(stats, spectral,
                                              cfg.analysis['front_delta'],
                                              cfg.analysis['front_confidence'], z))

    extinction = None
    if field.dim >= 3:
        extinction = solve_M(field, cfg.make_grid(), 1, FEYNMAN_KAC)
    reports.append(analysis.dichotomy_check(stats, extinction, z))
    return reports


def cmd_verify(run):
    """
    Writes the reports; exit code 1 if a gated check failed.
    """
    reports = collect_reports(run)
    run.paths += table_io.export_reports(reports, run.out)
    for report in reports:
        log = logging.info if report.passed or not report.gated else logging.warning
        log(str(report))

    if any(r.gated and not r.passed for r in reports):
        logging.warning("Some checks failed")
        return config.EXIT_CHECK_FAILED
    return config.EXIT_NORMAL


def cmd_extinction(run):
    """
    Solves both variants of the M^n system and compares them with the
    ensemble's finite replicas.
    """
    cfg = run.cfg
    nmax = cfg.analysis['nmax']
    tables = [solve_M(cfg.field, cfg.make_grid(), nmax, variant)
              for variant in VARIANTS]
    for table in tables:
        run.paths.append(table_io.export_extinction(table, run.out))

    stats = run.stats()
    z = cfg.analysis['z']
    verdicts = [compare_variants(tables, stats, n, z, cfg.analysis['tolerance'])[1]
                for n in range(1, nmax + 1)]

    # a stream no replica draws from
    rng = replica_stream(cfg.mc.seed, cfg.mc.replicas)
    forced = tables[VARIANTS.index(FEYNMAN_KAC)]
    single = feynman_kac_check(forced, cfg.field, cfg.mc.x0, cfg.mc.t_end,
                               cfg.mc.replicas, rng, z)
    document = {'moments': verdicts, 'feynman_kac_check': single.to_dict()}
    run.paths.append(table_io.write_json(
            os.path.join(run.out, table_io.EXTINCTION_VERDICT), document))
    return config.EXIT_NORMAL


def cmd_all(run):
    code = cmd_spectrum(run)
    cmd_simulate(run)
    code = max(code, cmd_verify(run))
    if run.cfg.dim >= 3:
        code = max(code, cmd_extinction(run))
    return code


DISPATCH = {
    'spectrum': cmd_spectrum,
    'simulate': cmd_simulate,
    'verify': cmd_verify,
    'extinction': cmd_extinction,
    'all': cmd_all,
}


def main(argv=None):
    args = build_parser().parse_args(argv)

    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    elif args.quiet:
        logging.getLogger().setLevel(logging.WARNING)

    try:
        cfg = config.load(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
    except ParseConfigError as e:
        logging.error("Configuration error: " + str(e))
        logging.info("Aborting")
        return config.EXIT_CONF_ERROR

    out = args.out or cfg.output['directory']
    fmt = args.format or cfg.output['format']
    os.makedirs(out, exist_ok=True)
    run = Run(cfg, out, fmt, args.threads)

    try:
        code = DISPATCH[args.command](run)
    except BranchingError as e:
        logging.error("Error: " + str(e))
        logging.info("Aborting")
        return config.EXIT_CONF_ERROR

    run.write_manifest()
    return code
