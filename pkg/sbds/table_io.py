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
Reading and writing of the result tables.

CSV cells are written with 17 significant digits; JSON floats use Python's
shortest repr, which also reads back to the same double. Nothing written
carries a timestamp, so equal inputs give byte-identical files.
"""

import os
import json
import hashlib
import logging

import numpy as np

from . import __version__
from .errors import TableIOError
from .mc_engine import EnsembleStats
from .spectral import Grid, SpectralData


CSV_FORMAT = '%.17g'

SPECTRAL_TABLE = 'spectral.csv'
SPECTRAL_HEADER = 'spectral.json'
MOMENT_TABLE = 'moments.csv'
ENSEMBLE_HEADER = 'ensemble.json'
REPORTS = 'reports.json'
REPORT_TABLE = 'reports.txt'
EXTINCTION_VERDICT = 'extinction.json'
MANIFEST = 'manifest.json'

# per-replica observables, one file each
_TRAJECTORIES = ('counts', 'radius', 'martingale', 'probes')


def _plain(value):
    """
    Converts numpy values to JSON-ready ones; NaN becomes null.
    """
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        return None if np.isnan(value) else float(value)
    return value


def _unplain(values):
    return np.array([np.nan if v is None else v for v in values], dtype=float)


def write_json(path, document):
    with open(path, 'w') as f:
        json.dump(_plain(document), f, indent=2, sort_keys=True)
        f.write('\n')
    logging.debug("Wrote {0}".format(path))
    return path


def read_json(path):
    try:
        with open(path) as f:
            return json.load(f)
    except OSError as e:
        raise TableIOError("cannot read {0}: {1}".format(path, e))
    except ValueError as e:
        raise TableIOError("malformed JSON in {0}: {1}".format(path, e))


def write_csv(path, names, columns):
    """
    Writes equally long columns under a header line of names.
    """
    table = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    np.savetxt(path, table, fmt=CSV_FORMAT, delimiter=',',
               header=','.join(names), comments='')
    logging.debug("Wrote {0}".format(path))
    return path


def read_csv(path):
    """
    Returns (names, table) of a file written by write_csv.
    """
    try:
        with open(path) as f:
            names = f.readline().strip().split(',')
        table = np.loadtxt(path, delimiter=',', skiprows=1, ndmin=2)
    except OSError as e:
        raise TableIOError("cannot read {0}: {1}".format(path, e))
    except ValueError as e:
        raise TableIOError("malformed table {0}: {1}".format(path, e))
    if table.shape[1] != len(names):
        raise TableIOError("{0}: {1} names for {2} columns".format(
                path, len(names), table.shape[1]))
    return names, table


def sha256_file(path):
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for block in iter(lambda: f.read(1 << 16), b''):
            digest.update(block)
    return digest.hexdigest()


# spectral data

def export_spectral(spectral, directory, fmt='csv'):
    """
    Writes psi on the grid and the scalar header. Returns the paths.
    """
    os.makedirs(directory, exist_ok=True)
    header = spectral.header()
    header_path = os.path.join(directory, SPECTRAL_HEADER)
    if fmt == 'json':
        header['coords'] = spectral.grid.coords
        header['psi'] = spectral.psi
        return [write_json(header_path, header)]

    table = write_csv(os.path.join(directory, SPECTRAL_TABLE), ['coord', 'psi'],
                      [spectral.grid.coords, spectral.psi])
    return [write_json(header_path, header), table]


def load_spectral(directory):
    """
    Rebuilds SpectralData from export_spectral's files.
    """
    header = read_json(os.path.join(directory, SPECTRAL_HEADER))
    try:
        grid = Grid(header['grid']['dim'], header['grid']['extent'],
                    header['grid']['nodes'])
        if 'psi' in header:
            psi = np.asarray(header['psi'], dtype=float)
        else:
            _, table = read_csv(os.path.join(directory, SPECTRAL_TABLE))
            psi = table[:, 1]
        if psi.size != len(grid):
            raise TableIOError("psi has {0} values for {1} nodes".format(
                    psi.size, len(grid)))
        return SpectralData(grid, header['lambda0'], psi, header['tail_slope'],
                            header['tail_constant'], header['gap'],
                            header['max_rate'], header['support_radius'],
                            header['iterations'], header['residual'])
    except (KeyError, TypeError, ValueError) as e:
        raise TableIOError("malformed spectral header: {0}".format(e))


def export_moments(table, directory):
    os.makedirs(directory, exist_ok=True)
    names = ['coord'] + ['f{0}'.format(n) for n in range(1, table.nmax + 1)]
    return write_csv(os.path.join(directory, MOMENT_TABLE), names,
                     [table.grid.coords] + list(table.profiles))


def export_extinction(table, directory):
    os.makedirs(directory, exist_ok=True)
    names = ['radius'] + ['M{0}'.format(n) for n in range(1, table.nmax + 1)]
    path = os.path.join(directory, 'extinction_{0}.csv'.format(table.variant))
    return write_csv(path, names, [table.grid.coords] + list(table.profiles))


# ensembles

def _trajectory_files(stats):
    files = {name: getattr(stats, name) for name in _TRAJECTORIES
             if getattr(stats, name) is not None}
    for name, values in stats.regions.items():
        files['region_' + name] = values
    for name, values in stats.windows.items():
        files['window_' + name] = values
    return files


def export_ensemble(stats, directory, fmt='csv'):
    """
    Writes the ensemble: one table per observable with a row per
    observation time and a column per replica, plus a JSON header with
    the classification and the run parameters. Returns the paths.
    """
    os.makedirs(directory, exist_ok=True)
    header = {
        'times': stats.times,
        'horizons': stats.horizons,
        'classes': stats.classes,
        'terminal': stats.terminal,
        'exploded': stats.exploded,
        'seed': stats.seed,
        'streams': stats.streams,
        'x0': stats.x0,
        'lambda0': stats.lambda0,
        'cap': stats.cap,
        'probe_speed': stats.probe_speed,
        'regions': sorted(stats.regions),
        'windows': sorted(stats.windows),
        'velocities': stats.velocities,
        'replicas': stats.replicas,
    }

    paths = []
    names = ['time'] + ['r{0}'.format(i) for i in range(stats.replicas)]
    for name, values in sorted(_trajectory_files(stats).items()):
        if fmt == 'json':
            header.setdefault('trajectories', {})[name] = values
        else:
            paths.append(write_csv(os.path.join(directory, name + '.csv'), names,
                                   [stats.times] + list(values)))

    paths.insert(0, write_json(os.path.join(directory, ENSEMBLE_HEADER), header))
    logging.info("Ensemble of {0} replicas written to {1}".format(
            stats.replicas, directory))
    return paths


def load_ensemble(directory):
    """
    Rebuilds EnsembleStats from export_ensemble's files.
    """
    header = read_json(os.path.join(directory, ENSEMBLE_HEADER))

    def trajectory(name):
        if 'trajectories' in header:
            rows = header['trajectories'].get(name)
            if rows is None:
                return None
            return np.array([_unplain(row) for row in rows])
        path = os.path.join(directory, name + '.csv')
        if not os.path.exists(path):
            return None
        _, table = read_csv(path)
        return table[:, 1:].T.copy()

    try:
        counts = trajectory('counts')
        if counts is None:
            raise TableIOError("no counts in {0}".format(directory))
        return EnsembleStats(
                times=_unplain(header['times']),
                counts=counts,
                regions={name: trajectory('region_' + name)
                         for name in header['regions']},
                windows={name: trajectory('window_' + name)
                         for name in header['windows']},
                velocities={name: np.asarray(v, dtype=float)
                            for name, v in header['velocities'].items()},
                radius=trajectory('radius'),
                martingale=trajectory('martingale'),
                probes=trajectory('probes'),
                horizons=header['horizons'],
                classes=np.array(header['classes']),
                terminal=np.array([_unplain(row) for row in header['terminal']]),
                exploded=np.array(header['exploded'], dtype=bool),
                seed=header['seed'],
                x0=header['x0'],
                lambda0=header['lambda0'],
                cap=header['cap'],
                probe_speed=header['probe_speed'])
    except (KeyError, TypeError, ValueError) as e:
        raise TableIOError("malformed ensemble header: {0}".format(e))


# reports and manifests

def export_reports(reports, directory):
    """
    Writes the reports as a JSON array and a text table, plus a
    time/mean/stderr/prediction CSV for every report carrying a series.
    """
    from .analysis import render_table

    os.makedirs(directory, exist_ok=True)
    paths = [write_json(os.path.join(directory, REPORTS),
                        [r.to_dict() for r in reports])]

    table_path = os.path.join(directory, REPORT_TABLE)
    with open(table_path, 'w') as f:
        f.write(render_table(reports))
    paths.append(table_path)

    for i, report in enumerate(reports):
        if report.series is not None:
            path = os.path.join(directory, 'series_{0:02d}_{1}.csv'.format(
                    i, report.check))
            paths.append(write_csv(path, ['time', 'mean', 'stderr', 'prediction'],
                                   report.series))
    return paths


def write_manifest(directory, config_hash, seed, paths, extra=None):
    """
    Writes the manifest: configuration hash, seed and the SHA-256 of
    every output file.
    """
    document = {
        'version': __version__,
        'config_hash': config_hash,
        'seed': seed,
        'files': {os.path.relpath(p, directory): sha256_file(p)
                  for p in sorted(set(paths))},
    }
    document.update(extra or {})
    path = write_json(os.path.join(directory, MANIFEST), document)
    logging.info("Manifest written to {0}".format(path))
    return path


def read_manifest(directory):
    return read_json(os.path.join(directory, MANIFEST))
