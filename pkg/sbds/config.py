import json
import copy
import hashlib
import logging

import numpy as np

from .errors import BranchingError, ParseConfigError


# Grid: half-width (1-D) or outer radius, and number of cells across it.
grid_extent = 20.0
grid_nodes = 4000

# Monte Carlo ensemble.
replicas = 1000
t_end = 20.0
obs_interval = 1.0
# A replica stops and is flagged exploded once it holds more particles.
cap = 10 ** 6
seed = 2015
# Bound on the probability that a particle classified "finite" ever returns
# to the support (dim >= 3).
return_bound = 1e-3

# Analysis.
nmax = 4
z = 3.0
tolerance = 0.0
# Half-width of the front band, as a fraction of b.
front_delta = 0.15
front_confidence = 0.95
# lambda0 of the 1-D square well against its transcendental root.
well_eigenvalue_tolerance = 1e-6

threads = 1
output_dir = 'sbds-out'
output_format = 'csv'


# exit codes

EXIT_NORMAL = 0
EXIT_CHECK_FAILED = 1
EXIT_CONF_ERROR = 2


class McSpec:
    """
    Keyword arguments:
    replicas     -- number of independent replicas
    t_end        -- horizon
    obs_interval -- spacing of the observation times
    cap          -- particle cap per replica
    seed         -- 64-bit seed of the replica streams
    x0           -- start point
    return_bound -- misclassification bound of the "finite" class
    horizons     -- times at which replicas are classified
    """
    def __init__(self, replicas, t_end, obs_interval, cap, seed, x0,
                 return_bound, horizons):
        self.replicas = replicas
        self.t_end = t_end
        self.obs_interval = obs_interval
        self.cap = cap
        self.seed = seed
        self.x0 = x0
        self.return_bound = return_bound
        self.horizons = horizons

    @property
    def obs_times(self):
        """
        Multiples of obs_interval up to t_end, plus t_end and every
        classification horizon.
        """
        steps = int(np.floor(self.t_end / self.obs_interval + 1e-9))
        times = set(round(k * self.obs_interval, 12) for k in range(1, steps + 1))
        times.update(round(t, 12) for t in self.horizons)
        # t_end itself closes the list; anything within 1e-9 of it merges
        inside = sorted(t for t in times if 0 < t < self.t_end - 1e-9)
        return np.array(inside + [self.t_end])


class WindowSpec:
    """
    A region moving at a constant velocity. The velocity is either given
    outright or as a fraction of the front speed b along a direction, in
    which case it is resolved once lambda0 is known.
    """
    def __init__(self, region, velocity=None, front_fraction=None,
                 direction=None):
        self.region = region
        self.velocity = velocity
        self.front_fraction = front_fraction
        self.direction = direction

    def resolve(self, front_speed):
        if self.velocity is not None:
            return np.asarray(self.velocity, dtype=float)
        unit = np.asarray(self.direction, dtype=float)
        unit = unit / np.linalg.norm(unit)
        return self.front_fraction * front_speed * unit


class RunConfig:
    """
    A fully resolved run configuration. `document` holds the resolved JSON
    document (defaults filled in); `hash` is its SHA-256.
    """
    def __init__(self, document, field, grid_extent, grid_nodes, mc, regions,
                 windows, analysis, output):
        self.document = document
        self.field = field
        self.grid_extent = grid_extent
        self.grid_nodes = grid_nodes
        self.mc = mc
        self.regions = regions
        self.windows = windows
        self.analysis = analysis
        self.output = output
        self.hash = config_hash(document)

    @property
    def dim(self):
        return self.field.dim

    def make_grid(self):
        from .spectral import Grid
        return Grid(self.dim, self.grid_extent, self.grid_nodes)

    def with_seed(self, new_seed):
        """
        Returns the configuration with its seed overridden.
        """
        document = copy.deepcopy(self.document)
        document['mc']['seed'] = int(new_seed)
        return from_document(document)


def config_hash(document):
    canonical = json.dumps(document, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode()).hexdigest()


def load(path):
    """
    Reads and resolves a JSON run configuration.
    """
    try:
        with open(path) as f:
            document = json.load(f)
    except OSError as e:
        raise ParseConfigError("Cannot read {0}: {1}".format(path, e))
    except ValueError as e:
        raise ParseConfigError("Malformed JSON in {0}: {1}".format(path, e))

    logging.info("Loaded configuration from {0}".format(path))
    return from_document(document)


def from_document(document):
    if not isinstance(document, dict):
        raise ParseConfigError("The configuration must be a JSON object")

    resolved = {}
    field = _parse_field(document, resolved)
    dim = field.dim

    grid = document.get('grid', {})
    try:
        extent = float(grid.get('extent', grid_extent))
        nodes = int(grid.get('nodes', grid_nodes))
    except (TypeError, ValueError):
        raise ParseConfigError("Failed to parse grid values")
    if extent <= 0 or nodes < 4:
        raise ParseConfigError("The grid needs a positive extent and >= 4 nodes")
    resolved['grid'] = {'extent': extent, 'nodes': nodes}

    mc = _parse_mc(document.get('mc', {}), dim, resolved)
    regions = _parse_regions(document.get('regions', {}), dim, resolved)
    windows = _parse_windows(document.get('windows', {}), dim, resolved)
    analysis = _parse_analysis(document.get('analysis', {}), resolved)

    output = document.get('output', {})
    resolved['output'] = {
        'directory': str(output.get('directory', output_dir)),
        'format': str(output.get('format', output_format)),
    }
    if resolved['output']['format'] not in ('csv', 'json'):
        raise ParseConfigError("Failed to parse output format")

    return RunConfig(resolved, field, extent, nodes, mc, regions, windows,
                     analysis, resolved['output'])


def _parse_field(document, resolved):
    from .rate_field import RateField, TABULATED_RADIAL

    try:
        spec = document['field']
    except KeyError:
        raise ParseConfigError("The configuration declares no field")

    try:
        dim = int(spec.get('dim', 1))
        kind = spec['kind']
        if kind == TABULATED_RADIAL and 'csv' in spec:
            field = RateField.from_csv(spec['csv'], dim)
        elif kind == TABULATED_RADIAL:
            field = RateField.tabulated(dim, spec['nodes'], spec['values'])
        else:
            field = RateField(dim, kind, float(spec.get('amplitude', 0.0)),
                              float(spec.get('radius', 0.0)))
    except KeyError as e:
        raise ParseConfigError("Missing field value: {0}".format(e))
    except (TypeError, ValueError, BranchingError) as e:
        raise ParseConfigError("Failed to parse field: {0}".format(e))

    resolved['field'] = {'dim': field.dim, 'kind': field.kind,
                         'amplitude': field.amplitude, 'radius': field.radius,
                         'nodes': list(field.nodes), 'values': list(field.values)}
    return field


def _parse_mc(spec, dim, resolved):
    try:
        horizon = float(spec.get('t_end', t_end))
        mc = McSpec(replicas=int(spec.get('replicas', replicas)),
                    t_end=horizon,
                    obs_interval=float(spec.get('obs_interval', obs_interval)),
                    cap=int(spec.get('cap', cap)),
                    seed=int(spec.get('seed', seed)),
                    x0=[float(c) for c in spec.get('x0', [0.0] * dim)],
                    return_bound=float(spec.get('return_bound', return_bound)),
                    horizons=[float(h) for h in
                              spec.get('horizons', [0.5 * horizon, horizon])])
    except (TypeError, ValueError):
        raise ParseConfigError("Failed to parse mc values")

    if mc.replicas < 1 or mc.cap < 1 or mc.t_end <= 0 or mc.obs_interval <= 0:
        raise ParseConfigError("mc needs replicas >= 1, cap >= 1 and positive times")
    if len(mc.x0) != dim:
        raise ParseConfigError("x0 must have {0} coordinates".format(dim))
    if not 0 <= mc.seed < 2 ** 64:
        raise ParseConfigError("The seed must fit in 64 bits")
    if any(not 0 < h <= mc.t_end for h in mc.horizons):
        raise ParseConfigError("Classification horizons must lie in (0, t_end]")

    resolved['mc'] = {'replicas': mc.replicas, 't_end': mc.t_end,
                      'obs_interval': mc.obs_interval, 'cap': mc.cap,
                      'seed': mc.seed, 'x0': mc.x0,
                      'return_bound': mc.return_bound, 'horizons': mc.horizons}
    return mc


def _parse_regions(spec, dim, resolved):
    from .regions import parse_region

    regions = {}
    for name, region_spec in sorted(spec.items()):
        try:
            regions[name] = parse_region(region_spec, dim)
        except BranchingError as e:
            raise ParseConfigError("Region {0}: {1}".format(name, e))
    resolved['regions'] = {name: _region_document(spec[name]) for name in regions}
    return regions


def _parse_windows(spec, dim, resolved):
    from .regions import parse_region

    windows = {}
    resolved['windows'] = {}
    for name, window in sorted(spec.items()):
        try:
            region = parse_region(window['region'], dim)
            if 'velocity' in window:
                velocity = [float(c) for c in window['velocity']]
                if len(velocity) != dim:
                    raise ValueError("velocity must have {0} coordinates".format(dim))
                windows[name] = WindowSpec(region, velocity=velocity)
            else:
                direction = [float(c) for c in window.get('direction', [1.0] + [0.0] * (dim - 1))]
                if len(direction) != dim or not any(direction):
                    raise ValueError("direction must be a non-zero {0}-vector".format(dim))
                windows[name] = WindowSpec(region,
                        front_fraction=float(window['front_fraction']),
                        direction=direction)
        except KeyError as e:
            raise ParseConfigError("Window {0}: missing {1}".format(name, e))
        except (TypeError, ValueError, BranchingError) as e:
            raise ParseConfigError("Window {0}: {1}".format(name, e))
        resolved['windows'][name] = _region_document(window)
    return windows


def _parse_analysis(spec, resolved):
    try:
        analysis = {
            'nmax': int(spec.get('nmax', nmax)),
            'z': float(spec.get('z', z)),
            'tolerance': float(spec.get('tolerance', tolerance)),
            'front_delta': float(spec.get('front_delta', front_delta)),
            'front_confidence': float(spec.get('front_confidence',
                                               front_confidence)),
            'moments': [int(n) for n in spec.get('moments', [1, 2])],
        }
    except (TypeError, ValueError):
        raise ParseConfigError("Failed to parse analysis values")

    if analysis['nmax'] < 1 or any(not 1 <= n <= analysis['nmax']
                                   for n in analysis['moments']):
        raise ParseConfigError("Moment orders must lie in 1..nmax")
    resolved['analysis'] = analysis
    return analysis


def _region_document(spec):
    # missing bounds stay missing: JSON cannot carry infinities
    return copy.deepcopy(spec)
