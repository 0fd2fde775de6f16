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
Exact Monte Carlo of the branching diffusion.

Particles perform standard Brownian motion and split in two at rate v(x).
Branch times are simulated by thinning: each particle carries its own
exponential clock at rate v_max, its position is advanced by an exact
Gaussian increment up to the proposal time, and the split is accepted with
probability v(x) / v_max. There is no time step anywhere.
"""

import math
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .regions import Region


FINITE = 'finite'
GROWING = 'growing'
UNCLASSIFIED = 'unclassified'

CLASSES = (FINITE, GROWING, UNCLASSIFIED)

# A replica counts as quiet when it did not branch during this final
# fraction of the horizon.
QUIET_FRACTION = 0.2

# Radius of the balls probing whether the population covers B((b - delta) t).
PROBE_RADIUS = 1.0


class ParticleStore:
    """
    Flat, append-only storage of particle positions and clocks. Splitting
    appends the children at the end; nothing is ever removed.
    """
    def __init__(self, dim, capacity=64):
        self.dim = dim
        self.count = 0
        self._positions = np.empty((capacity, dim))
        self._clocks = np.empty(capacity)

    @property
    def positions(self):
        return self._positions[:self.count]

    @property
    def clocks(self):
        return self._clocks[:self.count]

    def extend(self, positions, clocks):
        """
        Appends particles and returns their indices.
        """
        new = positions.shape[0]
        if self.count + new > self._clocks.size:
            capacity = max(2 * self._clocks.size, self.count + new)
            self._positions = np.concatenate(
                    (self._positions[:self.count], np.empty((capacity - self.count, self.dim))))
            self._clocks = np.concatenate(
                    (self._clocks[:self.count], np.empty(capacity - self.count)))

        indices = np.arange(self.count, self.count + new)
        self._positions[indices] = positions
        self._clocks[indices] = clocks
        self.count += new
        return indices


class ParticleSnapshot:
    """
    The particles of one replica at one observation time.

    Keyword arguments:
    time        -- observation time
    positions   -- array of shape (count, dim); None once the replica exploded
    replica     -- replica index
    exploded    -- True if the particle cap was exceeded before this time
    last_branch -- time of the latest accepted split (-inf if none)
    count       -- number of particles (needed when positions is None)
    """
    def __init__(self, time, positions, replica=0, exploded=False,
                 last_branch=-np.inf, count=None):
        self.time = time
        self.positions = positions
        self.replica = replica
        self.exploded = exploded
        self.last_branch = last_branch
        self._count = count

    @property
    def count(self):
        if self.positions is None:
            return self._count
        return self.positions.shape[0]

    @property
    def radius(self):
        """
        R_t, the largest distance of a particle from the origin.
        """
        return float(np.linalg.norm(self.positions, axis=1).max())

    def __str__(self):
        return "[t={0:g}] replica={1} particles={2}{3}".format(
                self.time, self.replica, self.count,
                " exploded" if self.exploded else "")


def replica_stream(seed, index):
    """
    Counter-based generator of replica `index`, keyed by (seed, index).
    """
    sequence = np.random.SeedSequence(seed, spawn_key=(index,))
    return np.random.Generator(np.random.Philox(sequence))


def simulate_replica(field, x0, t_end, obs_times, cap, rng, replica=0):
    """
    Simulates one replica started from a single particle at x0 and yields
    a ParticleSnapshot at every observation time. If the number of
    particles exceeds cap, a last snapshot flagged exploded (without
    positions) is yielded and the replica stops.
    """
    obs_times = np.asarray(obs_times, dtype=float)
    if np.any(np.diff(obs_times) < 0) or (obs_times.size and obs_times[-1] > t_end):
        raise ValueError("observation times must be sorted and <= t_end")
    if cap < 1:
        raise ValueError("the particle cap must be >= 1")

    dim = field.dim
    vmax = field.max_rate()
    store = ParticleStore(dim)
    store.extend(np.asarray(x0, dtype=float).reshape(1, dim), np.zeros(1))
    last_branch = -np.inf

    def move(indices, times):
        elapsed = times - store.clocks[indices]
        steps = rng.standard_normal((indices.size, dim))
        store.positions[indices] += np.sqrt(elapsed)[:, None] * steps
        store.clocks[indices] = times

    for tau in obs_times:
        pending = np.arange(store.count)
        while pending.size:
            if vmax == 0:
                move(pending, np.full(pending.size, tau))
                break

            proposals = store.clocks[pending] + rng.exponential(1.0 / vmax, pending.size)
            finished = proposals >= tau
            move(pending[finished], np.full(finished.sum(), tau))

            active = pending[~finished]
            move(active, proposals[~finished])
            accept = rng.random(active.size) * vmax < field.eval(store.positions[active])

            parents = active[accept]
            if parents.size:
                last_branch = max(last_branch, float(store.clocks[parents].max()))
                children = store.extend(store.positions[parents].copy(),
                                        store.clocks[parents].copy())
                if store.count > cap:
                    logging.debug("Replica {0} exploded at t={1:g} with {2} "
                                  "particles".format(replica, last_branch, store.count))
                    yield ParticleSnapshot(tau, None, replica, True, last_branch,
                                           store.count)
                    return
                active = np.concatenate((active, children))
            pending = active

        yield ParticleSnapshot(float(tau), store.positions.copy(), replica, False,
                               last_branch)


def count_in(snapshot, region):
    """
    Number of particles of the snapshot inside the region.
    """
    return int(np.count_nonzero(region.contains(snapshot.positions)))


def finite_distance(dim, support, return_bound):
    """
    Distance from the origin beyond which a particle counts as gone: in
    dim >= 3 a Brownian particle at radius r hits the support ball with
    probability (a / r)^(d - 2), so r > a * bound^(-1 / (d - 2)). Returns
    are certain in dim <= 2; there the support radius itself is used and
    the "finite" class is provisional.
    """
    if dim <= 2:
        return support
    return support * return_bound ** (-1.0 / (dim - 2))


def classify(snapshot, field, return_bound):
    """
    Classifies a replica at the time of the snapshot: GROWING if it
    exploded or split during the final QUIET_FRACTION of the horizon,
    FINITE if it is quiet and every particle lies beyond finite_distance,
    UNCLASSIFIED otherwise.
    """
    if snapshot.exploded:
        return GROWING
    if field.max_rate() == 0:
        return FINITE
    if snapshot.last_branch > (1.0 - QUIET_FRACTION) * snapshot.time:
        return GROWING

    distance = finite_distance(field.dim, field.support_radius(), return_bound)
    if np.all(np.linalg.norm(snapshot.positions, axis=1) > distance):
        return FINITE
    return UNCLASSIFIED


def yule_distribution(beta, t, k):
    """
    P(N_t = k) of a pure-birth process with rate beta started from one
    individual.
    """
    p = math.exp(-beta * t)
    return p * (1.0 - p) ** (k - 1)


def probe_directions(dim):
    """
    The 2 dim coordinate directions +-e_i along which coverage is probed.
    """
    eye = np.eye(dim)
    return np.concatenate((eye, -eye))


class EnsembleStats:
    """
    Per-replica trajectories of an ensemble (rows = replicas, columns =
    observation times). Entries after a replica exploded are NaN.

    Keyword arguments:
    times      -- observation times
    counts     -- N_t
    regions    -- name -> n_t(U)
    windows    -- name -> n_t(U + t v)
    velocities -- name -> velocity of the window
    radius     -- R_t
    martingale -- exp(-lambda0 t) sum psi(X_i(t)), or None
    probes     -- fraction of the probe balls holding a particle, or None
    horizons   -- classification times
    classes    -- array (horizons, replicas) of CLASSES
    terminal   -- array (horizons, replicas) of N at each horizon (NaN if
                  exploded)
    exploded   -- per-replica explosion flags
    seed       -- seed of the replica streams
    x0         -- start point
    lambda0    -- principal eigenvalue the martingale used, or None
    cap        -- particle cap
    """
    def __init__(self, times, counts, regions, windows, velocities, radius,
                 martingale, probes, horizons, classes, terminal, exploded,
                 seed, x0, lambda0=None, cap=None, probe_speed=None):
        self.times = times
        self.counts = counts
        self.regions = regions
        self.windows = windows
        self.velocities = velocities
        self.radius = radius
        self.martingale = martingale
        self.probes = probes
        self.horizons = horizons
        self.classes = classes
        self.terminal = terminal
        self.exploded = exploded
        self.seed = seed
        self.x0 = x0
        self.lambda0 = lambda0
        self.cap = cap
        self.probe_speed = probe_speed

    @property
    def replicas(self):
        return self.counts.shape[0]

    @property
    def streams(self):
        """
        Spawn keys of the replica streams.
        """
        return list(range(self.replicas))

    @property
    def cap_hits(self):
        return int(np.count_nonzero(self.exploded))

    def survival_fractions(self, horizon=-1):
        classes = self.classes[horizon]
        return {name: float(np.mean(classes == name)) for name in CLASSES}

    def growing(self, horizon=-1):
        return self.classes[horizon] == GROWING

    def recorded(self, column=-1):
        """
        Replicas still recorded (not exploded) at the given observation time.
        """
        return ~np.isnan(self.counts[:, column])


class ReplicaObserver:
    """
    Reduces the snapshots of one replica to the recorded observables.
    """
    def __init__(self, field, times, regions, windows, spectral, probe_speed,
                 horizons, return_bound):
        self.field = field
        self.times = times
        self.regions = regions
        self.windows = windows
        self.spectral = spectral
        self.probe_speed = probe_speed
        self.horizons = horizons
        self.return_bound = return_bound
        self.directions = probe_directions(field.dim)

    def observe(self, snapshots):
        size = self.times.size
        record = {
            'counts': np.full(size, np.nan),
            'radius': np.full(size, np.nan),
            'martingale': np.full(size, np.nan),
            'probes': np.full(size, np.nan),
            'regions': {name: np.full(size, np.nan) for name in self.regions},
            'windows': {name: np.full(size, np.nan) for name in self.windows},
            'classes': [GROWING] * len(self.horizons),
            'terminal': np.full(len(self.horizons), np.nan),
            'exploded': False,
        }

        for column, snapshot in enumerate(snapshots):
            if snapshot.exploded:
                record['exploded'] = True
                break

            t = snapshot.time
            record['counts'][column] = snapshot.count
            record['radius'][column] = snapshot.radius
            for name, region in self.regions.items():
                record['regions'][name][column] = count_in(snapshot, region)
            for name, (region, velocity) in self.windows.items():
                record['windows'][name][column] = count_in(
                        snapshot, region.shifted(t * velocity))
            if self.spectral is not None:
                record['martingale'][column] = math.exp(-self.spectral.lambda0 * t) * \
                        float(np.sum(self.spectral.psi_at(snapshot.positions)))
            if self.probe_speed is not None:
                record['probes'][column] = self._covered(snapshot, t)

            for h, horizon in enumerate(self.horizons):
                if abs(horizon - t) < 1e-9:
                    record['classes'][h] = classify(snapshot, self.field,
                                                    self.return_bound)
                    record['terminal'][h] = snapshot.count

        return record

    def _covered(self, snapshot, t):
        hits = 0
        for direction in self.directions:
            ball = Region.ball(self.probe_speed * t * direction, PROBE_RADIUS)
            hits += count_in(snapshot, ball) > 0
        return hits / len(self.directions)


def run_ensemble(field, mc, regions=None, windows=None, spectral=None,
                 probe_speed=None, threads=1):
    """
    Runs mc.replicas independent replicas, replica i drawing from
    replica_stream(mc.seed, i), and reduces them in replica order. The
    result does not depend on the number of worker threads.

    Keyword arguments:
    field       -- the RateField
    mc          -- a config.McSpec
    regions     -- name -> Region counted at every observation time
    windows     -- name -> (Region, velocity) counted as U + t v
    spectral    -- SpectralData for the psi-martingale (optional)
    probe_speed -- radial speed (b - delta) of the coverage probes (optional)
    threads     -- size of the worker pool
    """
    regions = regions or {}
    windows = {name: (region, np.asarray(velocity, dtype=float))
               for name, (region, velocity) in (windows or {}).items()}
    times = mc.obs_times
    observer = ReplicaObserver(field, times, regions, windows, spectral,
                               probe_speed, list(mc.horizons), mc.return_bound)

    def work(index):
        rng = replica_stream(mc.seed, index)
        snapshots = simulate_replica(field, mc.x0, mc.t_end, times, mc.cap, rng,
                                     replica=index)
        return observer.observe(snapshots)

    logging.info("Running {0} replicas on {1} thread(s), t_end={2:g}, seed={3}"\
                 .format(mc.replicas, threads, mc.t_end, mc.seed))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(work, range(mc.replicas)))
    else:
        records = [work(index) for index in range(mc.replicas)]

    stats = EnsembleStats(
            times=times,
            counts=np.vstack([r['counts'] for r in records]),
            regions={name: np.vstack([r['regions'][name] for r in records])
                     for name in regions},
            windows={name: np.vstack([r['windows'][name] for r in records])
                     for name in windows},
            velocities={name: velocity for name, (_, velocity) in windows.items()},
            radius=np.vstack([r['radius'] for r in records]),
            martingale=np.vstack([r['martingale'] for r in records])
                       if spectral is not None else None,
            probes=np.vstack([r['probes'] for r in records])
                   if probe_speed is not None else None,
            horizons=list(mc.horizons),
            classes=np.array([r['classes'] for r in records]).T,
            terminal=np.vstack([r['terminal'] for r in records]).T,
            exploded=np.array([r['exploded'] for r in records]),
            seed=mc.seed,
            x0=list(mc.x0),
            lambda0=spectral.lambda0 if spectral is not None else None,
            cap=mc.cap,
            probe_speed=probe_speed)

    if stats.cap_hits:
        logging.warning("{0} of {1} replicas exceeded the cap of {2} particles"\
                        .format(stats.cap_hits, stats.replicas, mc.cap))
    logging.info("Ensemble done: survival fractions {0}".format(
            stats.survival_fractions()))
    return stats
