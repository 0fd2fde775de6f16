import os
import json
import unittest
from tempfile import NamedTemporaryFile

import numpy as np

from sbds import config
from sbds.errors import ParseConfigError


WELL = {'field': {'kind': 'square_well', 'dim': 1, 'amplitude': 1.0, 'radius': 1.0}}


class TestFromDocument(unittest.TestCase):
    def test_defaults(self):
        cfg = config.from_document(WELL)
        self.assertEqual(cfg.grid_extent, config.grid_extent)
        self.assertEqual(cfg.grid_nodes, config.grid_nodes)
        self.assertEqual(cfg.mc.seed, config.seed)
        self.assertEqual(cfg.mc.x0, [0.0])
        self.assertEqual(cfg.mc.horizons, [0.5 * config.t_end, config.t_end])
        self.assertEqual(cfg.analysis['moments'], [1, 2])
        self.assertEqual(cfg.output['format'], 'csv')
        self.assertEqual(cfg.dim, 1)

    def test_observation_times(self):
        document = dict(WELL, mc={'t_end': 5.0, 'obs_interval': 2.0,
                                  'horizons': [2.5, 5.0]})
        cfg = config.from_document(document)
        np.testing.assert_array_equal(cfg.mc.obs_times, [2.0, 2.5, 4.0, 5.0])

    def test_horizons_merge_with_the_grid(self):
        # 3 * 0.1 and 7 * 0.1 are a few ulps off 0.3 and 0.7
        mc = config.McSpec(10, 0.7, 0.1, 100, 1, [0.0], 1e-3, [3 * 0.1, 0.7])
        times = mc.obs_times
        self.assertEqual(times.size, 7)
        self.assertEqual(times[-1], 0.7)
        self.assertEqual(times[2], 0.3)
        self.assertTrue(np.all(np.diff(times) > 1e-3))

    def test_hash_is_stable_and_seed_sensitive(self):
        first = config.from_document(WELL)
        second = config.from_document(json.loads(json.dumps(WELL)))
        self.assertEqual(first.hash, second.hash)
        self.assertEqual(len(first.hash), 64)

        reseeded = first.with_seed(7)
        self.assertEqual(reseeded.mc.seed, 7)
        self.assertNotEqual(reseeded.hash, first.hash)

    def test_windows(self):
        document = dict(WELL, windows={
            'fixed': {'region': {'shape': 'interval', 'lo': -1, 'hi': 1},
                      'velocity': [0.1]},
            'front': {'region': {'shape': 'interval', 'lo': -1, 'hi': 1},
                      'front_fraction': 0.4, 'direction': [-2.0]},
        })
        cfg = config.from_document(document)
        np.testing.assert_array_equal(cfg.windows['fixed'].resolve(0.5), [0.1])
        np.testing.assert_allclose(cfg.windows['front'].resolve(0.5), [-0.2])

    def test_tabulated_field(self):
        document = {'field': {'kind': 'tabulated_radial', 'dim': 3,
                              'nodes': [0, 1, 2], 'values': [1, 1, 0]}}
        cfg = config.from_document(document)
        self.assertEqual(cfg.field.support_radius(), 2.0)

    def test_errors(self):
        bad_documents = [
            {},
            [1, 2],
            {'field': {'kind': 'square_well', 'amplitude': -1.0, 'radius': 1.0}},
            dict(WELL, grid={'nodes': 'many'}),
            dict(WELL, grid={'extent': -1.0}),
            dict(WELL, mc={'x0': [0.0, 0.0]}),
            dict(WELL, mc={'horizons': [100.0]}),
            dict(WELL, mc={'seed': -1}),
            dict(WELL, regions={'r': {'shape': 'ball', 'center': [0, 0], 'radius': 1}}),
            dict(WELL, windows={'w': {'region': {'shape': 'everything'}}}),
            dict(WELL, analysis={'moments': [5]}),
            dict(WELL, output={'format': 'xml'}),
        ]
        for document in bad_documents:
            with self.assertRaises(ParseConfigError):
                config.from_document(document)


class TestLoad(unittest.TestCase):
    def test_load(self):
        fname = write_temp_file(json.dumps(WELL))
        cfg = config.load(fname)
        os.remove(fname)
        self.assertEqual(cfg.field.amplitude, 1.0)

    def test_malformed_json(self):
        fname = write_temp_file('{"field": ')
        with self.assertRaises(ParseConfigError):
            config.load(fname)
        os.remove(fname)

    def test_missing_file(self):
        with self.assertRaises(ParseConfigError):
            config.load('/nonexistent/sbds.json')


def write_temp_file(text):
    with NamedTemporaryFile(mode='w', suffix='.json', delete=False) as f:
        f.write(text)
    return f.name
